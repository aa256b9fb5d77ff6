import numpy as np
import pytest

from finqlab.bsm import MarketPoint
from finqlab.compression import (
    CanonicalAnsatz,
    bound_unitary,
    compress_benchmark_suite,
    fit_canonical,
    phase_invariant_distance,
)
from finqlab.model import FinqbitParams, raw_expectation
from finqlab.simulator import circuit_unitary, expectation_z, run_circuit

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CNOT_PAIR = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 1, 0, 0]], dtype=complex)


def haar_unitary(rng):
    z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_point(rng):
    return MarketPoint(
        m=rng.uniform(0.8, 1.2), T=rng.uniform(0.2, 1.1),
        r=rng.uniform(0.02, 0.1), sigma=rng.uniform(0.01, 1.0),
    )


class TestCanonicalAnsatz:
    def test_exactly_three_cnots(self):
        c = CanonicalAnsatz(np.zeros(15)).to_circuit()
        assert c.cnot_count() == 3

    def test_unitary_for_any_angles(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            u = CanonicalAnsatz(rng.uniform(-np.pi, np.pi, 15)).unitary()
            assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-12

    def test_fast_unitary_matches_circuit_path(self):
        rng = np.random.default_rng(2)
        a = CanonicalAnsatz(rng.uniform(-np.pi, np.pi, 15))
        assert np.max(np.abs(a.unitary() - circuit_unitary(a.to_circuit()))) <= 1e-12


class TestDistance:
    def test_self_distance_zero(self):
        rng = np.random.default_rng(3)
        u = haar_unitary(rng)
        assert phase_invariant_distance(u, u) == pytest.approx(0.0, abs=1e-14)

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(4)
        u, v = haar_unitary(rng), haar_unitary(rng)
        for alpha in (np.pi / 3, 1.0, -2.2):
            assert phase_invariant_distance(u, np.exp(1j * alpha) * u) == pytest.approx(0.0, abs=1e-12)
            assert phase_invariant_distance(u, np.exp(1j * alpha) * v) == pytest.approx(
                phase_invariant_distance(u, v), abs=1e-12
            )

    def test_identity_vs_cnot(self):
        assert phase_invariant_distance(np.eye(4, dtype=complex), CNOT) == pytest.approx(0.5)

    def test_non_unitary_rejected(self):
        with pytest.raises(ValueError, match="unitary"):
            phase_invariant_distance(np.eye(4) * 1.5, CNOT)


class TestBoundUnitary:
    def test_zero_params_basis_permutation(self):
        # the zero-angle blocks leave the bare CNOT pairs; their fourth power
        # is the pair itself, not the identity
        p = FinqbitParams(theta=np.zeros(24), phi=np.zeros(12))
        u = bound_unitary(MarketPoint(1.0, 1.0, 0.05, 0.2), p)
        assert np.allclose(u, CNOT_PAIR, atol=1e-12)

    def test_unitarity(self):
        rng = np.random.default_rng(5)
        p = FinqbitParams(theta=rng.uniform(-np.pi, np.pi, 24), phi=rng.uniform(0, 2, 12))
        u = bound_unitary(random_point(rng), p)
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-10

    def test_distinct_inputs_distinct_unitaries(self):
        rng = np.random.default_rng(6)
        p = FinqbitParams(theta=rng.uniform(-np.pi, np.pi, 24), phi=np.ones(12))
        u1 = bound_unitary(MarketPoint(0.8, 1.0, 0.05, 0.2), p)
        u2 = bound_unitary(MarketPoint(1.2, 1.0, 0.05, 0.2), p)
        assert phase_invariant_distance(u1, u2) > 1e-6


class TestFit:
    def test_identity_target(self):
        res = fit_canonical(np.eye(4, dtype=complex), seed=0, tol=1e-10)
        assert res.converged and res.distance <= 1e-10

    def test_haar_targets(self):
        rng = np.random.default_rng(7)
        for _ in range(3):
            res = fit_canonical(haar_unitary(rng), seed=1, tol=1e-6)
            assert res.converged and res.distance <= 1e-6

    def test_idempotent_on_canonical_unitaries(self):
        rng = np.random.default_rng(8)
        target = CanonicalAnsatz(rng.uniform(-np.pi, np.pi, 15)).unitary()
        res = fit_canonical(target, seed=2, tol=1e-10)
        assert res.distance <= 1e-10

    def test_budget_exhaustion_flagged(self):
        rng = np.random.default_rng(9)
        res = fit_canonical(haar_unitary(rng), seed=3, tol=1e-12, max_iters=3, restarts=1)
        assert not res.converged
        assert res.distance > 1e-12

    def test_prediction_preserved(self):
        rng = np.random.default_rng(10)
        p = FinqbitParams(theta=rng.uniform(-np.pi, np.pi, 24), phi=np.ones(12))
        x = MarketPoint(1.0, 1.0, 0.05, 0.2)
        target = bound_unitary(x, p)
        res = fit_canonical(target, seed=4, tol=1e-10)
        z_orig = raw_expectation(x, p)
        z_comp = expectation_z(run_circuit(res.angles.to_circuit()), 0)
        assert abs(z_orig - z_comp) <= 10 * np.sqrt(2 * res.distance) + 1e-12
        assert abs(z_orig - z_comp) <= 1e-4

    def test_bad_tol_rejected(self):
        with pytest.raises(ValueError):
            fit_canonical(np.eye(4, dtype=complex), tol=0.0)


class TestSuite:
    def test_two_point_suite(self):
        rng = np.random.default_rng(11)
        p = FinqbitParams(theta=rng.uniform(-np.pi, np.pi, 24), phi=np.ones(12))
        points = [MarketPoint(0.8, 1.0, 0.05, 0.2), MarketPoint(1.2, 1.0, 0.05, 0.2)]
        suite = compress_benchmark_suite(p, points, seed=5, tol=1e-8)
        assert len(suite) == 2
        for x, (circuit, result) in zip(points, suite):
            assert circuit.cnot_count() == 3
            assert result.converged
            u = circuit_unitary(circuit)
            assert phase_invariant_distance(u, bound_unitary(x, p)) <= 1e-7
