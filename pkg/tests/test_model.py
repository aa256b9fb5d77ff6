import json

import numpy as np
import pytest

from finqlab.bsm import MarketPoint
from finqlab.model import (
    DEFAULT_SCHEDULE,
    FinqbitParams,
    FourQubitParams,
    PermutationSchedule,
    build_4q_baseline,
    build_4q_fourier,
    build_finqbit_circuit,
    load_params,
    predict_price,
    raw_expectation,
)
from finqlab.simulator import circuit_unitary, expectation_z, run_circuit

X0 = MarketPoint(m=1.0, T=1.0, r=0.05, sigma=0.2)

# CX(1->0) @ CX(0->1): a 3-cycle on {|01>,|11>,|10>} fixing |00>
CNOT_PAIR = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 1, 0, 0]], dtype=complex
)


def random_params(seed=0):
    rng = np.random.default_rng(seed)
    return FinqbitParams(theta=rng.uniform(-np.pi, np.pi, 24), phi=rng.uniform(0.5, 1.5, 12))


class TestStructure:
    def test_gate_census(self):
        c = build_finqbit_circuit(X0, random_params())
        kinds = [g.kind for g in c.gates]
        assert kinds.count("U3") == 8
        assert kinds.count("CNOT") == 8
        assert kinds.count("RX") + kinds.count("RY") == 12
        assert c.n_qubits == 2

    def test_parameter_count(self):
        p = random_params()
        assert p.flat().size == 36
        assert p.theta.size == 24 and p.phi.size == 12

    def test_w_block_order(self):
        # first three gates: U3 q0, U3 q1, CNOT(0->1), then CNOT(1->0)
        c = build_finqbit_circuit(X0, random_params())
        assert [g.kind for g in c.gates[:4]] == ["U3", "U3", "CNOT", "CNOT"]
        assert c.gates[2].targets == (0, 1)
        assert c.gates[3].targets == (1, 0)

    def test_encoding_order_rx_then_ry(self):
        c = build_finqbit_circuit(X0, random_params())
        # after the first W block (4 gates): S1 on q0 is RX then RY
        assert c.gates[4].kind == "RX" and c.gates[4].targets == (0,)
        assert c.gates[5].kind == "RY" and c.gates[5].targets == (0,)

    def test_w_block_at_zero_is_cnot_pair(self):
        p = FinqbitParams(theta=np.zeros(24), phi=np.zeros(12))
        c = build_finqbit_circuit(X0, p)
        w1 = circuit_unitary(type(c)(n_qubits=2, gates=c.gates[:4]))
        assert np.allclose(w1, CNOT_PAIR, atol=1e-12)

    def test_zero_params_unitary_is_basis_permutation(self):
        # four zero-angle W blocks compose to the 3-cycle itself (P^4 = P);
        # |00> is fixed, so the readout expectation is still +1
        p = FinqbitParams(theta=np.zeros(24), phi=np.zeros(12))
        u = circuit_unitary(build_finqbit_circuit(X0, p))
        assert np.allclose(u, CNOT_PAIR, atol=1e-12)
        assert predict_price(X0, p) == pytest.approx(1.0, abs=1e-12)

    def test_data_injection_changes_unitary(self):
        p = random_params()
        x2 = MarketPoint(m=1.1, T=0.9, r=0.03, sigma=0.4)
        u1 = circuit_unitary(build_finqbit_circuit(X0, p))
        u2 = circuit_unitary(build_finqbit_circuit(x2, p))
        assert np.max(np.abs(u1 - u2)) > 1e-6

    def test_schedule_feature_completeness(self):
        for layer in DEFAULT_SCHEDULE.layers:
            used = sorted(f for pair in layer for f in pair)
            assert used == [0, 1, 2, 3]

    def test_schedule_layout(self):
        # (m,sigma)->Q0 (T,r)->Q1 / (T,m)->Q0 (r,sigma)->Q1 / (m,T)->Q0 (r,sigma)->Q1
        assert DEFAULT_SCHEDULE.layers == (
            ((0, 3), (1, 2)),
            ((1, 0), (2, 3)),
            ((0, 1), (2, 3)),
        )

    def test_bad_schedule_rejected(self):
        with pytest.raises(ValueError):
            PermutationSchedule(layers=(((0, 1), (1, 2)),))

    def test_scaling_linearity(self):
        # doubling a feature while halving its scalers leaves the unitary fixed
        p = random_params(3)
        x = MarketPoint(m=1.0, T=0.5, r=0.04, sigma=0.3)
        x2 = MarketPoint(m=1.0, T=1.0, r=0.04, sigma=0.3)  # T doubled
        p2 = FinqbitParams(theta=p.theta.copy(), phi=p.phi.copy())
        for layer in range(3):
            p2.phi[layer * 4 + 1] /= 2.0  # halve every T scaler
        u1 = circuit_unitary(build_finqbit_circuit(x, p))
        u2 = circuit_unitary(build_finqbit_circuit(x2, p2))
        assert np.max(np.abs(u1 - u2)) <= 1e-12


class TestPredict:
    def test_clamp_negative(self):
        # Ry(pi) on qubit 1 in the last block: the trailing CNOT pair routes
        # the excitation onto qubit 0, driving <Z0> to -1
        theta = np.zeros(24)
        theta[21] = np.pi  # W4, qubit 1, Ry angle of U3
        p = FinqbitParams(theta=theta, phi=np.zeros(12))
        assert raw_expectation(X0, p) == pytest.approx(-1.0, abs=1e-12)
        assert predict_price(X0, p) == 0.0

    def test_bounded_unit_interval(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = FinqbitParams(theta=rng.uniform(-4, 4, 24), phi=rng.uniform(-3, 3, 12))
            x = MarketPoint(
                m=rng.uniform(0.8, 1.2), T=rng.uniform(0.2, 1.1),
                r=rng.uniform(0.02, 0.1), sigma=rng.uniform(0.01, 1.0),
            )
            assert 0.0 <= predict_price(x, p) <= 1.0

    def test_shot_mode_deterministic(self):
        p = random_params(5)
        a = predict_price(X0, p, shots=2000, seed=42)
        b = predict_price(X0, p, shots=2000, seed=42)
        assert a == b
        exact = predict_price(X0, p)
        assert abs(a - exact) < 0.1


class TestFourQubit:
    @pytest.mark.parametrize("L,n_params,n_cx", [(1, 12, 4), (2, 24, 8), (3, 36, 12), (4, 48, 16)])
    def test_baseline_resource_counts(self, L, n_params, n_cx):
        p = FourQubitParams(variant="baseline", L=L, theta=np.zeros(12 * L))
        c = build_4q_baseline(X0, p)
        assert p.n_params() == n_params
        assert c.cnot_count() == n_cx

    @pytest.mark.parametrize("L,n_params,n_cx", [(1, 24, 8), (2, 36, 12), (3, 48, 16), (4, 60, 20)])
    def test_fourier_resource_counts(self, L, n_params, n_cx):
        p = FourQubitParams(variant="fourier", L=L, theta=np.zeros(12 * (L + 1)))
        c = build_4q_fourier(X0, p)
        assert p.n_params() == n_params
        assert c.cnot_count() == n_cx

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError):
            FourQubitParams(variant="baseline", L=3, theta=np.zeros(24))

    def test_zero_angle_lightcone_closed_form(self):
        # with all trainable angles zero the observable back-propagates through
        # the CNOT ring to Z1 Z2 Z3, so <Z0> = cos(T) cos(r) cos(sigma):
        # independent of the qubit-0 feature m
        p = FourQubitParams(variant="baseline", L=1, theta=np.zeros(12))
        for x in (X0, MarketPoint(m=0.85, T=1.0, r=0.05, sigma=0.2)):
            z = expectation_z(run_circuit(build_4q_baseline(x, p)), 0)
            assert z == pytest.approx(np.cos(x.T) * np.cos(x.r) * np.cos(x.sigma), abs=1e-12)

    def test_fourier_zero_w0_reduces_to_baseline_plus_cnot_ring(self):
        from finqlab.simulator import CircuitDescription

        rng = np.random.default_rng(9)
        shared = rng.uniform(-np.pi, np.pi, 24)
        pf = FourQubitParams(variant="fourier", L=2, theta=np.concatenate([np.zeros(12), shared]))
        pb = FourQubitParams(variant="baseline", L=2, theta=shared)
        uf = circuit_unitary(build_4q_fourier(X0, pf))
        # the zero-angle W0 leaves only its CNOT ring in front
        ring_gates = build_4q_fourier(X0, pf).gates[12:16]
        assert all(g.kind == "CNOT" for g in ring_gates)
        ring = circuit_unitary(CircuitDescription(n_qubits=4, gates=ring_gates))
        ub = circuit_unitary(build_4q_baseline(X0, pb))
        assert np.allclose(uf, ub @ ring, atol=1e-10)


class TestSerialization:
    def test_finqbit_round_trip(self):
        p = random_params(21)
        obj = json.loads(p.to_json())
        assert set(obj) == {"theta", "phi", "schedule_version"}
        assert obj["schedule_version"] == 1
        q = FinqbitParams.from_json(p.to_json())
        assert np.array_equal(q.theta, p.theta) and np.array_equal(q.phi, p.phi)

    def test_four_qubit_round_trip(self):
        p = FourQubitParams(variant="fourier", L=2, theta=np.arange(36.0))
        obj = json.loads(p.to_json())
        assert obj["variant"] == "fourier" and obj["L"] == 2
        q = FourQubitParams.from_json(p.to_json())
        assert np.array_equal(q.theta, p.theta)

    def test_dispatch(self):
        assert isinstance(load_params(random_params().to_json()), FinqbitParams)
        p4 = FourQubitParams(variant="baseline", L=1, theta=np.zeros(12))
        assert isinstance(load_params(p4.to_json()), FourQubitParams)
