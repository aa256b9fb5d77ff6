import numpy as np
import pytest

from finqlab.bsm import Dataset, MarketPoint, PriceLabel, generate_dataset
from finqlab.model import FinqbitParams, FourQubitParams
from finqlab.training import (
    Adam,
    DivergenceError,
    FourierSlice,
    TrainConfig,
    _compile,
    _init_params,
    fourier_spectrum,
    fourier_slice,
    mse_loss,
    parameter_shift_gradient,
    train,
)


def small_dataset(n=16, seed=5):
    return generate_dataset(n, seed=seed)


def random_params(seed=0, phi_scale=1.0):
    rng = np.random.default_rng(seed)
    return FinqbitParams(theta=rng.uniform(-np.pi, np.pi, 24), phi=phi_scale * np.ones(12))


def fd_gradient(params, dataset, h=1e-5):
    flat = params.flat()
    out = np.zeros(flat.size)
    for i in range(flat.size):
        up = flat.copy()
        up[i] += h
        down = flat.copy()
        down[i] -= h
        out[i] = (
            mse_loss(FinqbitParams.from_flat(up), dataset)
            - mse_loss(FinqbitParams.from_flat(down), dataset)
        ) / (2 * h)
    return out


class TestLoss:
    def test_zero_when_predictions_match(self):
        ds = small_dataset()
        p = random_params(1)
        ev = _compile(p, ds)
        f = ev.expectations(p.flat())
        matched = Dataset(points=ds.points, labels=[PriceLabel(c_hat=float(v)) for v in f])
        assert mse_loss(p, matched) == pytest.approx(0.0, abs=1e-28)

    def test_single_sample_formula(self):
        ds = small_dataset(1)
        p = random_params(2)
        f = _compile(p, ds).expectations(p.flat())[0]
        y = ds.labels[0].c_hat
        assert mse_loss(p, ds) == pytest.approx((f - y) ** 2, rel=1e-12)

    def test_unclamped(self):
        # a circuit with <Z0> = -1 must register squared error (1 + y)^2, not y^2
        theta = np.zeros(24)
        theta[21] = np.pi
        p = FinqbitParams(theta=theta, phi=np.zeros(12))
        ds = Dataset(points=[MarketPoint(1.0, 1.0, 0.05, 0.2)], labels=[PriceLabel(0.1)])
        assert mse_loss(p, ds) == pytest.approx(1.1**2, abs=1e-10)

    def test_deterministic(self):
        ds = generate_dataset(500, seed=42)
        p = random_params(3)
        assert mse_loss(p, ds) == mse_loss(p, ds)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mse_loss(random_params(), Dataset(points=[], labels=[]))


class TestGradient:
    def test_matches_fd_at_zero_point(self):
        ds = small_dataset()
        p = FinqbitParams(theta=np.zeros(24), phi=np.zeros(12))
        g = parameter_shift_gradient(p, ds)
        assert np.max(np.abs(g - fd_gradient(p, ds))) <= 1e-6

    def test_matches_fd_random_points(self):
        ds = small_dataset()
        for seed in range(5):
            p = random_params(seed)
            g = parameter_shift_gradient(p, ds)
            assert np.max(np.abs(g - fd_gradient(p, ds))) <= 1e-6

    def test_lightcone_zero_gradient(self):
        # U3 angles on qubit 0 in the final block commute past the measurement
        ds = small_dataset()
        g = parameter_shift_gradient(random_params(7), ds)
        for a in range(3):
            assert abs(g[3 * 6 + 0 * 3 + a]) <= 1e-12

    def test_scaler_gradient_zero_for_zero_feature(self):
        # r = 0 kills every scaler gradient for the rate feature (chain rule)
        ds = Dataset(
            points=[MarketPoint(m=1.0, T=0.5, r=0.0, sigma=0.3)],
            labels=[PriceLabel(0.2)],
        )
        g = parameter_shift_gradient(random_params(8), ds)
        for layer in range(3):
            assert g[24 + layer * 4 + 2] == 0.0

    def test_four_qubit_gradient_matches_fd(self):
        ds = small_dataset(8)
        rng = np.random.default_rng(4)
        p = FourQubitParams(variant="baseline", L=1, theta=rng.uniform(-np.pi, np.pi, 12))
        g = parameter_shift_gradient(p, ds)
        h = 1e-5
        fd = np.zeros(12)
        for i in range(12):
            up, down = p.theta.copy(), p.theta.copy()
            up[i] += h
            down[i] -= h
            fd[i] = (
                mse_loss(FourQubitParams("baseline", 1, up), ds)
                - mse_loss(FourQubitParams("baseline", 1, down), ds)
            ) / (2 * h)
        assert np.max(np.abs(g - fd)) <= 1e-6


class TestAdam:
    def test_quadratic_descent(self):
        opt = Adam(lr=0.1)
        x = np.array([3.0, -2.0])
        for _ in range(500):
            x = opt.step(x, 2 * x)
        assert np.max(np.abs(x)) < 1e-3


class TestTrain:
    def make_split(self):
        full = generate_dataset(60, seed=21)
        idx = np.arange(60)
        return full.subset(idx[10:]), full.subset(idx[:10])

    def config(self, **kw):
        base = dict(target="finqbit", max_iters=8, restarts=2, seed=3, early_stop_patience=5)
        base.update(kw)
        return TrainConfig(**base)

    def test_deterministic_report(self):
        tr, va = self.make_split()
        a = train(self.config(), tr, va)
        b = train(self.config(), tr, va)
        assert np.array_equal(a.best_params.flat(), b.best_params.flat())
        assert a.loss_history == b.loss_history
        assert a.restart_index == b.restart_index

    def test_best_so_far_envelope_nonincreasing(self):
        tr, va = self.make_split()
        report = train(self.config(max_iters=30, restarts=1), tr, va)
        val = [v for _, _, v in report.loss_history]
        envelope = np.minimum.accumulate(val)
        assert all(b <= a + 1e-15 for a, b in zip(envelope, envelope[1:]))

    def test_early_stopping(self):
        tr, va = self.make_split()
        report = train(self.config(max_iters=500, restarts=1, early_stop_patience=3), tr, va)
        assert report.restarts[0].iterations < 500

    def test_disjointness_enforced(self):
        tr, _ = self.make_split()
        with pytest.raises(ValueError, match="disjoint"):
            train(self.config(), tr, tr.subset([0]))

    def test_final_metrics_use_clamped_predictions(self):
        tr, va = self.make_split()
        report = train(self.config(), tr, va)
        ev = _compile(report.best_params, va)
        preds = np.maximum(ev.expectations(report.best_params.flat()), 0.0)
        err = preds - va.label_vector()
        assert report.final_metrics.mse == pytest.approx(float(np.mean(err**2)), rel=1e-12)

    def test_divergence_detected(self):
        # labels sit just off the restart-0 initial outputs: the initial loss is
        # tiny but the gradient is not, and a huge learning rate then keeps the
        # loss far above 10x the initial value for 50+ iterations
        full = generate_dataset(30, seed=2)
        cfg = self.config(max_iters=80, restarts=1, seed=11, learning_rate=200.0,
                          early_stop_patience=1000)
        stream = np.random.SeedSequence(cfg.seed).spawn(1)[0]
        init = _init_params(cfg, np.random.default_rng(stream))
        f = _compile(init, full).expectations(init.flat())
        rigged = Dataset(points=full.points, labels=[PriceLabel(float(v) + 0.01) for v in f])
        tr = rigged.subset(range(25))
        va = rigged.subset(range(25, 30))
        with pytest.raises(DivergenceError):
            train(cfg, tr, va)

    def test_history_csv(self):
        tr, va = self.make_split()
        report = train(self.config(), tr, va)
        lines = report.history_csv().strip().splitlines()
        assert lines[0] == "iter,train_mse,val_mse"
        assert len(lines) == len(report.loss_history) + 1

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(target="baseline4")  # missing layers
        with pytest.raises(ValueError):
            TrainConfig(restarts=0)


class TestFourier:
    def test_toy_single_encoding_spectrum(self):
        # <Z> after Ry(a) Rx(x) Ry(b) |0> is a degree-1 trig polynomial in x
        from finqlab.simulator import GateSpec, apply_gate, expectation_z, zero_state

        def f(x):
            s = zero_state(1)
            for g in (GateSpec("RY", (0,), (0.7,)), GateSpec("RX", (0,), (x,)),
                      GateSpec("RY", (0,), (1.3,))):
                s = apply_gate(s, g)
            return expectation_z(s, 0)

        freqs, coeffs = fourier_spectrum(f, 2 * np.pi, 17)
        for w, c in zip(freqs, coeffs):
            if abs(w) > 1:
                assert abs(c) <= 1e-8
        assert max(abs(c) for w, c in zip(freqs, coeffs) if abs(w) == 1) > 1e-3

    def test_single_layer_injection_band_limit(self):
        phi = np.zeros(12)
        phi[0] = 1.0  # layer 1 scaler for m only; m never re-injected
        rng = np.random.default_rng(6)
        p = FinqbitParams(theta=rng.uniform(-np.pi, np.pi, 24), phi=phi)
        sl = fourier_slice(p, MarketPoint(1.0, 1.0, 0.05, 0.2), feature=0, n_samples=21)
        for w, c in zip(sl.frequencies, sl.coefficients):
            if abs(w) > 1:
                assert abs(c) <= 1e-8

    def test_three_layer_spectrum_growth(self):
        rng = np.random.default_rng(7)
        p = FinqbitParams(theta=rng.uniform(-np.pi, np.pi, 24), phi=np.ones(12))
        sl = fourier_slice(p, MarketPoint(1.0, 1.0, 0.05, 0.2), feature=3, n_samples=31)
        mags = {w: abs(c) for w, c in zip(sl.frequencies, sl.coefficients)}
        assert all(mags[w] <= 1e-8 for w in mags if abs(w) > 3)
        assert mags[3] > 1e-8 and mags[-3] > 1e-8

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(8)
        p = FinqbitParams(theta=rng.uniform(-np.pi, np.pi, 24), phi=np.ones(12))
        sl = fourier_slice(p, MarketPoint(1.0, 1.0, 0.05, 0.2), feature=1, n_samples=25)
        by_freq = dict(zip(sl.frequencies, sl.coefficients))
        for w in range(1, 4):
            assert by_freq[-w] == pytest.approx(np.conj(by_freq[w]), abs=1e-8)

    def test_undersampling_rejected(self):
        p = random_params()
        with pytest.raises(ValueError, match="undersampled"):
            fourier_slice(p, MarketPoint(1.0, 1.0, 0.05, 0.2), feature=0, n_samples=5)

    def test_slice_invariant(self):
        with pytest.raises(ValueError):
            FourierSlice(feature=0, frequencies=[0, 1], coefficients=[0j])
