"""Supervised training of circuit parameters against BSM labels.

The loss is the MSE of the *unclamped* readout expectation f_raw = <Z_0>;
the max(0, .) clamp is applied only at inference, so gradients survive in
regions where the expectation dips below zero. Reported evaluation metrics
always use the clamped prediction.

Gradients use the parameter-shift rule: every trainable angle enters through
a rotation generated by a Pauli/2, so d<Z>/d(angle) = [<Z>(angle + pi/2) -
<Z>(angle - pi/2)] / 2, and scaler gradients pick up the chain-rule factor
d(angle)/d(phi) = x_i.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bsm import Dataset, MarketPoint
from .experiments import MetricsReport, compute_metrics
from .model import (
    CircuitTemplate,
    FinqbitParams,
    FourQubitParams,
    DEFAULT_SCHEDULE,
    N_LAYERS,
    finqbit_template_from_features,
    template_for,
)


class DivergenceError(RuntimeError):
    """Raised when every training restart diverged."""


@dataclass
class TrainConfig:
    """Hyperparameters for the optimizer loop."""

    target: str = "finqbit"  # finqbit | baseline4 | fourier4
    layers: int | None = None  # L for the 4-qubit variants
    learning_rate: float = 0.05
    max_iters: int = 1000
    batch: int | None = None  # None = full batch
    restarts: int = 5
    seed: int = 0
    early_stop_patience: int = 100

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.target not in ("finqbit", "baseline4", "fourier4"):
            raise ValueError(f"unknown target {self.target!r}")
        if self.target != "finqbit" and self.layers is None:
            raise ValueError(f"{self.target} requires layers (L)")

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "layers": self.layers,
            "learning_rate": self.learning_rate,
            "max_iters": self.max_iters,
            "batch": self.batch,
            "restarts": self.restarts,
            "seed": self.seed,
            "early_stop_patience": self.early_stop_patience,
        }


@dataclass
class RestartSummary:
    index: int
    best_val_mse: float
    iterations: int
    diverged: bool


@dataclass
class TrainReport:
    """Outcome of a training run: best parameters and diagnostics."""

    best_params: object  # FinqbitParams | FourQubitParams
    loss_history: list[tuple[int, float, float]]  # (iter, train_mse, val_mse)
    final_metrics: MetricsReport
    restart_index: int
    restarts: list[RestartSummary] = field(default_factory=list)
    config: TrainConfig | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "config": self.config.to_dict() if self.config else None,
                "restart_index": self.restart_index,
                "restarts": [
                    {
                        "index": r.index,
                        "best_val_mse": r.best_val_mse,
                        "iterations": r.iterations,
                        "diverged": r.diverged,
                    }
                    for r in self.restarts
                ],
                "final_metrics": self.final_metrics.to_dict(),
                "loss_history": [
                    {"iter": i, "train_mse": t, "val_mse": v} for i, t, v in self.loss_history
                ],
            },
            indent=2,
        )

    def history_csv(self) -> str:
        lines = ["iter,train_mse,val_mse"]
        lines += [f"{i},{t:.17g},{v:.17g}" for i, t, v in self.loss_history]
        return "\n".join(lines) + "\n"


@dataclass
class FourierSlice:
    """DFT of the raw model output along one input feature."""

    feature: int
    frequencies: list[int]
    coefficients: list[complex]

    def __post_init__(self):
        if len(self.frequencies) != len(self.coefficients):
            raise ValueError("frequencies/coefficients length mismatch")


class _BatchEvaluator:
    """Vectorized <Z_0> over a stack of per-sample circuit templates.

    All samples share the gate structure; only angle constants/scales differ.
    Used as the fast path for losses and parameter-shift gradients; its output
    is cross-checked against the single-state reference simulator in tests.
    """

    def __init__(self, templates: list[CircuitTemplate]):
        if not templates:
            raise ValueError("empty dataset")
        first = templates[0]
        self.n_qubits = first.n_qubits
        self.n_params = first.n_params
        self.n_samples = len(templates)
        steps = [list(t.rotation_steps()) for t in templates]
        n_steps = len(steps[0])
        self.ops = []  # ("cnot", perm) | (axis, qubit, slot_id)
        slot_param: list[int] = []
        slot_scale_cols = []
        slot_const_cols = []
        slot_id = 0
        for j in range(n_steps):
            kind, a, b, slot = steps[0][j]
            if kind == "cnot":
                self.ops.append(("cnot", self._cnot_perm(a, b)))
                continue
            params = {s[j][3].param for s in steps}
            if len(params) != 1:
                raise ValueError("templates do not share a slot structure")
            slot_param.append(-1 if slot.param is None else slot.param)
            slot_scale_cols.append(
                [0.0 if s[j][3].param is None else s[j][3].scale for s in steps]
            )
            slot_const_cols.append(
                [s[j][3].value if s[j][3].param is None else 0.0 for s in steps]
            )
            self.ops.append((kind, a, slot_id))
            slot_id += 1
        self.n_slots = slot_id
        self.slot_param = np.array(slot_param, dtype=int)
        self.scale = np.array(slot_scale_cols, dtype=float).T  # (samples, slots)
        self.const = np.array(slot_const_cols, dtype=float).T
        idx = np.arange(2**self.n_qubits)
        self.z0_signs = 1.0 - 2.0 * ((idx >> (self.n_qubits - 1)) & 1)

    def _cnot_perm(self, control: int, target: int) -> np.ndarray:
        n = self.n_qubits
        idx = np.arange(2**n)
        cbit = (idx >> (n - 1 - control)) & 1
        return np.where(cbit == 1, idx ^ (1 << (n - 1 - target)), idx)

    def angles(self, params: np.ndarray, idx=None) -> np.ndarray:
        scale = self.scale if idx is None else self.scale[idx]
        const = self.const if idx is None else self.const[idx]
        padded = np.concatenate([params, [0.0]])
        return const + scale * padded[self.slot_param]

    def _forward_trig(self, ch: np.ndarray, sh: np.ndarray) -> np.ndarray:
        """<Z_0> given cos/sin of every half-angle, shape (batch, n_slots).

        Working from half-angle trig rather than angles lets the gradient path
        share one trig evaluation across all of its shifted copies.
        """
        n_b = ch.shape[0]
        n = self.n_qubits
        state = np.zeros((n_b, 2**n), dtype=complex)
        state[:, 0] = 1.0
        for op in self.ops:
            if op[0] == "cnot":
                # the CNOT basis permutation is an involution: gather with it
                state = state[:, op[1]]
                continue
            axis, qubit, slot = op
            pre, post = 2**qubit, 2 ** (n - 1 - qubit)
            t = state.reshape(n_b, pre, 2, post)
            t0, t1 = t[:, :, 0, :], t[:, :, 1, :]
            out = np.empty_like(t)
            c = ch[:, slot, None, None]
            s = sh[:, slot, None, None]
            if axis == "rz":
                e = c - 1j * s  # exp(-i * half)
                out[:, :, 0, :] = e * t0
                out[:, :, 1, :] = np.conj(e) * t1
            elif axis == "ry":
                out[:, :, 0, :] = c * t0 - s * t1
                out[:, :, 1, :] = s * t0 + c * t1
            else:  # rx
                js = -1j * s
                out[:, :, 0, :] = c * t0 + js * t1
                out[:, :, 1, :] = js * t0 + c * t1
            state = out.reshape(n_b, -1)
        return (np.abs(state) ** 2) @ self.z0_signs

    def _forward_trig_chunked(self, ch: np.ndarray, sh: np.ndarray) -> np.ndarray:
        # keep working arrays cache-sized; the mega-batch is bandwidth-bound
        rows = 4096 if 2**self.n_qubits <= 4 else 2048
        if ch.shape[0] <= rows:
            return self._forward_trig(ch, sh)
        parts = [
            self._forward_trig(ch[i : i + rows], sh[i : i + rows])
            for i in range(0, ch.shape[0], rows)
        ]
        return np.concatenate(parts)

    def _forward_angles(self, ang: np.ndarray) -> np.ndarray:
        half = ang / 2
        return self._forward_trig(np.cos(half), np.sin(half))

    def expectations(self, params: np.ndarray, idx=None) -> np.ndarray:
        """<Z_0> per sample at the given parameter vector."""
        return self._forward_angles(self.angles(params, idx))

    def mse(self, params: np.ndarray, labels: np.ndarray, idx=None) -> float:
        y = labels if idx is None else labels[idx]
        f = self.expectations(params, idx)
        return float(np.mean((f - y) ** 2))

    def mse_gradient(self, params: np.ndarray, labels: np.ndarray, idx=None) -> np.ndarray:
        """Parameter-shift gradient of the MSE.

        All 2k+1 circuit evaluations (base plus +-pi/2 per trainable slot) run
        as one stacked forward pass. A +-pi/2 angle shift is a +-pi/4 shift of
        the half-angle, so the shifted trig columns are linear combinations of
        the base ones; cos/sin are evaluated once, not once per shift block.
        """
        y = labels if idx is None else labels[idx]
        n_s = y.size
        half = self.angles(params, idx) / 2
        ch, sh = np.cos(half), np.sin(half)
        pslots = np.flatnonzero(self.slot_param >= 0)
        blocks = 2 * pslots.size + 1
        big_ch = np.tile(ch, (blocks, 1))
        big_sh = np.tile(sh, (blocks, 1))
        inv_sqrt2 = 2.0**-0.5
        for j, slot in enumerate(pslots):
            plus = slice((1 + 2 * j) * n_s, (2 + 2 * j) * n_s)
            minus = slice((2 + 2 * j) * n_s, (3 + 2 * j) * n_s)
            c, s = ch[:, slot], sh[:, slot]
            big_ch[plus, slot] = (c - s) * inv_sqrt2
            big_sh[plus, slot] = (s + c) * inv_sqrt2
            big_ch[minus, slot] = (c + s) * inv_sqrt2
            big_sh[minus, slot] = (s - c) * inv_sqrt2
        z = self._forward_trig_chunked(big_ch, big_sh).reshape(blocks, n_s)
        resid = 2.0 * (z[0] - y) / n_s
        grad = np.zeros(self.n_params)
        scale = self.scale if idx is None else self.scale[idx]
        for j, slot in enumerate(pslots):
            dz = (z[1 + 2 * j] - z[2 + 2 * j]) / 2.0
            grad[self.slot_param[slot]] += float(np.dot(resid, scale[:, slot] * dz))
        return grad


def _compile(params, dataset: Dataset) -> _BatchEvaluator:
    return _BatchEvaluator([template_for(x, params) for x in dataset.points])


def mse_loss(params, dataset: Dataset) -> float:
    """Mean squared error of the unclamped expectation against the labels."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    return _compile(params, dataset).mse(params.flat(), dataset.label_vector())


def parameter_shift_gradient(params, dataset: Dataset) -> np.ndarray:
    """Gradient of mse_loss with respect to the flattened parameter vector."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    return _compile(params, dataset).mse_gradient(params.flat(), dataset.label_vector())


class Adam:
    """Plain Adam on a flat numpy vector."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _init_params(config: TrainConfig, rng: np.random.Generator):
    if config.target == "finqbit":
        theta = rng.uniform(-np.pi, np.pi, 24)
        phi = np.ones(12)  # identity scaling of the raw features
        return FinqbitParams(theta=theta, phi=phi)
    variant = "baseline" if config.target == "baseline4" else "fourier"
    blocks = config.layers if variant == "baseline" else config.layers + 1
    theta = rng.uniform(-np.pi, np.pi, 12 * blocks)
    return FourQubitParams(variant=variant, L=config.layers, theta=theta)


def _wrap_params(config: TrainConfig, flat: np.ndarray):
    if config.target == "finqbit":
        return FinqbitParams.from_flat(flat)
    variant = "baseline" if config.target == "baseline4" else "fourier"
    return FourQubitParams(variant=variant, L=config.layers, theta=flat)


def train(config: TrainConfig, train_set: Dataset, val_set: Dataset) -> TrainReport:
    """Adam with restarts; returns the restart with the best validation MSE.

    A restart whose training loss exceeds 10x its initial value for 50
    consecutive iterations is aborted and recorded as diverged; the run fails
    only if every restart diverges. Fully deterministic for a given config.
    """
    train_rows = {tuple(p.features()) for p in train_set.points}
    for p in val_set.points:
        if tuple(p.features()) in train_rows:
            raise ValueError("train and validation sets must be disjoint")

    proto = _init_params(config, np.random.default_rng(0))
    train_eval = _compile(proto, train_set)
    val_eval = _compile(proto, val_set)
    y_train = train_set.label_vector()
    y_val = val_set.label_vector()

    streams = np.random.SeedSequence(config.seed).spawn(config.restarts)
    best: tuple[float, np.ndarray, int, list] | None = None
    summaries: list[RestartSummary] = []

    for r, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        flat = _init_params(config, rng).flat()
        opt = Adam(lr=config.learning_rate)
        initial_loss = train_eval.mse(flat, y_train)
        best_val = val_eval.mse(flat, y_val)
        best_flat = flat.copy()
        history = [(0, initial_loss, best_val)]
        stale = 0
        over = 0
        diverged = False
        iters_done = 0
        for it in range(1, config.max_iters + 1):
            idx = None
            if config.batch is not None:
                idx = rng.choice(len(y_train), size=min(config.batch, len(y_train)), replace=False)
            grad = train_eval.mse_gradient(flat, y_train, idx)
            flat = opt.step(flat, grad)
            train_mse = train_eval.mse(flat, y_train)
            val_mse = val_eval.mse(flat, y_val)
            history.append((it, train_mse, val_mse))
            iters_done = it
            if val_mse < best_val:
                best_val = val_mse
                best_flat = flat.copy()
                stale = 0
            else:
                stale += 1
                if stale >= config.early_stop_patience:
                    break
            over = over + 1 if train_mse > 10 * initial_loss else 0
            if over >= 50:
                diverged = True
                break
        summaries.append(
            RestartSummary(index=r, best_val_mse=best_val, iterations=iters_done, diverged=diverged)
        )
        if diverged:
            continue
        if best is None or best_val < best[0]:
            best = (best_val, best_flat, r, history)

    if best is None:
        details = "; ".join(
            f"restart {s.index}: diverged after {s.iterations} iters" for s in summaries
        )
        raise DivergenceError(f"all restarts diverged ({details})")

    best_val, best_flat, restart_index, history = best
    best_params = _wrap_params(config, best_flat)
    preds = np.maximum(val_eval.expectations(best_flat), 0.0)  # clamp for reporting
    metrics = compute_metrics(preds, y_val)
    return TrainReport(
        best_params=best_params,
        loss_history=history,
        final_metrics=metrics,
        restart_index=restart_index,
        restarts=summaries,
        config=config,
    )


def fourier_spectrum(fn, period: float, n_samples: int) -> tuple[list[int], list[complex]]:
    """DFT of fn sampled uniformly on [0, period); frequencies in cycles/period."""
    xs = np.arange(n_samples) * (period / n_samples)
    values = np.array([fn(x) for x in xs])
    coeffs = np.fft.fft(values) / n_samples
    freqs = np.fft.fftfreq(n_samples, d=1.0 / n_samples).astype(int)
    order = np.argsort(freqs)
    return [int(freqs[i]) for i in order], [complex(coeffs[i]) for i in order]


def fourier_slice(
    params: FinqbitParams,
    base_point: MarketPoint,
    feature: int,
    n_samples: int,
    schedule=DEFAULT_SCHEDULE,
) -> FourierSlice:
    """Spectrum of f_raw along one feature, swept over one encoding period.

    The sweep covers x in [0, 2*pi/phi_bar) with phi_bar the mean absolute
    scaler over the layers that actually inject the feature. Frequencies are
    integers relative to that base period; the band limit is exact when all
    injecting scalers share one magnitude (each injection contributes
    frequencies {-1, 0, +1}).
    """
    if not (0 <= feature < 4):
        raise ValueError("feature index must be 0..3")
    scales = [params.phi[k * 4 + feature] for k in range(N_LAYERS)]
    active = [abs(s) for s in scales if abs(s) > 1e-15]
    if n_samples < 2 * max(len(active), 1) + 1:
        raise ValueError(
            f"undersampled: need at least {2 * max(len(active), 1) + 1} samples, got {n_samples}"
        )
    phi_bar = float(np.mean(active)) if active else 1.0
    period = 2 * np.pi / phi_bar

    xs = np.arange(n_samples) * (period / n_samples)
    templates = []
    for x in xs:
        xv = base_point.features()
        xv[feature] = x
        templates.append(finqbit_template_from_features(xv, schedule))
    values = _BatchEvaluator(templates).expectations(params.flat())
    coeffs = np.fft.fft(values) / n_samples
    freqs = np.fft.fftfreq(n_samples, d=1.0 / n_samples).astype(int)
    order = np.argsort(freqs)
    return FourierSlice(
        feature=feature,
        frequencies=[int(freqs[i]) for i in order],
        coefficients=[complex(coeffs[i]) for i in order],
    )
