"""Variational pricing circuits: the 2-qubit high-density ansatz and 4-qubit variants.

The 2-qubit model alternates trainable blocks W and data-encoding blocks S:

    W1 S1 W2 S2 W3 S3 W4      (W1 acts first)

Each W applies a U3 to both qubits, then CNOT(0->1), then CNOT(1->0). Each S
encodes two features per qubit as Rx(phi_i * x_i) followed by Ry(phi_j * x_j),
with the feature-to-(qubit, axis) assignment permuted per layer. The price
prediction is max(0, <Z_0>) on the readout qubit.

Parameter layout (flattened, 36 entries): 24 U3 angles theta[block, qubit, angle]
in block-major order, then 12 encoding scalers phi[layer, feature] in
layer-major order with features ordered (m, T, r, sigma).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bsm import FEATURES, MarketPoint
from .simulator import (
    CircuitDescription,
    GateSpec,
    expectation_z,
    run_circuit,
    sample_shots,
    estimate_expectation_from_counts,
)

N_LAYERS = 3
N_THETA = 24
N_PHI = 12
N_PARAMS = N_THETA + N_PHI

VARIANTS = ("finqbit", "baseline4", "fourier4")


@dataclass(frozen=True)
class AngleSlot:
    """One rotation-angle slot: a constant, or scale * params[param]."""

    value: float = 0.0
    param: int | None = None
    scale: float = 1.0

    def angle(self, params: np.ndarray) -> float:
        if self.param is None:
            return self.value
        return self.scale * float(params[self.param])


@dataclass(frozen=True)
class TemplateGate:
    kind: str
    targets: tuple[int, ...]
    slots: tuple[AngleSlot, ...] = ()


@dataclass
class CircuitTemplate:
    """A circuit whose angles are affine in a flat parameter vector.

    The slot structure is what the parameter-shift rule differentiates: every
    trainable angle is scale * params[i], so d(angle)/d(params[i]) = scale.
    """

    n_qubits: int
    gates: list[TemplateGate]
    n_params: int

    def bind(self, params: np.ndarray) -> CircuitDescription:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        gates = [
            GateSpec(g.kind, g.targets, tuple(s.angle(params) for s in g.slots))
            for g in self.gates
        ]
        return CircuitDescription(n_qubits=self.n_qubits, gates=gates)

    def rotation_steps(self):
        """Expand to elementary rotations/CNOTs, keeping slot identity.

        U3(theta, phi, lam) expands to Rz(lam), Ry(theta), Rz(phi) in time
        order, so each slot remains a single shift-rule-compatible rotation.
        Yields ("cnot", control, target, None) or (axis, qubit, slot).
        """
        for g in self.gates:
            if g.kind == "CNOT":
                yield ("cnot", g.targets[0], g.targets[1], None)
            elif g.kind == "U3":
                t, p, l = g.slots
                q = g.targets[0]
                yield ("rz", q, None, l)
                yield ("ry", q, None, t)
                yield ("rz", q, None, p)
            else:
                yield (g.kind.lower(), g.targets[0], None, g.slots[0])


@dataclass
class PermutationSchedule:
    """Per-layer feature-to-(qubit, axis) assignment for the encoding blocks.

    layers[k][q] = (rx_feature, ry_feature) as indices into (m, T, r, sigma).
    Every layer must consume each of the four features exactly once.
    """

    layers: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    def __post_init__(self):
        for k, layer in enumerate(self.layers):
            used = [f for pair in layer for f in pair]
            if sorted(used) != list(range(len(FEATURES))):
                raise ValueError(f"layer {k + 1} does not map every feature exactly once: {used}")


# (m, sigma)->Q0 (T, r)->Q1; (T, m)->Q0 (r, sigma)->Q1; (m, T)->Q0 (r, sigma)->Q1
DEFAULT_SCHEDULE = PermutationSchedule(
    layers=(
        ((0, 3), (1, 2)),
        ((1, 0), (2, 3)),
        ((0, 1), (2, 3)),
    )
)


@dataclass
class FinqbitParams:
    """24 U3 angles + 12 encoding scalers for the 2-qubit ansatz."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(N_THETA)
        self.phi = np.asarray(self.phi, dtype=float).reshape(N_PHI)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.theta, self.phi])

    @classmethod
    def from_flat(cls, v: np.ndarray) -> "FinqbitParams":
        v = np.asarray(v, dtype=float)
        if v.shape != (N_PARAMS,):
            raise ValueError(f"expected {N_PARAMS} parameters, got {v.shape}")
        return cls(theta=v[:N_THETA].copy(), phi=v[N_THETA:].copy())

    def theta_index(self, block: int, qubit: int, angle: int) -> int:
        return block * 6 + qubit * 3 + angle

    def phi_index(self, layer: int, feature: int) -> int:
        return N_THETA + layer * 4 + feature

    def to_json(self) -> str:
        return json.dumps(
            {"theta": self.theta.tolist(), "phi": self.phi.tolist(), "schedule_version": 1},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "FinqbitParams":
        obj = json.loads(text)
        if obj.get("schedule_version", 1) != 1:
            raise ValueError(f"unsupported schedule_version {obj.get('schedule_version')}")
        return cls(theta=np.array(obj["theta"]), phi=np.array(obj["phi"]))


@dataclass
class FourQubitParams:
    """Layer count and rotation angles for the 4-qubit variants.

    variant "baseline": 12*L angles.  variant "fourier": an extra leading
    block W0 before the first encoding, 12*(L+1) angles.
    """

    variant: str
    L: int
    theta: np.ndarray

    def __post_init__(self):
        if self.variant not in ("baseline", "fourier"):
            raise ValueError(f"unknown 4-qubit variant {self.variant!r}")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if self.theta.size != self.n_params():
            raise ValueError(
                f"{self.variant} with L={self.L} needs {self.n_params()} angles, got {self.theta.size}"
            )

    def n_params(self) -> int:
        blocks = self.L if self.variant == "baseline" else self.L + 1
        return 12 * blocks

    def flat(self) -> np.ndarray:
        return self.theta.copy()

    def to_json(self) -> str:
        return json.dumps(
            {"variant": self.variant, "L": self.L, "theta": self.theta.tolist()}, indent=2
        )

    @classmethod
    def from_json(cls, text: str) -> "FourQubitParams":
        obj = json.loads(text)
        return cls(variant=obj["variant"], L=int(obj["L"]), theta=np.array(obj["theta"]))


def load_params(text: str):
    """Dispatch a params JSON to the right parameter type."""
    obj = json.loads(text)
    if "variant" in obj:
        return FourQubitParams.from_json(text)
    return FinqbitParams.from_json(text)


def _w_block(block: int, qubits: int = 2) -> list[TemplateGate]:
    gates = []
    for q in range(qubits):
        base = block * 6 + q * 3
        gates.append(
            TemplateGate(
                "U3",
                (q,),
                tuple(AngleSlot(param=base + a) for a in range(3)),
            )
        )
    gates.append(TemplateGate("CNOT", (0, 1)))
    gates.append(TemplateGate("CNOT", (1, 0)))
    return gates


def finqbit_template(
    x: MarketPoint, schedule: PermutationSchedule = DEFAULT_SCHEDULE
) -> CircuitTemplate:
    """Template over the flat 36-parameter vector for one input point."""
    return finqbit_template_from_features(x.features(), schedule)


def finqbit_template_from_features(
    xv: np.ndarray, schedule: PermutationSchedule = DEFAULT_SCHEDULE
) -> CircuitTemplate:
    """Same as finqbit_template but on a raw feature vector (diagnostic sweeps)."""
    gates: list[TemplateGate] = []
    for layer in range(N_LAYERS):
        gates.extend(_w_block(layer))
        for q in (0, 1):
            f_rx, f_ry = schedule.layers[layer][q]
            gates.append(
                TemplateGate(
                    "RX", (q,), (AngleSlot(param=N_THETA + layer * 4 + f_rx, scale=float(xv[f_rx])),)
                )
            )
            gates.append(
                TemplateGate(
                    "RY", (q,), (AngleSlot(param=N_THETA + layer * 4 + f_ry, scale=float(xv[f_ry])),)
                )
            )
    gates.extend(_w_block(N_LAYERS))
    return CircuitTemplate(n_qubits=2, gates=gates, n_params=N_PARAMS)


def build_finqbit_circuit(
    x: MarketPoint, p: FinqbitParams, schedule: PermutationSchedule = DEFAULT_SCHEDULE
) -> CircuitDescription:
    """Bind the 2-qubit ansatz at one input point: 8 U3, 8 CNOT, 12 encoding rotations."""
    return finqbit_template(x, schedule).bind(p.flat())


def _ring_block(offset: int) -> list[TemplateGate]:
    gates = []
    for q in range(4):
        base = offset + q * 3
        # Ry-Rz-Ry per qubit
        gates.append(TemplateGate("RY", (q,), (AngleSlot(param=base),)))
        gates.append(TemplateGate("RZ", (q,), (AngleSlot(param=base + 1),)))
        gates.append(TemplateGate("RY", (q,), (AngleSlot(param=base + 2),)))
    for q in range(4):
        gates.append(TemplateGate("CNOT", (q, (q + 1) % 4)))
    return gates


def _encode_block(xv: np.ndarray) -> list[TemplateGate]:
    return [
        TemplateGate("RY", (q,), (AngleSlot(value=float(xv[q])),)) for q in range(4)
    ]


def four_qubit_template(x: MarketPoint, variant: str, L: int) -> CircuitTemplate:
    """4-qubit template: one feature per qubit, encoded raw as Ry angles.

    baseline: L repetitions of [encode; rotations + CNOT ring].
    fourier:  a leading trainable block, then the same L repetitions.
    """
    xv = x.features()
    gates: list[TemplateGate] = []
    offset = 0
    if variant == "fourier":
        gates.extend(_ring_block(0))
        offset = 12
    elif variant != "baseline":
        raise ValueError(f"unknown 4-qubit variant {variant!r}")
    for layer in range(L):
        gates.extend(_encode_block(xv))
        gates.extend(_ring_block(offset + layer * 12))
    blocks = L if variant == "baseline" else L + 1
    return CircuitTemplate(n_qubits=4, gates=gates, n_params=12 * blocks)


def build_4q_baseline(x: MarketPoint, p: FourQubitParams) -> CircuitDescription:
    if p.variant != "baseline":
        raise ValueError(f"expected baseline params, got {p.variant!r}")
    return four_qubit_template(x, "baseline", p.L).bind(p.flat())


def build_4q_fourier(x: MarketPoint, p: FourQubitParams) -> CircuitDescription:
    if p.variant != "fourier":
        raise ValueError(f"expected fourier params, got {p.variant!r}")
    return four_qubit_template(x, "fourier", p.L).bind(p.flat())


def template_for(x: MarketPoint, params) -> CircuitTemplate:
    """Template matching the parameter object's variant."""
    if isinstance(params, FinqbitParams):
        return finqbit_template(x)
    return four_qubit_template(x, params.variant, params.L)


def build_circuit(x: MarketPoint, params) -> CircuitDescription:
    return template_for(x, params).bind(params.flat())


def raw_expectation(x: MarketPoint, params) -> float:
    """Unclamped <Z_0> of the bound circuit on |0...0> (reference path)."""
    return expectation_z(run_circuit(build_circuit(x, params)), qubit=0)


def predict_price(x: MarketPoint, params, shots: int | None = None, seed=None) -> float:
    """Price prediction max(0, <Z_0>), exact or estimated from finite shots."""
    if shots is None:
        z = raw_expectation(x, params)
    else:
        state = run_circuit(build_circuit(x, params))
        outcome = sample_shots(state, shots, seed)
        z = estimate_expectation_from_counts(outcome, qubit=0)
    return max(0.0, z)
