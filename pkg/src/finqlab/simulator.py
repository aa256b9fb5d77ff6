"""Dense statevector simulator for 1-4 qubit registers.

Conventions used throughout the package:

* Qubit 0 is the most significant bit: basis index j encodes the bitstring
  ``format(j, f"0{n}b")`` whose leftmost character is qubit 0.
* Rotations are exp(-i*angle*P/2) for P in {X, Y, Z}.
* U3(theta, phi, lam) = Rz(phi) @ Ry(theta) @ Rz(lam). This differs from the
  OpenQASM u3 by a global phase, which no observable here can see.
* CNOT targets are (control, target).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 4

GATE_KINDS = ("RX", "RY", "RZ", "U3", "CNOT")
_N_ANGLES = {"RX": 1, "RY": 1, "RZ": 1, "U3": 3, "CNOT": 0}


def rx_matrix(a: float) -> np.ndarray:
    c, s = np.cos(a / 2), np.sin(a / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_matrix(a: float) -> np.ndarray:
    c, s = np.cos(a / 2), np.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(a: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * a), 0], [0, np.exp(0.5j * a)]], dtype=complex)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    return rz_matrix(phi) @ ry_matrix(theta) @ rz_matrix(lam)


@dataclass(frozen=True)
class GateSpec:
    """One gate: kind, target qubit indices, rotation angles in radians."""

    kind: str
    targets: tuple[int, ...]
    angles: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if self.kind == "CNOT":
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ValueError("CNOT needs exactly 2 distinct targets")
        elif len(self.targets) != 1:
            raise ValueError(f"{self.kind} acts on exactly 1 qubit")
        if len(self.angles) != _N_ANGLES[self.kind]:
            raise ValueError(
                f"{self.kind} takes {_N_ANGLES[self.kind]} angle(s), got {len(self.angles)}"
            )

    def matrix(self) -> np.ndarray:
        """The 2x2 (rotations) or 4x4 (CNOT, on its own 2-qubit space) unitary."""
        if self.kind == "RX":
            return rx_matrix(self.angles[0])
        if self.kind == "RY":
            return ry_matrix(self.angles[0])
        if self.kind == "RZ":
            return rz_matrix(self.angles[0])
        if self.kind == "U3":
            return u3_matrix(*self.angles)
        # CNOT on (control, target) ordered basis |c t>
        return np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
        )


@dataclass
class CircuitDescription:
    """Ordered gate list on an n-qubit register (applied first-to-last)."""

    n_qubits: int
    gates: list[GateSpec] = field(default_factory=list)

    def __post_init__(self):
        if not (1 <= self.n_qubits <= MAX_QUBITS):
            raise ValueError(f"register size must be 1..{MAX_QUBITS}, got {self.n_qubits}")
        for g in self.gates:
            for q in g.targets:
                if not (0 <= q < self.n_qubits):
                    raise ValueError(f"gate target {q} out of range for {self.n_qubits} qubits")

    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == "CNOT")


@dataclass
class StateVector:
    """Normalized complex amplitudes over an n-qubit register."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def zero_state(n_qubits: int) -> StateVector:
    """|00...0> on n qubits."""
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits=n_qubits, amplitudes=amps)


@dataclass
class ShotOutcome:
    """Measured counts per full-register bitstring."""

    counts: dict[str, int]
    n_shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.n_shots:
            raise ValueError("counts do not sum to n_shots")


def _cnot_permutation(control: int, target: int, n: int) -> np.ndarray:
    """Basis permutation: flip target bit where the control bit is set."""
    idx = np.arange(2**n)
    cbit = (idx >> (n - 1 - control)) & 1
    return np.where(cbit == 1, idx ^ (1 << (n - 1 - target)), idx)


def apply_gate(s: StateVector, g: GateSpec) -> StateVector:
    """Apply one gate, returning a new state; the input is not mutated."""
    n = s.n_qubits
    for q in g.targets:
        if not (0 <= q < n):
            raise ValueError(f"gate target {q} out of range for {n} qubits")
    if g.kind == "CNOT":
        perm = _cnot_permutation(g.targets[0], g.targets[1], n)
        out = np.empty_like(s.amplitudes)
        out[perm] = s.amplitudes
        return StateVector(n_qubits=n, amplitudes=out)
    q = g.targets[0]
    mat = g.matrix()
    # reshape so the acted-on qubit is its own axis: (pre, 2, post)
    pre, post = 2**q, 2 ** (n - 1 - q)
    tensor = s.amplitudes.reshape(pre, 2, post)
    out = np.einsum("ij,ajb->aib", mat, tensor)
    return StateVector(n_qubits=n, amplitudes=out.reshape(-1))


def run_circuit(c: CircuitDescription, initial: StateVector | None = None) -> StateVector:
    """Apply every gate of the circuit to |0...0> (or a supplied initial state)."""
    s = zero_state(c.n_qubits) if initial is None else initial
    if s.n_qubits != c.n_qubits:
        raise ValueError("initial state register size mismatch")
    for g in c.gates:
        s = apply_gate(s, g)
    return s


def circuit_unitary(c: CircuitDescription) -> np.ndarray:
    """Full 2^n x 2^n unitary; column j is the circuit applied to basis |j>."""
    if c.n_qubits > MAX_QUBITS:
        raise ValueError(f"circuit_unitary supports at most {MAX_QUBITS} qubits")
    dim = 2**c.n_qubits
    u = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        amps = np.zeros(dim, dtype=complex)
        amps[j] = 1.0
        u[:, j] = run_circuit(c, StateVector(c.n_qubits, amps)).amplitudes
    return u


def _z_signs(n: int, qubit: int) -> np.ndarray:
    idx = np.arange(2**n)
    bits = (idx >> (n - 1 - qubit)) & 1
    return 1.0 - 2.0 * bits


def expectation_z(s: StateVector, qubit: int) -> float:
    """<Z> on one qubit: sum of (+-1) * |a_i|^2 with the sign from that qubit's bit."""
    if not (0 <= qubit < s.n_qubits):
        raise ValueError(f"qubit {qubit} out of range")
    return float(np.dot(_z_signs(s.n_qubits, qubit), s.probabilities()))


def sample_shots(s: StateVector, n_shots: int, seed) -> ShotOutcome:
    """Multinomial draw of n_shots full-register bitstrings; deterministic per seed."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    probs = s.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    raw = rng.multinomial(n_shots, probs)
    n = s.n_qubits
    counts = {format(i, f"0{n}b"): int(c) for i, c in enumerate(raw) if c > 0}
    return ShotOutcome(counts=counts, n_shots=n_shots)


def estimate_expectation_from_counts(o: ShotOutcome, qubit: int) -> float:
    """Shot estimator (n0 - n1)/n_shots of <Z> on one qubit."""
    if o.n_shots < 1:
        raise ValueError("empty outcome")
    n0 = 0
    for bitstring, c in o.counts.items():
        if not (0 <= qubit < len(bitstring)):
            raise ValueError(f"qubit {qubit} out of range for bitstring {bitstring!r}")
        if bitstring[qubit] == "0":
            n0 += c
    return (2 * n0 - o.n_shots) / o.n_shots


def marginal_probabilities(o: ShotOutcome, qubit: int) -> np.ndarray:
    """Empirical (p0, p1) of one qubit from full-register counts."""
    n0 = sum(c for b, c in o.counts.items() if b[qubit] == "0")
    return np.array([n0, o.n_shots - n0]) / o.n_shots


def apply_readout_noise(probabilities: np.ndarray, assignment: np.ndarray) -> np.ndarray:
    """Forward readout channel p' = A @ p for a column-stochastic assignment matrix."""
    p = np.asarray(probabilities, dtype=float)
    a = np.asarray(assignment, dtype=float)
    if a.shape != (p.size, p.size):
        raise ValueError(f"assignment matrix shape {a.shape} does not match p of size {p.size}")
    if np.any(a < -1e-12) or np.max(np.abs(a.sum(axis=0) - 1.0)) > 1e-9:
        raise ValueError("assignment matrix must be column-stochastic")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    return a @ p


def to_qasm(c: CircuitDescription) -> str:
    """Minimal OpenQASM-3 style export, one statement per line.

    Grammar: ``OPENQASM 3.0;`` header, a single ``qubit[N] q;`` declaration,
    then gate statements ``rx(a) q[i];  ry(a) q[i];  rz(a) q[i];
    u3(t,p,l) q[i];  cx q[c], q[t];``. Angles are radians at 17 significant
    digits. The u3 here is Rz(p)Ry(t)Rz(l), a global phase away from the
    OpenQASM builtin.
    """
    lines = ["OPENQASM 3.0;", f"qubit[{c.n_qubits}] q;"]
    for g in c.gates:
        if g.kind == "CNOT":
            lines.append(f"cx q[{g.targets[0]}], q[{g.targets[1]}];")
        else:
            args = ",".join(f"{a:.17g}" for a in g.angles)
            lines.append(f"{g.kind.lower()}({args}) q[{g.targets[0]}];")
    return "\n".join(lines) + "\n"
