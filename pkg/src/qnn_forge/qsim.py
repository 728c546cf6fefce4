"""Exact statevector simulation of Pauli-rotation circuits.

Wire layout: wires ``0..n-1`` carry the input string, wire ``n`` is the
readout. Basis indices are big-endian over wires, so wire 0 is the most
significant bit and the readout wire is bit 0 of the integer index.
Encoding of an input entry: ``+1 -> |0>``, ``-1 -> |1>``; the readout
starts in ``|1>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError, InvalidObservableError
from .rng import SAMPLING, make_rng

MAX_WIRES = 12
NORM_TOL = 1e-10

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-wire Paulis, one letter per wire (readout last)."""

    ops: tuple[str, ...]

    def __post_init__(self):
        ops = tuple(str(o).upper() for o in self.ops)
        if not ops:
            raise InvalidInputError("PauliString needs at least one wire")
        bad = [o for o in ops if o not in _PAULI_1Q]
        if bad:
            raise InvalidInputError(f"unknown Pauli letters {bad}")
        object.__setattr__(self, "ops", ops)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        return cls(tuple(text))

    @classmethod
    def on(cls, num_wires: int, assignment: dict[int, str]) -> "PauliString":
        ops = ["I"] * num_wires
        for wire, op in assignment.items():
            if not 0 <= wire < num_wires:
                raise DimensionError(f"wire {wire} outside 0..{num_wires - 1}")
            ops[wire] = op
        return cls(tuple(ops))

    def __str__(self):
        return "".join(self.ops)

    @property
    def num_wires(self) -> int:
        return len(self.ops)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, o in enumerate(self.ops) if o != "I")

    def _bit(self, wire: int) -> int:
        return 1 << (self.num_wires - 1 - wire)

    @cached_property
    def _action(self) -> tuple[np.ndarray, np.ndarray]:
        # (P psi)[k] = coef[k] * psi[src[k]]
        flip = zmask = 0
        n_y = 0
        for wire, op in enumerate(self.ops):
            if op in ("X", "Y"):
                flip |= self._bit(wire)
            if op in ("Z", "Y"):
                zmask |= self._bit(wire)
            n_y += op == "Y"
        idx = np.arange(2**self.num_wires, dtype=np.int64)
        src = idx ^ flip
        signs = 1 - 2 * (np.bitwise_count(src & zmask).astype(np.int64) & 1)
        coef = (1j**n_y) * signs.astype(complex)
        src.setflags(write=False)
        coef.setflags(write=False)
        return src, coef

    def apply(self, amps: np.ndarray) -> np.ndarray:
        if amps.shape != (2**self.num_wires,):
            raise DimensionError(
                f"Pauli string on {self.num_wires} wires applied to {amps.shape[0]} amplitudes"
            )
        src, coef = self._action
        return coef * amps[src]

    def matrix(self) -> np.ndarray:
        """Dense matrix; wire 0 is the leftmost Kronecker factor."""
        out = np.array([[1.0 + 0j]])
        for op in self.ops:
            out = np.kron(out, _PAULI_1Q[op])
        return out


@dataclass(frozen=True)
class StateVector:
    amps: np.ndarray
    n: int

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.ndim != 1 or amps.shape[0] != 2 ** (self.n + 1):
            raise DimensionError(
                f"expected 2^{self.n + 1} amplitudes, got shape {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidInputError(f"state norm {norm!r} is not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def num_wires(self) -> int:
        return self.n + 1


@dataclass(frozen=True)
class Circuit:
    """Ordered gates ``(pauli, vertex_id)``; gate angles are supplied separately."""

    gates: tuple[tuple[PauliString, int], ...]

    def __post_init__(self):
        gates = tuple((p, int(v)) for p, v in self.gates)
        if not gates:
            raise InvalidInputError("circuit has no gates")
        ids = [v for _, v in gates]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("vertex ids in a circuit must be unique")
        widths = {p.num_wires for p, _ in gates}
        if len(widths) != 1:
            raise DimensionError(f"gates act on differing wire counts {sorted(widths)}")
        object.__setattr__(self, "gates", gates)

    @classmethod
    def from_paulis(cls, paulis: Iterable[PauliString]) -> "Circuit":
        return cls(tuple((p, k + 1) for k, p in enumerate(paulis)))

    @property
    def num_wires(self) -> int:
        return self.gates[0][0].num_wires

    @property
    def n(self) -> int:
        return self.num_wires - 1

    def __len__(self):
        return len(self.gates)

    @property
    def paulis(self) -> tuple[PauliString, ...]:
        return tuple(p for p, _ in self.gates)

    @property
    def vertex_ids(self) -> tuple[int, ...]:
        return tuple(v for _, v in self.gates)


def _check_z(z) -> np.ndarray:
    arr = np.asarray(z)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError("input string must be a non-empty 1-d sequence")
    if not np.all((arr == 1) | (arr == -1)):
        raise InvalidInputError(f"input entries must be +1 or -1, got {arr.tolist()}")
    if arr.size + 1 > MAX_WIRES + 1:
        raise InvalidInputError(f"n={arr.size} exceeds the bound n <= {MAX_WIRES}")
    return arr.astype(int)


def basis_index(z) -> int:
    idx = 0
    for entry in _check_z(z):
        idx = (idx << 1) | (1 if entry == -1 else 0)
    return (idx << 1) | 1


def basis_state(z) -> StateVector:
    """``|z,1>`` as a statevector."""
    z = _check_z(z)
    amps = np.zeros(2 ** (z.size + 1), dtype=complex)
    amps[basis_index(z)] = 1.0
    return StateVector(amps, z.size)


def _rotate(amps: np.ndarray, p: PauliString, theta: float) -> np.ndarray:
    # exp(-i theta P) = cos(theta) I - i sin(theta) P  because P^2 = I
    return np.cos(theta) * amps - 1j * np.sin(theta) * p.apply(amps)


def apply_pauli_rotation(state: StateVector, p: PauliString, theta: float) -> StateVector:
    if p.num_wires != state.num_wires:
        raise DimensionError(
            f"Pauli string has {p.num_wires} wires, state has {state.num_wires}"
        )
    return StateVector(_rotate(state.amps, p, float(theta)), state.n)


def _run(amps: np.ndarray, circuit: Circuit, thetas: Sequence[float]) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if thetas.shape != (len(circuit),):
        raise DimensionError(f"{len(circuit)} gates but {thetas.size} angles")
    if amps.shape[0] != 2**circuit.num_wires:
        raise DimensionError("circuit and state disagree on the wire count")
    for (p, _), theta in zip(circuit.gates, thetas):
        amps = _rotate(amps, p, theta)
    return amps


def apply_sequence(state: StateVector, circuit: Circuit, thetas: Sequence[float]) -> StateVector:
    """Apply ``U_L(theta_L) ... U_1(theta_1)`` with the first gate acting first."""
    return StateVector(_run(state.amps, circuit, thetas), state.n)


def readout_observable(num_wires: int, observable="Z") -> PauliString:
    if isinstance(observable, PauliString):
        if observable.num_wires != num_wires:
            raise DimensionError("observable width does not match the circuit")
        if any(w != num_wires - 1 for w in observable.support):
            raise InvalidObservableError(
                f"observable {observable} touches non-readout wires"
            )
        return observable
    letter = str(observable).upper()
    if letter not in ("X", "Y", "Z"):
        raise InvalidObservableError(f"readout observable must be X, Y or Z, got {observable!r}")
    return PauliString.on(num_wires, {num_wires - 1: letter})


def expectation(amps: np.ndarray, obs: PauliString) -> float:
    val = np.vdot(amps, obs.apply(amps))
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"expectation has imaginary part {val.imag}")
    return float(val.real)


def predicted_label(circuit: Circuit, thetas, z, observable="Z") -> float:
    """Readout expectation ``<z,1| U^dag Y U |z,1>`` in ``[-1, 1]``."""
    obs = readout_observable(circuit.num_wires, observable)
    state = basis_state(z)
    if state.num_wires != circuit.num_wires:
        raise DimensionError(
            f"string of length {state.n} does not fit a {circuit.num_wires}-wire circuit"
        )
    # rounding can overshoot a Pauli expectation by an ulp
    return min(1.0, max(-1.0, expectation(_run(state.amps, circuit, thetas), obs)))


def sample_label(circuit: Circuit, thetas, z, observable="Z", shots: int = 1, seed: int = 0) -> float:
    """Mean of ``shots`` simulated ±1 readout outcomes."""
    if int(shots) != shots or shots < 1:
        raise InvalidInputError(f"shots must be a positive integer, got {shots}")
    ltilde = predicted_label(circuit, thetas, z, observable)
    p_plus = min(max((1.0 + ltilde) / 2.0, 0.0), 1.0)
    rng = make_rng(seed, SAMPLING)
    plus = rng.binomial(int(shots), p_plus)
    return (2.0 * plus - shots) / shots


def loss(label: int, ltilde: float) -> float:
    return 1.0 - label * ltilde


def reference_ansatz(n: int, layers: int = 1) -> list[PauliString]:
    """Per-wire X rotations followed by nearest-neighbour ZZ rotations, per layer.

    Acts on all ``n + 1`` wires including the readout.
    """
    if not 1 <= n <= MAX_WIRES:
        raise InvalidInputError(f"n must satisfy 1 <= n <= {MAX_WIRES}, got {n}")
    if layers < 1:
        raise InvalidInputError("layers must be >= 1")
    width = n + 1
    gates = []
    for _ in range(layers):
        gates += [PauliString.on(width, {w: "X"}) for w in range(width)]
        gates += [PauliString.on(width, {w: "Z", w + 1: "Z"}) for w in range(width - 1)]
    return gates


def circuit_matrix(circuit: Circuit, thetas) -> np.ndarray:
    """Dense ``U(theta)``; intended for small wire counts only."""
    if circuit.num_wires > 3:
        raise DimensionError("dense circuit matrices are limited to 3 wires")
    thetas = np.asarray(thetas, dtype=float)
    dim = 2**circuit.num_wires
    cols = [_run(np.eye(dim, dtype=complex)[:, k], circuit, thetas) for k in range(dim)]
    return np.stack(cols, axis=1)
