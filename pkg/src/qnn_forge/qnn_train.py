"""Supervised learning for the nonrecurrent network (side-information backprop).

The classical side network runs over the environmental graph:

    W_i = sum_{h in parents(i)} theta_hi * V_h
    Q_i = W_i + B_i
    V_i = v_i + Q_i

Errors flow backwards through children, ``delta_z = sum_j theta_zj delta_j``,
seeded at the output vertex. With seed 1 ("classical-chain" mode) every
``delta_i`` is exactly ``dV_L/dQ_i``. In "quantum-coupled" mode the seed is
the parameter-shift derivative of the true quantum loss with respect to the
output gate angle, which is the only place where the measured loss enters
the side network.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .envgraph import EnvGraph
from .errors import InvalidInputError, NumericError
from .qsim import loss, predicted_label, sample_label
from .rng import SAMPLING, make_rng

log = logging.getLogger(__name__)

UNIT_TOL = 1e-12
UPDATE_RULES = ("multiplicative", "descent", "table-descent")

SEED_NOTE = (
    "delta_L is seeded with dL/dtheta_L from the parameter-shift rule; "
    "Q_L does not enter the quantum state, so loss sensitivity is routed "
    "through the shared output-gate angle"
)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SideInfo:
    V: np.ndarray
    Q: np.ndarray
    W: np.ndarray


@dataclass(frozen=True)
class ErrorTable:
    delta: np.ndarray
    delta_prime: np.ndarray


@dataclass(frozen=True)
class GateUpdate:
    delta_theta: np.ndarray

    @classmethod
    def from_side(cls, side: SideInfo) -> "GateUpdate":
        return cls(side.W)


@dataclass(frozen=True)
class GradientTable:
    """``g[(i, j)]`` for child ``i >= 2`` and parent ``j``."""

    g: dict

    def max_abs(self) -> float:
        return max((abs(v) for v in self.g.values()), default=0.0)

    def per_vertex(self, num_vertices: int) -> np.ndarray:
        """Sum over in-arcs; the arcs into a vertex share one angle."""
        out = np.zeros(num_vertices)
        for (i, _), v in sorted(self.g.items()):
            out[i] += v
        return out

    def as_rows(self) -> list:
        return [[i, j, v] for (i, j), v in sorted(self.g.items())]


def input_scalar(z) -> float:
    """Default input-vertex value: mean of the string entries and the +1 readout."""
    z = np.asarray(z, dtype=float)
    return float((z.sum() + 1.0) / (z.size + 1))


def forward_side(g: EnvGraph, x0_value: float) -> SideInfo:
    size = g.num_vertices
    V = np.zeros(size)
    Q = np.zeros(size)
    W = np.zeros(size)
    V[0] = x0_value
    for i in g.order:
        if i == 0:
            continue
        W[i] = sum(g.theta[i] * V[h] for h in g._parents[i])
        Q[i] = W[i] + g.bias[i]
        V[i] = g.label[i] + Q[i]
    return SideInfo(_frozen(V), _frozen(Q), _frozen(W))


def backward_errors(
    g: EnvGraph,
    side: SideInfo,
    delta_L_seed: float = 1.0,
    delta_theta: Sequence[float] | None = None,
    q_prefactor: bool = False,
) -> ErrorTable:
    """Reverse-topological error recursion.

    ``q_prefactor`` multiplies each recursion step by ``Q_z``, the variant
    that disagrees with the linear side network; kept for comparison only.
    ``delta_theta`` defaults to ``W``.
    """
    delta = np.zeros(g.num_vertices)
    if g.num_vertices > 1:
        delta[g.L] = delta_L_seed
    for z in reversed(g.order):
        if z in (0, g.L):
            continue
        acc = sum(g.theta[j] * delta[j] for j in g._children[z])
        delta[z] = side.Q[z] * acc if q_prefactor else acc
    dtheta = side.W if delta_theta is None else np.asarray(delta_theta, dtype=float)
    return ErrorTable(_frozen(delta), _frozen(dtheta * delta))


def update_gates(g: EnvGraph, upd: GateUpdate) -> np.ndarray:
    """Multiplicative gate update, processed from the output vertex back to 1."""
    dtheta = np.asarray(upd.delta_theta, dtype=float)
    theta = np.array(g.theta, dtype=float)
    for z in range(g.L, 0, -1):
        d = dtheta[z]
        if not math.isfinite(d):
            raise NumericError(f"non-finite gate modification {d} at vertex {z}")
        if abs(d - 1.0) <= UNIT_TOL:
            continue
        if d == 0.0:
            log.warning("gate modification 0 annihilates theta at vertex %d", z)
        theta[z] = d * theta[z]
    return theta


def gradient_table(g: EnvGraph, side: SideInfo, errs: ErrorTable) -> GradientTable:
    table = {}
    for j, i in g.arcs:
        if i >= 2:
            table[(i, j)] = float(errs.delta_prime[i] * side.W[j])
    return GradientTable(table)


# training loop


@dataclass
class TrainConfig:
    observable: str = "Z"
    update: str = "multiplicative"  # or "descent", "table-descent"
    lam: float = 0.05
    x0_value: float | None = None
    q_prefactor: bool = False
    clamp: float = 2 * math.pi
    shots: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.update not in UPDATE_RULES:
            raise InvalidInputError(f"unknown update rule {self.update!r}")
        if self.shots < 0:
            raise InvalidInputError("shots must be >= 0")


@dataclass
class RoundRecord:
    r: int
    loss: float
    theta: list
    delta: list
    grad: list
    quantum_grad: list = field(default_factory=list)
    clamp_events: int = 0
    max_abs_grad: float = 0.0


@dataclass
class TrainReport:
    rounds: list
    config: dict
    seed: int
    final_theta: list = field(default_factory=list)
    final_loss: float = float("nan")
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rounds": [asdict(r) for r in self.rounds],
            "config": self.config,
            "seed": self.seed,
            "final_theta": self.final_theta,
            "final_loss": self.final_loss,
            "notes": self.notes,
        }

    def metrics_rows(self) -> list:
        return [(r.r, r.loss, r.max_abs_grad, r.clamp_events) for r in self.rounds]


class _LabelOracle:
    """Exact expectations, or shot averages drawn from a dedicated stream."""

    def __init__(self, circuit, observable, shots, seed):
        self.circuit = circuit
        self.observable = observable
        self.shots = shots
        self._rng = make_rng(seed, SAMPLING) if shots else None

    def __call__(self, thetas, z) -> float:
        if not self.shots:
            return predicted_label(self.circuit, thetas, z, self.observable)
        sub = int(self._rng.integers(2**63))
        return sample_label(self.circuit, thetas, z, self.observable, self.shots, sub)

    @property
    def evaluate(self):
        return self if self.shots else None


def train(g: EnvGraph, dataset, rounds: int, config: TrainConfig | None = None) -> TrainReport:
    """Run ``rounds`` measurement rounds of side-information training.

    ``dataset`` is a sequence of ``(z, label)`` pairs. Every round evaluates
    the mean loss, the parameter-shift gradient of that loss, and the
    forward/backward side passes seeded with the output-gate component.
    The update rule then picks what moves ``theta``:

    * ``multiplicative``: ``theta_z <- W_z * theta_z`` (the side-network rule),
    * ``descent``: ``theta <- theta - lam * dL/dtheta`` with the quantum gradient,
    * ``table-descent``: ``theta <- theta - lam * (gradient table summed per vertex)``.
    """
    from .gradcheck import loss_gradient, validate_dataset

    config = config or TrainConfig()
    if rounds < 1:
        raise InvalidInputError("rounds must be >= 1")
    data = validate_dataset(dataset)
    circuit = g.circuit()
    oracle = _LabelOracle(circuit, config.observable, config.shots, config.seed)
    gate_vertex = np.array(circuit.vertex_ids)
    if config.x0_value is None:
        x0 = float(np.mean([input_scalar(z) for z, _ in data]))
    else:
        x0 = float(config.x0_value)

    theta = np.array(g.theta, dtype=float)
    records = []
    for r in range(1, rounds + 1):
        gate_th = g.gate_thetas(theta)
        losses = [loss(l, oracle(gate_th, z)) for z, l in data]
        qgrad = np.zeros(g.num_vertices)
        qgrad[gate_vertex] = loss_gradient(circuit, gate_th, data, config.observable, oracle.evaluate)
        gr = g.with_theta(theta)
        side = forward_side(gr, x0)
        errs = backward_errors(gr, side, float(qgrad[g.L]), q_prefactor=config.q_prefactor)
        table = gradient_table(gr, side, errs)
        if config.update == "multiplicative":
            new = update_gates(gr, GateUpdate.from_side(side))
        elif config.update == "descent":
            new = theta - config.lam * qgrad
        else:
            new = theta - config.lam * table.per_vertex(g.num_vertices)
        new[0] = 0.0
        if not np.all(np.isfinite(new)):
            raise NumericError(f"non-finite gate parameters after round {r}")
        clipped = np.clip(new, -config.clamp, config.clamp)
        events = int(np.count_nonzero(clipped != new))
        if events:
            log.info("round %d: clamped %d gate parameters", r, events)
        records.append(
            RoundRecord(
                r=r,
                loss=float(np.mean(losses)),
                theta=theta.tolist(),
                delta=errs.delta.tolist(),
                grad=table.as_rows(),
                quantum_grad=qgrad.tolist(),
                clamp_events=events,
                max_abs_grad=float(np.abs(qgrad).max()) if config.update == "descent" else table.max_abs(),
            )
        )
        theta = clipped
    final = g.gate_thetas(theta)
    final_loss = float(np.mean([loss(l, oracle(final, z)) for z, l in data]))
    return TrainReport(
        rounds=records,
        config=asdict(config),
        seed=config.seed,
        final_theta=theta.tolist(),
        final_loss=final_loss,
        notes=[SEED_NOTE],
    )
