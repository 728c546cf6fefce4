"""Recurrent training across measurement rounds, plus the recurrent state map.

Scalar side state per round ``r`` (one input string ``z_r`` per round):

    w_r   = mean(theta_{r-1})                     (theta_0 := theta_1)
    Phi_r = sum(z_r) + w_r * Phi_{r-1} + B_r      (Phi_0 = 0)

The quantum loss sees ``Phi_r`` through shifted angles
``theta_r + kappa * Phi_r``, so ``dL_r/dPhi_r = kappa * sum_i dL_r/dtheta_hat_i``.
Gradients flow back through earlier rounds with
``xi_{r,k} = prod_{i=k+1..r} w_i`` and the parameter vector
``S = (theta_1..theta_L, B)`` is moved by the running average of all
gradients so far.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError, NumericError, TraceError
from .qsim import Circuit, circuit_matrix, loss, predicted_label

PHI_NOTE = (
    "Phi_r = sum(z_r) + w_r * Phi_(r-1) + B_r with w_r the mean previous-round angle; "
    "the loss couples to Phi_r through theta_hat = theta_r + kappa * Phi_r"
)


@dataclass
class RoundTrace:
    """One line of the trace file. Field order here is the serialized order."""

    r: int
    theta_r: list
    B_r: float
    Phi_r: float
    g_r: list = field(default_factory=list)
    omega_r: list = field(default_factory=list)
    loss_r: float = float("nan")
    # inputs needed for replay
    z: list = field(default_factory=list)
    label: int = 0
    w_r: float = 0.0
    quantum_grad: list = field(default_factory=list)
    dL_dPhi: float = 0.0
    lam: float = 0.0
    kappa: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "RoundTrace":
        doc = json.loads(text)
        names = [f.name for f in fields(cls)]
        if not isinstance(doc, dict) or set(doc) != set(names):
            raise TraceError(f"trace record has fields {sorted(doc) if isinstance(doc, dict) else doc!r}")
        return cls(**doc)


@dataclass(frozen=True)
class RQNNConfig:
    lam: float = 0.05
    kappa: float = 0.1
    observable: str = "Z"
    B0: float = 0.0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidInputError(f"lambda must be positive, got {self.lam}")
        if not math.isfinite(self.kappa):
            raise InvalidInputError("kappa must be finite")


# scalar surrogate chain


def phi_step(prev_phi: float, z, theta_prev: Sequence[float], B_r: float) -> tuple[float, float]:
    """Return ``(Phi_r, w_r)``."""
    theta_prev = np.asarray(theta_prev, dtype=float)
    if theta_prev.size == 0:
        raise InvalidInputError("theta_prev is empty")
    w = float(np.mean(theta_prev))
    return float(np.sum(z)) + w * prev_phi + B_r, w


def _xi(traces, r: int, k: int) -> float:
    acc = 1.0
    for i in range(k + 1, r + 1):
        acc *= traces[i - 1].w_r
    return acc


def xi(traces, r: int, k: int) -> float:
    """``prod_{i=k+1..r} w_i`` for ``0 <= k < r``."""
    if not 0 <= k < r:
        raise IndexError(f"xi needs 0 <= k < r, got r={r}, k={k}")
    if r > len(traces):
        raise IndexError(f"only {len(traces)} rounds recorded, asked for r={r}")
    return _xi(traces, r, k)


def coupling_derivative(quantum_grad, kappa: float) -> float:
    return kappa * float(np.sum(quantum_grad))


def round_gradient(traces, r: int, dL_dPhi: float, num_gates: int) -> np.ndarray:
    """``g_r`` over ``(theta_1..theta_L, B)``; all angle components coincide."""
    if r < 1 or r > len(traces):
        raise IndexError(f"round {r} not recorded (have {len(traces)})")
    g_theta = 0.0
    g_bias = 0.0
    for k in range(1, r + 1):
        x = dL_dPhi * _xi(traces, r, k)
        prev_phi = traces[k - 2].Phi_r if k > 1 else 0.0
        g_theta += x * (prev_phi / num_gates)
        g_bias += x
    out = np.full(num_gates + 1, g_theta)
    out[-1] = g_bias
    return out


def omega(gradients: Sequence, lam: float) -> np.ndarray:
    """``(lam / r) * sum_k g_k`` with ``r = len(gradients)``, summed in round order."""
    if not gradients:
        raise InvalidInputError("no gradients recorded")
    acc = np.zeros(len(gradients[0]))
    for g in gradients:
        acc = acc + np.asarray(g, dtype=float)
    return (lam / len(gradients)) * acc


def apply_round_update(traces, r: int, lam: float, R: int | None = None):
    """``(theta_{r+1}, B_{r+1})``, or ``None`` once ``r`` reaches the last round."""
    if R is not None and r >= R:
        return None
    tr = traces[r - 1]
    om = omega([t.g_r for t in traces[:r]], lam)
    theta = np.asarray(tr.theta_r, dtype=float) - om[:-1]
    return theta, tr.B_r - om[-1]


def final_gradient(traces, R: int | None = None) -> np.ndarray:
    if not traces or (R is not None and len(traces) != R):
        raise InvalidInputError(f"run incomplete: {len(traces)} of {R} rounds")
    acc = np.zeros(len(traces[0].g_r))
    for t in traces:
        acc = acc + np.asarray(t.g_r, dtype=float)
    return acc


# training


@dataclass
class RQNNReport:
    traces: list
    config: dict
    G: list
    final_theta: list
    final_B: float
    notes: list = field(default_factory=lambda: [PHI_NOTE])

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "rounds": [asdict(t) for t in self.traces],
            "G": self.G,
            "final_theta": self.final_theta,
            "final_B": self.final_B,
            "notes": self.notes,
        }

    def metrics_rows(self) -> list:
        return [(t.r, t.loss_r, float(np.max(np.abs(t.g_r))), 0) for t in self.traces]


def _quantum_grad(circuit, theta_hat, z, label, observable) -> np.ndarray:
    from .gradcheck import loss_gradient

    return loss_gradient(circuit, theta_hat, [(z, label)], observable)


def train_rqnn(circuit: Circuit, theta1, dataset, rounds: int, config: RQNNConfig | None = None) -> RQNNReport:
    """Round ``r`` uses dataset item ``(r - 1) mod len(dataset)``."""
    config = config or RQNNConfig()
    if rounds < 1:
        raise InvalidInputError("rounds must be >= 1")
    data = [(np.asarray(z, dtype=int), int(l)) for z, l in dataset]
    if not data:
        raise InvalidInputError("dataset is empty")
    theta = np.asarray(theta1, dtype=float)
    if theta.shape != (len(circuit),):
        raise DimensionError(f"{len(circuit)} gates but {theta.size} initial angles")
    L = len(circuit)
    B = float(config.B0)
    theta_prev = theta
    phi_prev = 0.0
    traces: list[RoundTrace] = []
    for r in range(1, rounds + 1):
        z, label = data[(r - 1) % len(data)]
        phi, w = phi_step(phi_prev, z, theta_prev, B)
        theta_hat = theta + config.kappa * phi
        ltilde = predicted_label(circuit, theta_hat, z, config.observable)
        qgrad = _quantum_grad(circuit, theta_hat, z, label, config.observable)
        dphi = coupling_derivative(qgrad, config.kappa)
        tr = RoundTrace(r=r, theta_r=theta.tolist(), B_r=B, Phi_r=phi, loss_r=loss(label, ltilde),
                        z=z.tolist(), label=label, w_r=w, quantum_grad=qgrad.tolist(),
                        dL_dPhi=dphi, lam=config.lam, kappa=config.kappa)
        traces.append(tr)
        tr.g_r = round_gradient(traces, r, dphi, L).tolist()
        tr.omega_r = omega([t.g_r for t in traces], config.lam).tolist()
        if not (np.all(np.isfinite(tr.g_r)) and math.isfinite(phi)):
            raise NumericError(f"non-finite gradient in round {r}")
        step = apply_round_update(traces, r, config.lam, rounds)
        if step is not None:
            theta_prev, phi_prev = theta, phi
            theta, B = step
    return RQNNReport(
        traces=traces,
        config=asdict(config),
        G=final_gradient(traces, rounds).tolist(),
        final_theta=theta.tolist(),
        final_B=B,
    )


def write_trace(traces, path) -> None:
    Path(path).write_text("".join(t.to_json() + "\n" for t in traces))


def read_trace(path) -> list[RoundTrace]:
    try:
        lines = Path(path).read_text().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise TraceError(f"cannot read trace: {exc}") from None
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise TraceError("trace is empty")
    out = []
    for k, ln in enumerate(lines, start=1):
        try:
            tr = RoundTrace.from_json(ln)
        except (json.JSONDecodeError, TypeError) as exc:
            raise TraceError(f"line {k}: {exc}") from None
        if tr.r != k:
            raise TraceError(f"line {k} holds round {tr.r}")
        out.append(tr)
    return out


@dataclass
class ReplayVerdict:
    ok: bool
    round: int | None = None
    field: str | None = None
    detail: str = ""


def replay(traces: Sequence[RoundTrace]) -> ReplayVerdict:
    """Recompute every derived quantity from the recorded inputs; pass iff all match bit for bit."""
    L = len(traces[0].theta_r)

    def bad(r, name, want, got):
        return ReplayVerdict(False, r, name, f"recorded {got!r}, recomputed {want!r}")

    for r, tr in enumerate(traces, start=1):
        if len(tr.theta_r) != L or len(tr.g_r) != L + 1 or len(tr.omega_r) != L + 1:
            return ReplayVerdict(False, r, "shape", "vector lengths disagree")
        prev = traces[r - 2] if r > 1 else None
        if prev is not None:
            step = apply_round_update(traces, r - 1, prev.lam)
            if step[0].tolist() != tr.theta_r:
                return bad(r, "theta_r", step[0].tolist(), tr.theta_r)
            if step[1] != tr.B_r:
                return bad(r, "B_r", step[1], tr.B_r)
        theta_prev = prev.theta_r if prev is not None else tr.theta_r
        phi, w = phi_step(prev.Phi_r if prev is not None else 0.0, tr.z, theta_prev, tr.B_r)
        if w != tr.w_r:
            return bad(r, "w_r", w, tr.w_r)
        if phi != tr.Phi_r:
            return bad(r, "Phi_r", phi, tr.Phi_r)
        dphi = coupling_derivative(tr.quantum_grad, tr.kappa)
        if dphi != tr.dL_dPhi:
            return bad(r, "dL_dPhi", dphi, tr.dL_dPhi)
        g = round_gradient(traces, r, dphi, L).tolist()
        if g != tr.g_r:
            return bad(r, "g_r", g, tr.g_r)
        om = omega([t.g_r for t in traces[:r]], tr.lam).tolist()
        if om != tr.omega_r:
            return bad(r, "omega_r", om, tr.omega_r)
    return ReplayVerdict(True)


def xi_telescoping_gap(traces) -> float:
    """Largest ``|xi_{r,k} - xi_{r,m} xi_{m,k}|`` over ``0 <= k < m < r``."""
    R = len(traces)
    worst = 0.0
    for r in range(2, R + 1):
        for m in range(1, r):
            for k in range(0, m):
                worst = max(worst, abs(xi(traces, r, k) - xi(traces, r, m) * xi(traces, m, k)))
    return worst


# recurrent state map


def f_sigma(Z: np.ndarray) -> np.ndarray:
    # the second branch needs a negative L1 norm and cannot trigger
    if np.sum(np.abs(Z)) >= 0:
        return Z
    return np.zeros_like(Z)


@dataclass(frozen=True)
class RecurrentState:
    H: np.ndarray
    Z: np.ndarray
    E: np.ndarray
    W_out: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        E = np.asarray(self.E, dtype=complex)
        W = np.asarray(self.W_out, dtype=complex)
        if H.ndim != 1:
            raise DimensionError("H must be a vector")
        if E.ndim != 2 or E.shape[0] != H.size:
            raise DimensionError(f"E has shape {E.shape}, H has {H.size} entries")
        if W.ndim != 2 or W.shape[1] != H.size:
            raise DimensionError(f"W_out has shape {W.shape}, H has {H.size} entries")
        if abs(np.linalg.norm(H) - 1.0) > 1e-10:
            raise InvalidInputError("H must have unit norm")
        for name, val in (("H", H), ("Z", np.asarray(self.Z, dtype=complex)), ("E", E), ("W_out", W)):
            object.__setattr__(self, name, val)

    def output(self) -> np.ndarray:
        return self.W_out @ self.H


def recurrent_step(state: RecurrentState, circuit: Circuit, thetas, x_next) -> RecurrentState:
    U = circuit_matrix(circuit, thetas)
    if U.shape[0] != state.H.size:
        raise DimensionError(f"circuit acts on {U.shape[0]} amplitudes, H has {state.H.size}")
    x_next = np.asarray(x_next, dtype=complex)
    if x_next.shape != (state.E.shape[1],):
        raise DimensionError(f"x has shape {x_next.shape}, E expects {state.E.shape[1]} entries")
    Z = U @ state.H + state.E @ x_next
    act = f_sigma(Z)
    norm = np.linalg.norm(act)
    if norm == 0.0 or not math.isfinite(norm):
        raise NumericError("recurrent state collapsed to zero norm")
    return RecurrentState(act / norm, Z, state.E, state.W_out)


@dataclass(frozen=True)
class NormBoundReport:
    lhs: float
    rhs: float
    passed: bool
    unitary_gap: float


def norm_bound_check(trajectory, U, g_T=None, rtol: float = 1e-12) -> NormBoundReport:
    """Compare ``||g_T prod_k D_{k+1} U^T||`` with ``||g_T|| prod_k ||D_{k+1}||``.

    ``D_{k+1} = diag(Z_{k+1})`` for ``Z_1..Z_T`` of the trajectory. Also
    reports the largest ``| ||D U^T|| - ||D|| |``, zero for unitary ``U``.
    """
    Zs = [np.asarray(z, dtype=complex) for z in trajectory]
    if len(Zs) < 2:
        raise InvalidInputError("trajectory needs at least two states")
    U = np.asarray(U, dtype=complex)
    dim = Zs[0].size
    g_T = np.eye(dim, dtype=complex) if g_T is None else np.asarray(g_T, dtype=complex)
    chain = g_T
    rhs = np.linalg.norm(g_T, 2)
    gap = 0.0
    for Z in Zs[1:]:
        D = np.diag(Z)
        J = D @ U.T
        dnorm = np.linalg.norm(D, 2)
        gap = max(gap, abs(np.linalg.norm(J, 2) - dnorm))
        chain = chain @ J
        rhs *= dnorm
    lhs = float(np.linalg.norm(chain, 2))
    rhs = float(rhs)
    return NormBoundReport(lhs, rhs, lhs <= rhs * (1 + rtol) + 1e-300, float(gap))
