"""Independent gradient oracles.

* parameter-shift derivatives of the readout expectation (exact for
  involutory generators),
* central finite differences,
* the closed-form Hessian of a quadratic surrogate loss on the side network,
  with its second-error table and adjacency sparsity check.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .envgraph import EnvGraph
from .errors import InvalidInputError, NumericError
from .qnn_train import SideInfo, backward_errors, forward_side
from .qsim import Circuit, loss, predicted_label

SHIFT = math.pi / 4


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("QNN_FORGE_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def shift_derivative(f: Callable[[np.ndarray], float], thetas, i: int) -> float:
    """``f(theta_i + pi/4) - f(theta_i - pi/4)`` for ``f`` built from ``exp(-i theta P)`` gates."""
    plus = np.array(thetas, dtype=float)
    minus = plus.copy()
    plus[i] += SHIFT
    minus[i] -= SHIFT
    return f(plus) - f(minus)


def param_shift_grad(circuit: Circuit, thetas, z, observable="Z", i: int = 0) -> float:
    """Exact ``d ltilde / d theta_i``; multiply by ``-label`` for the loss gradient."""
    if not 0 <= i < len(circuit):
        raise IndexError(f"gate index {i} outside 0..{len(circuit) - 1}")
    return shift_derivative(lambda t: predicted_label(circuit, t, z, observable), thetas, i)


def loss_gradient(circuit: Circuit, thetas, dataset, observable="Z", evaluate=None) -> np.ndarray:
    """Mean over ``(z, label)`` pairs of ``dL/dtheta`` via parameter shift.

    ``evaluate(thetas, z)`` overrides the exact expectation (e.g. shot sampling);
    custom evaluators run sequentially so their draws stay reproducible.
    """
    data = list(dataset)

    def component(k):
        acc = 0.0
        for z, label in data:
            if evaluate is None:
                d = param_shift_grad(circuit, thetas, z, observable, k)
            else:
                d = shift_derivative(lambda t: evaluate(t, z), thetas, k)
            acc += -label * d
        return acc / len(data)

    ks = range(len(circuit))
    if evaluate is None:
        return np.array(_map(component, ks))
    return np.array([component(k) for k in ks])


def finite_diff(f: Callable[[np.ndarray], float], x, i: int, h: float = 1e-5) -> float:
    x = np.array(x, dtype=float)
    xp = x.copy()
    xm = x.copy()
    xp[i] += h
    xm[i] -= h
    fp, fm = f(xp), f(xm)
    if not (math.isfinite(fp) and math.isfinite(fm)):
        raise NumericError(f"non-finite function value near x[{i}]")
    return (fp - fm) / (2 * h)


def mean_loss(circuit: Circuit, thetas, dataset, observable="Z") -> float:
    data = list(dataset)
    return sum(loss(l, predicted_label(circuit, thetas, z, observable)) for z, l in data) / len(data)


# second order


@dataclass(frozen=True)
class HessianTable:
    """``h[(a, b)]`` for arcs ``a, b`` given as ``(from, to)`` pairs."""

    h: dict

    def matrix(self, arcs: Sequence) -> np.ndarray:
        return np.array([[self.h[(a, b)] for b in arcs] for a in arcs])


@dataclass(frozen=True)
class SecondErrorTable:
    """``d2[(l, i)] = d delta_i / d Q_l``."""

    d2: dict


def reach_table(g: EnvGraph) -> np.ndarray:
    """``rho[u, m] = dV_m / dQ_u``: sum over directed paths ``u ~> m`` of angle products.

    Row ``m`` of the transposed table is the classical-chain error vector
    with vertex ``m`` taken as the output.
    """
    rho = np.zeros((g.num_vertices, g.num_vertices))
    for m in range(1, g.num_vertices):
        rho[:, m] = _errors_towards(g, m)
    return rho


def reaches(g: EnvGraph) -> np.ndarray:
    """Boolean ``r[u, m]``: a directed path (possibly empty) leads from ``u`` to ``m``."""
    r = np.eye(g.num_vertices, dtype=bool)
    for u in reversed(g.order):
        for c in g._children[u]:
            r[u] |= r[c]
    return r


def _errors_towards(g: EnvGraph, m: int) -> np.ndarray:
    # the error recursion with output vertex m; vertices after m contribute nothing
    delta = np.zeros(g.num_vertices)
    delta[m] = 1.0
    for z in reversed(g.order):
        if z in (0, m):
            continue
        delta[z] = sum(g.theta[j] * delta[j] for j in g._children[z])
    return delta


def second_errors(g: EnvGraph, side: SideInfo, q_prefactor: bool = False) -> SecondErrorTable:
    """Forward-mode derivative of the error recursion with respect to each ``Q_l``.

    Perturbing ``Q_l`` moves downstream ``Q_i`` by ``rho[l, i]``. The default
    recursion does not read ``Q`` at all, so every entry is exactly zero; the
    ``q_prefactor`` recursion reads ``Q_z`` and its table does not vanish.
    """
    errs = backward_errors(g, side, 1.0, q_prefactor=q_prefactor)
    rho = reach_table(g) if q_prefactor else None
    d2 = {}
    for l in range(1, g.num_vertices):
        dd = np.zeros(g.num_vertices)
        for z in reversed(g.order):
            if z in (0, g.L):
                continue
            acc = sum(g.theta[j] * dd[j] for j in g._children[z])
            if q_prefactor:
                plain = sum(g.theta[j] * errs.delta[j] for j in g._children[z])
                dQ = 1.0 if z == l else rho[l, z]
                acc = dQ * plain + side.Q[z] * acc
            dd[z] = acc
        for i in range(1, g.num_vertices):
            d2[(l, i)] = float(dd[i])
    return SecondErrorTable(d2)


def second_error_sparsity(g: EnvGraph, d2: SecondErrorTable) -> tuple[bool, list]:
    """Entries may be nonzero only between vertices joined by an arc."""
    adjacent = set(g.arcs) | {(j, i) for i, j in g.arcs}
    violations = sorted(k for k, v in d2.d2.items() if v != 0.0 and k not in adjacent)
    return not violations, violations


def hessian_closed_form(g: EnvGraph, side: SideInfo, y: float = 0.0,
                        d2: SecondErrorTable | None = None) -> HessianTable:
    """Hessian of ``(V_L - y)^2 / 2`` over arc parameters, from side information alone.

    Arc ``a = (j, i)`` has first derivative ``delta_i * V_j``. The second
    derivative of ``V_L`` has a square-error term (zero for the linear side
    network) and one ordering term, present only when one arc lies
    downstream of the other. The output set holds the single vertex ``L``;
    the sum over it is kept explicit.
    """
    outputs = (g.L,)
    rho = reach_table(g)
    path = reaches(g)
    if d2 is None:
        d2 = second_errors(g, side)
    resid = side.V[g.L] - y
    dloss = {g.L: resid}  # dL/dV_Y
    d2loss = {(g.L, g.L): 1.0}  # d2L/dV_Y dV_Z
    h = {}
    for a in g.arcs:
        j, i = a
        for b in g.arcs:
            m, l = b
            total = 0.0
            for Y in outputs:
                for Z in outputs:
                    total += d2loss[(Y, Z)] * rho[i, Z] * rho[l, Y] * side.V[j] * side.V[m]
            for Y in outputs:
                sq = d2.d2.get((l, i), 0.0) * side.V[m] * side.V[j]
                if path[i, m]:  # arc a precedes arc b
                    order = rho[l, Y] * rho[i, m] * side.V[j]
                elif path[l, j]:  # arc b precedes arc a
                    order = rho[i, Y] * rho[l, j] * side.V[m]
                else:
                    order = 0.0
                total += dloss[Y] * (sq + order)
            h[(a, b)] = float(total)
    return HessianTable(h)


def side_output(num_vertices: int, arcs: Sequence, arc_theta: dict, bias, label, x0: float) -> float:
    """``V_L`` by memoised recursion over parents, arc parameters given independently.

    Plain Python arithmetic, so exact rationals (``fractions.Fraction``) work.
    """
    par = {v: [] for v in range(num_vertices)}
    for a in arcs:
        par[a[1]].append(a)
    memo = {0: x0}

    def value(v):
        if v not in memo:
            q = sum(arc_theta[a] * value(a[0]) for a in par[v]) + bias[v]
            memo[v] = label[v] + q
        return memo[v]

    for v in range(num_vertices):  # bottom-up keeps recursion depth small
        if all(a[0] in memo for a in par[v]):
            value(v)
    return value(num_vertices - 1)


def fd_hessian(f: Callable[[dict], object], keys: Sequence, point: dict, h) -> dict:
    """Central-difference Hessian of ``f`` over the coordinates ``keys``."""
    out = {}

    def at(shifts):
        p = dict(point)
        for k, s in shifts:
            p[k] = p[k] + s
        return f(p)

    f0 = f(point)
    for ai, a in enumerate(keys):
        for b in keys[ai:]:
            if a == b:
                val = (at([(a, h)]) - 2 * f0 + at([(a, -h)])) / (h * h)
            else:
                val = (at([(a, h), (b, h)]) - at([(a, h), (b, -h)])
                       - at([(a, -h), (b, h)]) + at([(a, -h), (b, -h)])) / (4 * h * h)
            out[(a, b)] = out[(b, a)] = val
    return out


def check_hessian(g: EnvGraph, x0: float, y: float = 0.0, h: float = 1e-5) -> dict:
    """Closed form against an exact-arithmetic finite-difference Hessian."""
    from fractions import Fraction

    side = forward_side(g, x0)
    table = hessian_closed_form(g, side, y)
    point = {a: Fraction(g.theta[a[1]]) for a in g.arcs}
    bias = [Fraction(b) for b in g.bias]
    label = [Fraction(b) for b in g.label]
    fy = Fraction(y)
    fx0 = Fraction(x0)

    def surrogate(p):
        v = side_output(g.num_vertices, g.arcs, p, bias, label, fx0)
        return (v - fy) ** 2 / 2

    fd = fd_hessian(surrogate, list(g.arcs), point, Fraction(h))
    scale = max((abs(float(v)) for v in fd.values()), default=0.0)
    floor = max(scale * 1e-9, 1e-300)
    max_rel = 0.0
    max_asym = 0.0
    for key, val in table.h.items():
        ref = float(fd[key])
        max_rel = max(max_rel, abs(val - ref) / max(abs(ref), floor))
        a, b = key
        max_asym = max(max_asym, abs(val - table.h[(b, a)]))
    ok, violations = second_error_sparsity(g, second_errors(g, side))
    return {"max_rel_dev": max_rel, "max_asym": max_asym, "sparsity_ok": ok,
            "violations": violations, "table": table, "fd": fd}


def check_param_shift(circuit: Circuit, thetas, z, observable="Z", h: float = 1e-5) -> float:
    """Max abs gap between parameter-shift and central finite differences over all gates."""
    f = lambda t: predicted_label(circuit, t, z, observable)
    return max(abs(param_shift_grad(circuit, thetas, z, observable, k) - finite_diff(f, thetas, k, h))
               for k in range(len(circuit)))


def validate_dataset(dataset) -> list:
    data = [(np.asarray(z, dtype=int), int(l)) for z, l in dataset]
    if not data:
        raise InvalidInputError("dataset is empty")
    return data


def check_round_gradient(circuit: Circuit, traces, r: int, observable="Z", h: float = 1e-5) -> dict:
    """Finite differences of ``L_r`` through the recorded ``Phi`` chain.

    The bias component shifts every ``B_k`` (``k <= r``) together, the angle
    component shifts every ``w_k`` by ``h / L`` (one shared angle moved by ``h``).
    Returns relative deviations against the recorded ``g_r``.
    """
    L = len(circuit)
    tr = traces[r - 1]

    def loss_at(dB, dw):
        phi = 0.0
        for k in range(1, r + 1):
            t = traces[k - 1]
            phi = float(np.sum(t.z)) + (t.w_r + dw) * phi + (t.B_r + dB)
        th = np.asarray(tr.theta_r) + tr.kappa * phi
        return loss(tr.label, predicted_label(circuit, th, tr.z, observable))

    fd_B = (loss_at(h, 0.0) - loss_at(-h, 0.0)) / (2 * h)
    fd_theta = (loss_at(0.0, h / L) - loss_at(0.0, -h / L)) / (2 * h)

    def rel(got, ref):
        return abs(got - ref) / max(abs(ref), 1e-8)

    return {"fd_B": fd_B, "fd_theta": fd_theta,
            "rel_B": rel(tr.g_r[-1], fd_B), "rel_theta": rel(tr.g_r[0], fd_theta)}
