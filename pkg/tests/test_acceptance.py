"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the pytest terminal summary; run this file directly
(``python3 tests/test_acceptance.py``) to see only these.
"""
import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

from qnn_forge.envgraph import EnvGraph, circuit_graph
from qnn_forge.experiment import ExperimentConfig, all_strings, initial_angles, run
from qnn_forge.gradcheck import check_hessian, check_param_shift, side_output
from qnn_forge.qnn_train import GateUpdate, TrainConfig, backward_errors, forward_side, train, update_gates
from qnn_forge.qsim import Circuit, circuit_matrix, loss, predicted_label, reference_ansatz
from qnn_forge.randgen import random_circuit, random_env_graph, random_pauli, random_string
from qnn_forge.rng import CHECK, make_rng
from qnn_forge.rqnn_train import (
    RecurrentState,
    RQNNConfig,
    final_gradient,
    norm_bound_check,
    recurrent_step,
    replay,
    train_rqnn,
    xi_telescoping_gap,
)

FIXTURE = Path(__file__).parent / "fixtures" / "parity_n2.json"
PARITY2 = all_strings(2, "parity").pairs()


def test_c01_rotation_matches_dense_exponential(criterion):
    rng = make_rng(101, CHECK)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        p = random_pauli(rng, int(rng.integers(1, 4)))
        theta = float(rng.uniform(-2 * math.pi, 2 * math.pi))
        ours = circuit_matrix(Circuit.from_paulis([p]), [theta])
        worst = max(worst, float(np.max(np.abs(ours - expm(-1j * theta * p.matrix())))))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-10 and secs < 10
    assert criterion(1, ok, f"unitary identity, 200 cases, max dev {worst:.2e}, {secs:.2f} s")


def test_c02_loss_contract(criterion):
    rng = make_rng(102, CHECK)
    bad = 0
    for _ in range(1000):
        c = random_circuit(rng, 6, 12)
        th = rng.uniform(-2 * math.pi, 2 * math.pi, len(c))
        lt = predicted_label(c, th, random_string(rng, c.n), str(rng.choice(list("XYZ"))))
        label = int(rng.choice([-1, 1]))
        bad += not (-1.0 <= lt <= 1.0) or not (0.0 <= loss(label, lt) <= 2.0)
    assert criterion(2, bad == 0, f"loss contract, 1000 circuits, {bad} violations")


def test_c03_parameter_shift_vs_finite_difference(criterion):
    rng = make_rng(103, CHECK)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        c = random_circuit(rng, 4, 8)
        th = rng.uniform(-math.pi, math.pi, len(c))
        worst = max(worst, check_param_shift(c, th, random_string(rng, c.n), str(rng.choice(list("XYZ")))))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-6 and secs < 60
    assert criterion(3, ok, f"parameter shift vs FD, 500 cases, max dev {worst:.2e}, {secs:.2f} s")


def _paths(g, start):
    if start == g.L:
        yield ()
        return
    for c in g._children[start]:
        for rest in _paths(g, c):
            yield (c,) + rest


def test_c04_error_recursion_is_exact(criterion):
    rng = make_rng(104, CHECK)
    fd_worst = 0.0
    path_worst = 0.0
    h = 1e-5
    for _ in range(100):
        g = random_env_graph(rng, int(rng.integers(2, 9)))
        x0 = float(rng.uniform(-1, 1))
        delta = backward_errors(g, forward_side(g, x0), 1.0).delta
        arcs = {a: g.theta[a[1]] for a in g.arcs}
        for i in range(1, g.num_vertices):
            up, dn = list(g.bias), list(g.bias)
            up[i] += h
            dn[i] -= h
            fd = (side_output(g.num_vertices, g.arcs, arcs, up, g.label, x0)
                  - side_output(g.num_vertices, g.arcs, arcs, dn, g.label, x0)) / (2 * h)
            fd_worst = max(fd_worst, abs(delta[i] - fd))
            enum = sum(math.prod(g.theta[v] for v in p) for p in _paths(g, i))
            path_worst = max(path_worst, abs(delta[i] - enum))
    ok = fd_worst <= 1e-8 and path_worst <= 1e-12
    assert criterion(4, ok, f"error recursion, 100 DAGs, FD dev {fd_worst:.2e}, path-sum dev {path_worst:.2e}")


def test_c05_update_semantics(criterion):
    structures = [((0, 1), (1, 2)), ((0, 1), (0, 2), (1, 2))]
    factors = [1.0, 1.0 + 5e-13, 1.0 - 5e-13, 1.0 + 1e-11, 2.0, 0.0, -0.5, 0.75]
    thetas = [-1.3, 0.0, 0.4, 2.0]
    checked = failures = 0
    for arcs in structures:
        for t1, t2 in itertools.product(thetas, repeat=2):
            g = EnvGraph(3, arcs, theta=(0.0, t1, t2))
            for d1, d2 in itertools.product(factors, repeat=2):
                out = update_gates(g, GateUpdate(np.array([7.0, d1, d2])))
                for z, (t, d) in ((1, (t1, d1)), (2, (t2, d2))):
                    want = t if abs(d - 1.0) <= 1e-12 else d * t
                    failures += out[z] != want
                    checked += 1
                failures += out[0] != 0.0
                failures += list(g.theta) != [0.0, t1, t2]  # input untouched
    assert criterion(5, failures == 0, f"update semantics, {checked} exhaustive 3-vertex checks, {failures} failures")


def test_c06_recurrent_bookkeeping(criterion):
    c = Circuit.from_paulis(reference_ansatz(2, 1))
    th = make_rng(106, CHECK).uniform(-1, 1, len(c))
    lam = 0.05
    rep = train_rqnn(c, th, PARITY2, 20, RQNNConfig(lam=lam, kappa=0.1, observable="X"))
    tr = rep.traces
    verdict = replay(tr)
    step_bits = all(
        (np.asarray(tr[r - 1].theta_r) - np.asarray(tr[r - 1].omega_r[:-1])).tolist() == tr[r].theta_r
        for r in range(1, 20))
    avg_dev = max(float(np.max(np.abs((lam / r) * np.sum([t.g_r for t in tr[:r]], axis=0)
                                      - np.asarray(tr[r - 1].omega_r)))) for r in range(1, 21))
    tele = xi_telescoping_gap(tr)
    G = final_gradient(tr, 20)
    g_dev = max(abs(G[k] - math.fsum(t.g_r[k] for t in tr)) for k in range(len(G)))
    ok = verdict.ok and step_bits and avg_dev <= 1e-15 and tele <= 1e-12 and g_dev <= 1e-12
    assert criterion(6, ok, f"recurrent bookkeeping, 20 rounds, replay {'bit-exact' if verdict.ok else 'MISMATCH'}, "
                            f"xi gap {tele:.1e}, G dev {g_dev:.1e}")


def test_c07_decoupled_limit(criterion):
    c = Circuit.from_paulis(reference_ansatz(2, 2))
    th = make_rng(107, CHECK).uniform(-1, 1, len(c))
    rep = train_rqnn(c, th, PARITY2, 20, RQNNConfig(lam=0.1, kappa=0.0, observable="X"))
    zero = all(x == 0.0 for t in rep.traces for x in t.g_r)
    frozen = all(t.theta_r == th.tolist() for t in rep.traces) and rep.final_theta == th.tolist()
    assert criterion(7, zero and frozen, f"decoupled limit, all g_r zero: {zero}, theta constant: {frozen}")


def test_c08_hessian(criterion):
    rng = make_rng(108, CHECK)
    rel = asym = 0.0
    violations = 0
    for _ in range(100):
        g = random_env_graph(rng, int(rng.integers(2, 7)))
        res = check_hessian(g, float(rng.uniform(-1.5, 1.5)), float(rng.uniform(-1, 1)))
        rel = max(rel, res["max_rel_dev"])
        asym = max(asym, res["max_asym"])
        violations += len(res["violations"])
    ok = rel <= 1e-6 and asym <= 1e-10 and violations == 0
    assert criterion(8, ok, f"hessian, 100 DAGs, rel dev {rel:.2e}, asym {asym:.2e}, {violations} mask violations")


def test_c09_recurrent_dynamics(criterion):
    rng = make_rng(109, CHECK)

    def fresh(c):
        dim = 2**c.num_wires
        h = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        E = 0.5 * (rng.normal(size=(dim, 2)) + 1j * rng.normal(size=(dim, 2)))
        return RecurrentState(h / np.linalg.norm(h), np.zeros(dim), E, np.eye(1, dim))

    norm_dev = 0.0
    steps = 0
    while steps < 1000:
        c = random_circuit(rng, 2, 4)
        s = fresh(c)
        for _ in range(10):
            s = recurrent_step(s, c, rng.uniform(-3, 3, len(c)), rng.normal(size=2))
            norm_dev = max(norm_dev, abs(np.linalg.norm(s.H) - 1.0))
            steps += 1
    broken = 0
    for _ in range(50):
        c = random_circuit(rng, 2, 4)
        th = rng.uniform(-3, 3, len(c))
        s = fresh(c)
        Zs = [s.H]
        for _ in range(int(rng.integers(1, 8))):
            s = recurrent_step(s, c, th, rng.normal(size=2))
            Zs.append(s.Z)
        rep = norm_bound_check(Zs, circuit_matrix(c, th))
        broken += (not rep.passed) or rep.unitary_gap > 1e-10
    ok = norm_dev <= 1e-10 and broken == 0
    assert criterion(9, ok, f"recurrent dynamics, {steps} steps, norm dev {norm_dev:.1e}, {broken}/50 bound violations")


def test_c10_end_to_end_training(criterion):
    fixture = json.loads(FIXTURE.read_text())
    base = ExperimentConfig.from_dict(fixture["config"])
    paulis = reference_ansatz(base.n, base.layers)
    g = circuit_graph(paulis, initial_angles(base, len(paulis)), base.wiring)
    t0 = time.perf_counter()
    results = {}
    for lam in fixture["lambdas"]:
        rep = train(g, PARITY2, base.R, TrainConfig(observable=base.observable, update=base.update, lam=lam))
        results[lam] = (rep.rounds[0].loss, rep.final_loss)
    secs = time.perf_counter() - t0
    passing = [lam for lam, (a, b) in results.items() if b < a]
    recorded = fixture["passing_lambdas"] == passing and base.lam in passing
    ok = bool(passing) and secs < 60 and recorded
    detail = ", ".join(f"lambda={lam}: {a:.4f} -> {b:.2e}" for lam, (a, b) in results.items())
    assert criterion(10, ok, f"end-to-end parity n=2, {base.R} rounds, {detail}, {secs:.1f} s")


def test_c11_determinism(criterion, tmp_path):
    verdicts = []
    for mode, extra in (("qnn", {"shots": 128}), ("rqnn", {})):
        cfg = ExperimentConfig(mode=mode, R=15, layers=1, seed=2024, **extra)
        run(cfg, None, tmp_path / mode / "a")
        run(cfg, None, tmp_path / mode / "b")
        names = ["report.json", "metrics.csv"] + (["trace.jsonl"] if mode == "rqnn" else [])
        same = all((tmp_path / mode / "a" / n).read_bytes() == (tmp_path / mode / "b" / n).read_bytes()
                   for n in names)
        verdicts.append((mode, same))
    ok = all(v for _, v in verdicts)
    detail = ", ".join(f"{m} {'identical' if v else 'DIFFERENT'}" for m, v in verdicts)
    assert criterion(11, ok, f"determinism, reports/CSVs/traces byte-compared twice per mode: {detail}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
