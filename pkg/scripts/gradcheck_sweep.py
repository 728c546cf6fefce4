"""Oracle sweep: parameter shift against finite differences, closed-form
Hessian against exact-arithmetic finite differences.

    python3 scripts/gradcheck_sweep.py [--cases 500] [--seed 0]
"""
import argparse
import time

import numpy as np

from qnn_forge import gradcheck
from qnn_forge.randgen import random_circuit, random_env_graph, random_string
from qnn_forge.rng import CHECK, make_rng


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cases", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = make_rng(args.seed, CHECK)
    t0 = time.perf_counter()
    devs = []
    for _ in range(args.cases):
        c = random_circuit(rng, 4, 8)
        th = rng.uniform(-np.pi, np.pi, len(c))
        devs.append(gradcheck.check_param_shift(c, th, random_string(rng, c.n)))
    print(f"parameter shift: {args.cases} cases, max |dev| {max(devs):.2e}, "
          f"median {np.median(devs):.2e} ({time.perf_counter() - t0:.1f} s)")
    t0 = time.perf_counter()
    worst, asym, sparse = 0.0, 0.0, True
    for _ in range(args.cases // 5):
        g = random_env_graph(rng, int(rng.integers(2, 7)))
        res = gradcheck.check_hessian(g, float(rng.uniform(-1.5, 1.5)), float(rng.uniform(-1, 1)))
        worst = max(worst, res["max_rel_dev"])
        asym = max(asym, res["max_asym"])
        sparse &= res["sparsity_ok"]
    print(f"hessian: {args.cases // 5} graphs, max rel dev {worst:.2e}, max asym {asym:.2e}, "
          f"sparsity {'ok' if sparse else 'violated'} ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
