"""Recurrent training on the n=2 parity stream for several coupling strengths.

Prints the mean loss of the first and last sweep over the dataset and the
norm of the accumulated gradient G.

    python3 scripts/rqnn_kappa_sweep.py [--rounds 80]
"""
import argparse

import numpy as np

from qnn_forge.experiment import ExperimentConfig, all_strings, initial_angles
from qnn_forge.qsim import Circuit, reference_ansatz
from qnn_forge.rqnn_train import RQNNConfig, replay, train_rqnn


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rounds", type=int, default=80)
    ap.add_argument("--lam", type=float, default=0.05)
    args = ap.parse_args()
    cfg = ExperimentConfig(mode="rqnn", layers=1)
    data = all_strings(cfg.n, cfg.rule).pairs()
    circuit = Circuit.from_paulis(reference_ansatz(cfg.n, cfg.layers))
    theta = initial_angles(cfg, len(circuit))
    k = len(data)
    for kappa in (0.0, 0.05, 0.1, 0.2):
        rep = train_rqnn(circuit, theta, data, args.rounds, RQNNConfig(lam=args.lam, kappa=kappa, observable="X"))
        losses = [t.loss_r for t in rep.traces]
        print(f"kappa={kappa:<5} first sweep {np.mean(losses[:k]):.4f}  last sweep {np.mean(losses[-k:]):.4f}  "
              f"|G|={np.linalg.norm(rep.G):.3e}  replay={'ok' if replay(rep.traces).ok else 'FAIL'}")


if __name__ == "__main__":
    main()
