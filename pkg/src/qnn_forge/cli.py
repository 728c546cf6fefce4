"""``qnn-forge`` command line.

Exit codes: 0 success, 1 replay mismatch, 2 configuration error,
3 numeric failure, 4 corrupt or empty trace.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import gradcheck
from .envgraph import EnvGraph
from .errors import InvalidInputError, NumericError, TraceError
from .experiment import ConfigError, Dataset, ExperimentConfig, gen_data, run
from .randgen import random_circuit, random_env_graph, random_string
from .rng import CHECK, make_rng
from .rqnn_train import read_trace, replay

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TRACE = 0, 1, 2, 3, 4


def _load_config(args, mode=None) -> ExperimentConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    if mode is not None:
        doc["mode"] = mode
    if args.seed is not None:
        doc["seed"] = args.seed
    return ExperimentConfig.from_dict(doc)


@contextmanager
def _sidecar_log(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("qnn_forge")
    root.addHandler(handler)
    old = root.level
    root.setLevel(logging.INFO)
    try:
        yield
    finally:
        root.removeHandler(handler)
        root.setLevel(old)
        handler.close()


def cmd_gen_data(args) -> int:
    cfg = _load_config(args)
    n = args.n if args.n is not None else cfg.n
    if not 1 <= n <= 12:
        raise ConfigError(f"n={n} is outside the supported range 1 <= n <= 12")
    count = args.count if args.count is not None else max(cfg.count, 1)
    rule = args.rule or cfg.rule
    data = gen_data(n, count, rule, cfg.seed)
    text = data.to_json() + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "dataset.json").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _train(args, mode) -> int:
    cfg = _load_config(args, mode)
    data = None
    if args.data:
        try:
            data = Dataset.from_json(Path(args.data).read_text())
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load dataset {args.data}: {exc}") from None
    out = Path(args.out)
    with _sidecar_log(out):
        doc = run(cfg, data, out)
    last = doc["rounds"][-1]
    loss = last.get("loss", last.get("loss_r"))
    print(f"{mode}: {cfg.R} rounds, last round loss {loss:.6g}; artifacts in {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    rng = make_rng(args.seed or 0, CHECK)
    grad_dev = 0.0
    hess_dev = 0.0
    sparse = True
    for _ in range(args.cases):
        c = random_circuit(rng, 4, 8)
        th = rng.uniform(-np.pi, np.pi, len(c))
        z = random_string(rng, c.n)
        grad_dev = max(grad_dev, gradcheck.check_param_shift(c, th, z, "Z"))
        g = random_env_graph(rng, int(rng.integers(2, 7)))
        res = gradcheck.check_hessian(g, float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)))
        hess_dev = max(hess_dev, res["max_rel_dev"])
        sparse = sparse and res["sparsity_ok"]
    doc = {"max_grad_dev": grad_dev, "max_hess_dev": hess_dev, "sparsity_ok": sparse, "cases": args.cases}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "gradcheck.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_hessian(args) -> int:
    if args.graph:
        try:
            g = EnvGraph.loads(Path(args.graph).read_text())
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load graph {args.graph}: {exc}") from None
    else:
        g = random_env_graph(make_rng(args.seed or 0, CHECK), args.vertices)
    res = gradcheck.check_hessian(g, args.x0, args.y)
    doc = {
        "graph": g.to_dict(),
        "x0": args.x0,
        "y": args.y,
        "max_rel_dev": res["max_rel_dev"],
        "max_asym": res["max_asym"],
        "sparsity_ok": res["sparsity_ok"],
        "entries": [[list(a), list(b), v, float(res["fd"][(a, b)])] for (a, b), v in sorted(res["table"].h.items())],
    }
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "hessian.json").write_text(text)
    print(f"max relative deviation {res['max_rel_dev']:.3g}, asymmetry {res['max_asym']:.3g}, "
          f"sparsity {'ok' if res['sparsity_ok'] else 'violated'}")
    return EXIT_OK


def cmd_replay(args) -> int:
    traces = read_trace(args.trace)
    try:
        verdict = replay(traces)
    except (TypeError, ValueError, IndexError) as exc:
        raise TraceError(f"malformed trace values: {exc}") from None
    if verdict.ok:
        print(f"replay ok: {len(traces)} rounds reproduced bit for bit")
        return EXIT_OK
    print(f"replay FAILED at round {verdict.round} ({verdict.field}): {verdict.detail}")
    return EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qnn-forge", description="Train and check side-information quantum networks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=None):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="DIR", default=out_default)
        sp.add_argument("--seed", metavar="N", type=int)

    sp = sub.add_parser("gen-data", help="write a labelled dataset")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--count", type=int)
    sp.add_argument("--rule", choices=("parity", "majority", "constant"))
    sp.set_defaults(fn=cmd_gen_data)

    for name, mode in (("train-qnn", "qnn"), ("train-rqnn", "rqnn")):
        sp = sub.add_parser(name, help=f"train in {mode} mode")
        common(sp, out_default="out")
        sp.add_argument("--data", metavar="PATH", help="dataset JSON from gen-data")
        sp.set_defaults(fn=lambda a, m=mode: _train(a, m))

    sp = sub.add_parser("gradcheck", help="parameter-shift and Hessian oracles on random cases")
    common(sp)
    sp.add_argument("--cases", type=int, default=50)
    sp.set_defaults(fn=cmd_gradcheck)

    sp = sub.add_parser("hessian", help="closed-form Hessian against finite differences")
    common(sp)
    sp.add_argument("--graph", metavar="PATH", help="graph JSON; random when omitted")
    sp.add_argument("--vertices", type=int, default=5)
    sp.add_argument("--x0", type=float, default=1.0)
    sp.add_argument("--y", type=float, default=0.0)
    sp.set_defaults(fn=cmd_hessian)

    sp = sub.add_parser("replay", help="verify a recurrent-training trace")
    sp.add_argument("trace", metavar="TRACE")
    sp.set_defaults(fn=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidInputError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
