"""Experiment configuration, datasets and the artifact-writing runner."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .envgraph import circuit_graph
from .errors import InvalidInputError
from .qsim import MAX_WIRES, Circuit, reference_ansatz
from .qnn_train import UPDATE_RULES, TrainConfig, train
from .rng import DATA, INIT, make_rng
from .rqnn_train import RQNNConfig, train_rqnn, write_trace

log = logging.getLogger(__name__)

CSV_HEADER = ("r", "mean_loss", "max_abs_grad", "clamp_events")
RULES = ("parity", "majority", "constant")


class ConfigError(InvalidInputError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 2
    layers: int = 2
    observable: str = "X"
    R: int = 200
    lam: float = 0.05
    kappa: float = 0.1
    seed: int = 0
    mode: str = "qnn"
    shots: int = 0
    update: str = "descent"
    wiring: str = "wires"
    rule: str = "parity"
    count: int = 0  # 0 enumerates all 2^n strings
    init_scale: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n, int) or not 1 <= self.n <= MAX_WIRES:
            raise ConfigError(f"n={self.n} is outside the supported range 1 <= n <= {MAX_WIRES}")
        if not isinstance(self.R, int) or self.R < 1:
            raise ConfigError(f"R must be an integer >= 1, got {self.R}")
        if not (isinstance(self.lam, (int, float)) and self.lam > 0 and math.isfinite(self.lam)):
            raise ConfigError(f"lambda must be positive and finite, got {self.lam}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.mode not in ("qnn", "rqnn"):
            raise ConfigError(f"mode must be qnn or rqnn, got {self.mode!r}")
        if self.observable not in ("X", "Y", "Z"):
            raise ConfigError(f"observable must be X, Y or Z, got {self.observable!r}")
        if not isinstance(self.shots, int) or self.shots < 0:
            raise ConfigError(f"shots must be 0 or a positive integer, got {self.shots}")
        if self.shots and self.mode == "rqnn":
            raise ConfigError("shot sampling is available in qnn mode only")
        if self.update not in UPDATE_RULES:
            raise ConfigError(f"update must be one of {UPDATE_RULES}, got {self.update!r}")
        if self.wiring not in ("wires", "chain"):
            raise ConfigError(f"wiring must be wires or chain, got {self.wiring!r}")
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {self.rule!r}")
        if not isinstance(self.layers, int) or self.layers < 1:
            raise ConfigError("layers must be >= 1")
        if not isinstance(self.count, int) or self.count < 0:
            raise ConfigError("count must be >= 0")
        if not (self.init_scale >= 0 and math.isfinite(self.init_scale)):
            raise ConfigError("init_scale must be finite and >= 0")
        if not math.isfinite(self.kappa):
            raise ConfigError("kappa must be finite")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["lambda"] = doc.pop("lam")
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)


@dataclass(frozen=True)
class Dataset:
    items: tuple

    def __post_init__(self):
        items = tuple((tuple(int(v) for v in z), int(l)) for z, l in self.items)
        if not items:
            raise InvalidInputError("dataset is empty")
        width = len(items[0][0])
        for z, l in items:
            if len(z) != width:
                raise InvalidInputError("strings in a dataset must share one length")
            if l not in (-1, 1) or any(v not in (-1, 1) for v in z):
                raise InvalidInputError(f"entries and labels must be +1 or -1, got {z} -> {l}")
        object.__setattr__(self, "items", items)

    @property
    def n(self) -> int:
        return len(self.items[0][0])

    def pairs(self) -> list:
        return [(np.array(z), l) for z, l in self.items]

    def to_json(self) -> str:
        return json.dumps({"items": [{"z": list(z), "label": l} for z, l in self.items]}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        doc = json.loads(text)
        return cls(tuple((d["z"], d["label"]) for d in doc["items"]))


def label_of(z, rule: str) -> int:
    if rule == "parity":
        return int(np.prod(z))
    if rule == "majority":
        return 1 if sum(z) >= 0 else -1
    if rule == "constant":
        return 1
    raise InvalidInputError(f"unknown labelling rule {rule!r}")


def gen_data(n: int, count: int, rule: str, seed: int) -> Dataset:
    """``count`` strings drawn uniformly from the DATA stream, labelled by ``rule``."""
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    label_of((1,), rule)  # reject unknown rules before drawing
    rng = make_rng(seed, DATA)
    draws = rng.integers(0, 2, size=(count, n))
    return Dataset(tuple((tuple(int(1 - 2 * b) for b in row), label_of(1 - 2 * row, rule)) for row in draws))


def all_strings(n: int, rule: str) -> Dataset:
    return Dataset(tuple((z, label_of(z, rule)) for z in itertools.product((1, -1), repeat=n)))


def dataset_for(cfg: ExperimentConfig) -> Dataset:
    if cfg.count == 0:
        return all_strings(cfg.n, cfg.rule)
    return gen_data(cfg.n, cfg.count, cfg.rule, cfg.seed)


def initial_angles(cfg: ExperimentConfig, num_gates: int) -> np.ndarray:
    return make_rng(cfg.seed, INIT).uniform(-cfg.init_scale, cfg.init_scale, num_gates)


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r, mean_loss, max_abs_grad, clamps in rows:
        w.writerow([r, repr(float(mean_loss)), repr(float(max_abs_grad)), clamps])
    return buf.getvalue()


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def run(cfg: ExperimentConfig, dataset: Dataset | None, out_dir) -> dict:
    """Train and write ``report.json``, ``metrics.csv`` (and ``trace.jsonl`` in rqnn mode).

    Outputs depend only on ``(cfg, dataset)``. Returns the report document.
    """
    dataset = dataset or dataset_for(cfg)
    if dataset.n != cfg.n:
        raise ConfigError(f"dataset strings have length {dataset.n}, config says n={cfg.n}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paulis = reference_ansatz(cfg.n, cfg.layers)
    theta = initial_angles(cfg, len(paulis))
    log.info("run start mode=%s n=%d R=%d seed=%d", cfg.mode, cfg.n, cfg.R, cfg.seed)
    if cfg.mode == "qnn":
        g = circuit_graph(paulis, theta, cfg.wiring)
        tc = TrainConfig(observable=cfg.observable, update=cfg.update, lam=cfg.lam,
                         shots=cfg.shots, seed=cfg.seed)
        rep = train(g, dataset.pairs(), cfg.R, tc)
        doc = rep.to_dict()
        doc["graph"] = g.to_dict()
        rows = rep.metrics_rows()
    else:
        circuit = Circuit.from_paulis(paulis)
        rc = RQNNConfig(lam=cfg.lam, kappa=cfg.kappa, observable=cfg.observable)
        rep = train_rqnn(circuit, theta, dataset.pairs(), cfg.R, rc)
        write_trace(rep.traces, out / "trace.jsonl")
        doc = rep.to_dict()
        rows = rep.metrics_rows()
    doc["experiment"] = cfg.to_dict()
    (out / "report.json").write_text(_dump(doc))
    (out / "metrics.csv").write_text(_csv(rows))
    log.info("run done; %d rounds written to %s", len(rows), out)
    return doc
