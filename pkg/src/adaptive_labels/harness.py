"""Seeded method-vs-baseline experiments and their summary metrics."""
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .data import batches, load_csv, load_idx, load_synthetic_dir, read_keyvalue, split
from .encoder import EncoderConfig, forward, init_encoder, save_checkpoint
from .errors import ConfigError, DataError
from .lwal import (
    LabelTable,
    TrainConfig,
    TrainerState,
    compute_centroids,
    init_label_table,
    predict,
    std_predict,
    std_train_step,
    train_step,
)

log = logging.getLogger(__name__)

METHODS = ("std", "lwal", "lwal_rpl")
DEFAULT_SEEDS = (12, 123, 1234)


@dataclass
class RunConfig:
    dataset_kind: str = "synth"
    dataset_paths: list = field(default_factory=list)
    method: str = "lwal"
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3
    k: int = 1
    w: int = 0
    lam: float = None
    dim_multiplier: int = 10
    head_l2: float = 0.1
    hidden: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: list(DEFAULT_SEEDS))
    test_fraction: float = 0.25
    label_column: str = "label"
    limit: int = 0
    hierarchy: str = None
    out_dir: str = "runs/out"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.dataset_kind not in ("synth", "csv", "idx"):
            raise ConfigError(f"unknown dataset.kind {self.dataset_kind!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.dim_multiplier < 1:
            raise ConfigError("dim_multiplier must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.lam is None:
            self.lam = 10.0 if self.method == "lwal_rpl" else 0.0

    @property
    def repel_weight(self):
        return self.lam if self.method == "lwal_rpl" else 0.0

    def latent_dim(self, n_classes):
        return n_classes if self.method == "std" else self.dim_multiplier * n_classes

    def train_config(self, seed):
        return TrainConfig(update_frequency=self.k, warmup_steps=self.w, repel_weight=self.repel_weight,
                           epochs=self.epochs, batch_size=self.batch_size,
                           learning_rate=self.learning_rate, seed=seed)


_KEYS = {
    "dataset.kind": ("dataset_kind", str),
    "dataset.path": ("dataset_paths", lambda v: [v]),
    "dataset.paths": ("dataset_paths", lambda v: [p.strip() for p in v.split(",") if p.strip()]),
    "dataset.label_column": ("label_column", str),
    "dataset.limit": ("limit", int),
    "method": ("method", str),
    "epochs": ("epochs", int),
    "batch_size": ("batch_size", int),
    "learning_rate": ("learning_rate", float),
    "k": ("k", int),
    "w": ("w", int),
    "lambda": ("lam", float),
    "dim_multiplier": ("dim_multiplier", int),
    "head_l2": ("head_l2", float),
    "hidden": ("hidden", lambda v: [int(x) for x in v.split(",") if x.strip()]),
    "seeds": ("seeds", lambda v: [int(x) for x in v.split(",") if x.strip()]),
    "test_fraction": ("test_fraction", float),
    "hierarchy": ("hierarchy", str),
    "out_dir": ("out_dir", str),
}


def parse_run_config(path):
    """Read a ``key = value`` run file. Relative paths resolve against its directory."""
    kv = read_keyvalue(path)
    base = Path(path).resolve().parent
    kwargs = {}
    for key, value in kv.items():
        if key not in _KEYS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        attr, conv = _KEYS[key]
        try:
            kwargs[attr] = conv(value)
        except ValueError:
            raise ConfigError(f"{path}: bad value for {key}: {value!r}") from None
    if "dataset_paths" in kwargs:
        kwargs["dataset_paths"] = [str(base / p) for p in kwargs["dataset_paths"]]
    for attr in ("hierarchy", "out_dir"):
        if attr in kwargs:
            kwargs[attr] = str(base / kwargs[attr])
    return RunConfig(**kwargs)


def load_dataset(cfg):
    """Return ``(dataset, hierarchy or None)`` for the configured source."""
    paths = cfg.dataset_paths
    tree = None
    try:
        if cfg.dataset_kind == "synth":
            if len(paths) != 1:
                raise ConfigError("synth dataset needs dataset.path = <gen-synth output dir>")
            ds, tree = load_synthetic_dir(paths[0])
        elif cfg.dataset_kind == "csv":
            if len(paths) != 1:
                raise ConfigError("csv dataset needs dataset.path")
            ds = load_csv(paths[0], cfg.label_column)
        else:
            if len(paths) != 2:
                raise ConfigError("idx dataset needs dataset.paths = <images>,<labels>")
            ds = load_idx(*paths)
    except OSError as exc:
        raise DataError(f"cannot read dataset: {exc}") from None
    if cfg.hierarchy:
        try:
            tree = analysis.read_hierarchy(cfg.hierarchy)
        except OSError as exc:
            raise DataError(f"cannot read hierarchy: {exc}") from None
    if cfg.limit and cfg.limit < len(ds):
        ds = ds.subset(np.arange(cfg.limit))
    return ds, tree


@dataclass
class RunRecord:
    method: str
    seed: int
    curve: list
    label_vectors: np.ndarray
    class_names: list
    params: object = None

    @property
    def accuracies(self):
        return [row["test_acc"] for row in self.curve]

    @property
    def best_accuracy(self):
        return max(self.accuracies)

    def to_json(self):
        return {"method": self.method, "seed": self.seed, "curve": self.curve,
                "label_vectors": self.label_vectors.tolist(), "class_names": self.class_names}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["method"], obj["seed"], obj["curve"], np.array(obj["label_vectors"], dtype=np.float64),
                   obj["class_names"])


def auac(record):
    accs = record.accuracies if isinstance(record, RunRecord) else list(record)
    if not accs:
        raise ValueError("accuracy curve is empty")
    return float(np.mean(accs))


def time_reduction(method_record, reference_record):
    """Percent of epochs saved reaching the reference's best accuracy, or None."""
    method_accs = method_record.accuracies if isinstance(method_record, RunRecord) else list(method_record)
    ref_accs = reference_record.accuracies if isinstance(reference_record, RunRecord) else list(reference_record)
    if len(method_accs) != len(ref_accs):
        raise ValueError("records cover different numbers of epochs")
    target = max(ref_accs)
    total = len(method_accs)
    for epoch, acc in enumerate(method_accs, 1):
        if acc >= target:
            return int(np.floor(100.0 * (total - epoch) / total + 0.5))
    return None


def train_one(cfg, seed, train, test, on_epoch=None):
    """Train one seed; returns a :class:`RunRecord`."""
    n = train.num_classes
    enc_cfg = EncoderConfig(train.input_dim, cfg.latent_dim(n), list(cfg.hidden), cfg.head_l2, init_seed=seed)
    params = init_encoder(enc_cfg)
    tcfg = cfg.train_config(seed)
    if cfg.method == "std":
        table = LabelTable.empty(n, n)
        step_fn = std_train_step
    else:
        table = init_label_table(n, enc_cfg.latent_dim, seed + 1)
        step_fn = train_step
    state = TrainerState.create(params, table, tcfg)
    curve = []
    wall = 0.0
    for epoch in range(tcfg.epochs):
        state.epoch = epoch
        start = time.perf_counter()
        losses, sizes = [], []
        for X, y in batches(train, tcfg.batch_size, seed, epoch):
            losses.append(step_fn(state, X, y, tcfg).loss)
            sizes.append(len(y))
        wall += (time.perf_counter() - start) * 1e3
        if cfg.method == "std":
            pred = std_predict(params, test.features)
        else:
            pred = predict(params, state.table, test.features)
        row = {"seed": seed, "epoch": epoch + 1,
               "train_loss": float(np.average(losses, weights=sizes)),
               "test_acc": float(np.mean(pred == test.labels)),
               "wall_ms": round(wall, 3)}
        curve.append(row)
        if on_epoch is not None:
            on_epoch(row)
    if cfg.method == "std":
        Z = forward(params, train.features).data
        vectors = np.zeros((n, n))
        for c, vec in compute_centroids(Z, train.labels, n):
            vectors[c] = vec
    else:
        vectors = state.table.vectors.copy()
    return RunRecord(cfg.method, seed, curve, vectors, list(train.class_names), params)


def semantic_score(record, tree):
    """Structure correlation over the classes that map to hierarchy leaves."""
    idx = analysis.mapped_classes(tree, record.class_names)
    if len(idx) < 3:
        raise DataError("fewer than three classes map to hierarchy leaves")
    names = [record.class_names[i] for i in idx]
    learned = analysis.label_distances(record.label_vectors[idx])
    reference = analysis.tree_distances(tree, names)
    taus = analysis.per_class_tau(learned, reference)
    return float(taus.mean()), dict(zip(names, taus.tolist())), learned, names


def run(cfg, out_dir=None):
    """Execute every configured seed, writing artifacts to ``out_dir``."""
    ds, tree = load_dataset(cfg)
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as metrics:
        def emit(row):
            metrics.write(json.dumps(row) + "\n")

        for seed in cfg.seeds:
            train, test = split(ds, cfg.test_fraction, seed)
            log.info("method=%s seed=%d train=%d test=%d", cfg.method, seed, len(train), len(test))
            record = train_one(cfg, seed, train, test, on_epoch=emit)
            records.append(record)
            _write_record(out, record, tree)
    (out / "run.json").write_text(json.dumps({"method": cfg.method, "seeds": list(cfg.seeds),
                                              "epochs": cfg.epochs}, indent=2) + "\n")
    return records


def _write_record(out, record, tree):
    tag = f"{record.method}_seed{record.seed}"
    (out / f"record_{tag}.json").write_text(json.dumps(record.to_json()) + "\n")
    save_checkpoint(out / f"checkpoint_{tag}.bin", record.params, record.label_vectors, record.class_names)
    if tree is not None:
        score, taus, learned, names = semantic_score(record, tree)
        write_score(out / f"score_{tag}.txt", score, taus)
        dendro = analysis.average_linkage(learned, names)
        (out / f"dendrogram_{tag}.nwk").write_text(analysis.export_newick(dendro) + "\n")


def write_score(path, score, taus):
    lines = [f"correlation_score={score!r}"] + [f"tau_b[{name}]={t!r}" for name, t in taus.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_records(runs_dir):
    records = []
    for path in sorted(Path(runs_dir).rglob("record_*.json")):
        records.append(RunRecord.from_json(json.loads(path.read_text())))
    return records


def mean_spread(values):
    """Mean and maximum absolute deviation from it."""
    arr = np.asarray(values, dtype=np.float64)
    m = float(arr.mean())
    return m, float(np.max(np.abs(arr - m)))


def summarize(records, tree=None):
    """Per-method aggregate rows keyed by method name."""
    by_method = {}
    for r in records:
        by_method.setdefault(r.method, {})[r.seed] = r
    reference = by_method.get("std", {})
    summary = {}
    for method in [m for m in METHODS if m in by_method] + sorted(set(by_method) - set(METHODS)):
        runs = [by_method[method][s] for s in sorted(by_method[method])]
        row = {"seeds": [r.seed for r in runs],
               "best_acc": mean_spread([r.best_accuracy for r in runs]),
               "auac": mean_spread([auac(r) for r in runs])}
        reductions = [time_reduction(r, reference[r.seed]) if r.seed in reference else None for r in runs]
        row["time_reduction_per_seed"] = reductions
        reached = [x for x in reductions if x is not None]
        row["time_reduction"] = mean_spread(reached) if reached else None
        if tree is not None:
            scores = [semantic_score(r, tree)[0] for r in runs]
            row["correlation_per_seed"] = scores
            row["correlation_score"] = mean_spread(scores)
        summary[method] = row
    return summary


def _pm(pair, fmt="{:.4f}"):
    if pair is None:
        return "–"
    return f"{fmt.format(pair[0])} ± {fmt.format(pair[1])}"


def format_report(summary):
    lines = []
    for method, row in summary.items():
        lines.append(f"[{method}] seeds={','.join(str(s) for s in row['seeds'])}")
        lines.append(f"  best_acc = {_pm(row['best_acc'])}")
        lines.append(f"  auac = {_pm(row['auac'])}")
        per_seed = ",".join("–" if x is None else str(x) for x in row["time_reduction_per_seed"])
        lines.append(f"  time_reduction_pct = {_pm(row['time_reduction'], '{:.1f}')} (per seed: {per_seed})")
        if "correlation_score" in row:
            lines.append(f"  correlation_score = {_pm(row['correlation_score'])}")
            lines.append("  correlation_per_seed = " + ",".join(f"{s:.4f}" for s in row["correlation_per_seed"]))
    return "\n".join(lines) + "\n"
