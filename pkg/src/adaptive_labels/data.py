"""Datasets: IDX and CSV loaders, a synthetic hierarchical generator, splits and batches."""
import csv
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .analysis import HierarchyTree, read_hierarchy, write_hierarchy
from .errors import ConfigError, DataError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: list
    source: str = ""

    @property
    def num_classes(self):
        return len(self.class_names)

    @property
    def input_dim(self):
        return self.features.shape[1]

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, index, source=None):
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.features[index], self.labels[index], list(self.class_names),
                       source if source is not None else self.source)


def _read_idx(path, magic, ndim):
    data = Path(path).read_bytes()
    if len(data) < 4 + 4 * ndim:
        raise DataError(f"{path}: truncated IDX header")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise DataError(f"{path}: bad IDX magic 0x{found:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", data[4:4 + 4 * ndim])
    body = data[4 + 4 * ndim:]
    expected = int(np.prod(dims))
    if len(body) < expected:
        raise DataError(f"{path}: truncated IDX body ({len(body)} of {expected} bytes)")
    return np.frombuffer(body[:expected], dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path):
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"{images_path}: {images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    n_classes = int(labels.max()) + 1 if labels.size else 0
    return Dataset(features, labels.astype(np.int64), [str(c) for c in range(n_classes)],
                   f"idx:{images_path}")


def write_idx(images_path, labels_path, images, labels):
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]) + labels.tobytes())


def load_csv(path, label_column="label"):
    """Numeric features plus a label column; class ids follow sorted label names."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if label_column not in header:
        raise ConfigError(f"{path}: no label column {label_column!r}")
    li = header.index(label_column)
    names = sorted({r[li] for r in body})
    index = {name: i for i, name in enumerate(names)}
    feats = np.empty((len(body), len(header) - 1))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}:{r + 2}: expected {len(header)} cells, got {len(row)}")
        try:
            feats[r] = [float(v) for k, v in enumerate(row) if k != li]
        except ValueError as exc:
            raise DataError(f"{path}:{r + 2}: non-numeric feature ({exc})") from None
    if not np.all(np.isfinite(feats)):
        raise DataError(f"{path}: non-finite feature values")
    labels = np.array([index[r[li]] for r in body], dtype=np.int64)
    return Dataset(feats, labels, names, f"csv:{path}")


def write_csv(path, ds, label_column="label"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{k}" for k in range(ds.input_dim)] + [label_column])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [ds.class_names[y]])


@dataclass
class SynthSpec:
    depth: int = 3
    branching: int = 2
    dim: int = 32
    sigma: float = 0.5
    ratio: float = 0.4
    samples_per_class: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1 or self.branching < 2 or self.dim < 1 or self.samples_per_class < 1:
            raise ConfigError("synthetic spec needs depth>=1, branching>=2, dim>=1, samples>=1")
        if not 0 < self.ratio < 1:
            raise ConfigError("ratio must lie in (0, 1)")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")

    @property
    def num_classes(self):
        return self.branching ** self.depth


def _node_name(path, leaf):
    digits = "-".join(str(p) for p in path)
    if leaf:
        return f"c{digits}"
    return f"n{digits}" if path else "root"


def synthetic_class_means(spec):
    """Class means and hierarchy edges, drawn in depth-first order from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    base = 10.0 * spec.sigma
    edges, means, names = [], [], []

    def grow(path, mean):
        level = len(path)
        for b in range(spec.branching):
            child = path + (b,)
            leaf = level + 1 == spec.depth
            u = rng.standard_normal(spec.dim)
            u /= np.linalg.norm(u)
            child_mean = mean + spec.ratio ** level * base * u
            edges.append((_node_name(path, False), _node_name(child, leaf)))
            if leaf:
                means.append(child_mean)
                names.append(_node_name(child, True))
            else:
                grow(child, child_mean)

    grow((), np.zeros(spec.dim))
    return np.array(means), names, HierarchyTree(edges), rng


def gen_synthetic(spec):
    means, names, tree, rng = synthetic_class_means(spec)
    n = spec.samples_per_class
    feats = np.concatenate([m + spec.sigma * rng.standard_normal((n, spec.dim)) for m in means])
    labels = np.repeat(np.arange(len(names)), n)
    return Dataset(feats, labels, names, f"synth:seed={spec.seed}"), tree


def write_synthetic(out_dir, spec):
    """Dump features CSV, hierarchy TSV and a spec echo file into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds, tree = gen_synthetic(spec)
    write_csv(out / "features.csv", ds)
    write_hierarchy(out / "hierarchy.tsv", tree)
    (out / "spec.txt").write_text("".join(f"{k} = {v}\n" for k, v in asdict(spec).items()))
    return ds, tree


def load_synthetic_dir(path):
    path = Path(path)
    ds = load_csv(path / "features.csv")
    ds.source = f"synth:{path}"
    return ds, read_hierarchy(path / "hierarchy.tsv")


def _test_counts(counts, fraction):
    """Per-class test sizes: largest-remainder shares of the rounded total.

    Each class gets floor or ceil of ``fraction * count``, so it stays within
    one sample of its exact share, and the total matches the rounded overall
    share. Leftover units go to the largest fractional parts, lowest class
    first on ties. Every class keeps at least one sample on each side.
    """
    exact = fraction * counts
    base = np.floor(exact).astype(np.int64)
    total = math.floor(fraction * counts.sum() + 0.5)
    order = sorted(range(len(counts)), key=lambda c: (-(exact[c] - base[c]), c))
    for c in order[:max(total - int(base.sum()), 0)]:
        base[c] += 1
    return np.clip(base, 1, counts - 1)


def split(ds, test_fraction, seed):
    """Seeded stratified split into ``(train, test)``."""
    if not 0 < test_fraction < 1:
        raise ConfigError("test_fraction must lie in (0, 1)")
    counts = np.bincount(ds.labels, minlength=ds.num_classes)
    if np.any(counts < 2):
        raise DataError("every class needs at least two samples to split")
    perm = np.random.default_rng(seed).permutation(len(ds))
    n_test = _test_counts(counts, test_fraction)
    is_test = np.zeros(len(ds), dtype=bool)
    for c in range(ds.num_classes):
        members = perm[ds.labels[perm] == c]
        is_test[members[:n_test[c]]] = True
    train_idx = perm[~is_test[perm]]
    test_idx = perm[is_test[perm]]
    return ds.subset(train_idx), ds.subset(test_idx)


def batches(ds, batch_size, seed, epoch):
    """Yield ``(X, labels)`` covering every sample once, shuffled by ``seed ^ epoch``."""
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    order = np.random.default_rng(seed ^ epoch).permutation(len(ds))
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield ds.features[idx], ds.labels[idx]


def read_keyvalue(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_synth_spec(path):
    kv = read_keyvalue(path)
    types = {"depth": int, "branching": int, "dim": int, "sigma": float, "ratio": float,
             "samples_per_class": int, "seed": int}
    unknown = set(kv) - set(types)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    try:
        return SynthSpec(**{k: types[k](v) for k, v in kv.items()})
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
