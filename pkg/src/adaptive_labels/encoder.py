"""MLP encoder mapping input features to an unconstrained latent space."""
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DimensionError
from .tensor import Tensor, add_row, matmul, relu, scale, sum_squares

MAGIC = b"ALBL"
FORMAT_VERSION = 1
TABLE_MAGIC = b"LTBL"


@dataclass
class EncoderConfig:
    input_dim: int
    latent_dim: int
    hidden_layers: list = field(default_factory=list)
    head_l2: float = 0.1
    init_seed: int = 0

    def __post_init__(self):
        dims = [self.input_dim, *self.hidden_layers, self.latent_dim]
        if any(int(d) < 1 for d in dims):
            raise ConfigError(f"encoder dimensions must be positive, got {dims}")
        if self.head_l2 < 0:
            raise ConfigError("head_l2 must be nonnegative")

    @property
    def dims(self):
        return [self.input_dim, *self.hidden_layers, self.latent_dim]


@dataclass
class EncoderParams:
    weights: list
    biases: list
    head_l2: float = 0.1

    def parameters(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def snapshot(self):
        """Detached copy safe to hand to another thread."""
        return EncoderParams([Tensor(W.data, requires_grad=True) for W in self.weights],
                             [Tensor(b.data, requires_grad=True) for b in self.biases],
                             self.head_l2)


def init_encoder(cfg):
    rng = np.random.default_rng(cfg.init_seed)
    weights, biases = [], []
    dims = cfg.dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True))
        biases.append(Tensor(np.zeros(fan_out), requires_grad=True))
    return EncoderParams(weights, biases, cfg.head_l2)


def forward(params, X):
    if not isinstance(X, Tensor):
        X = Tensor(X)
    if X.data.ndim != 2 or X.shape[1] != params.weights[0].shape[0]:
        raise DimensionError(f"encoder expects (m, {params.weights[0].shape[0]}) input, got {X.shape}")
    h = X
    last = len(params.weights) - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = add_row(matmul(h, W), b)
        if i < last:
            h = relu(h)
    return h


def l2_penalty(params):
    """``head_l2`` times the squared Frobenius norm of the final weight matrix."""
    return scale(sum_squares(params.weights[-1]), params.head_l2)


def save_checkpoint(path, params, label_table=None, class_names=None):
    """Write encoder weights, optionally followed by a label-table section."""
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(params.weights))]
    for W, b in zip(params.weights, params.biases):
        rows, cols = W.shape
        chunks.append(struct.pack("<II", rows, cols))
        chunks.append(np.ascontiguousarray(W.data, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b.data, dtype="<f8").tobytes())
    if label_table is not None:
        vectors = np.asarray(label_table, dtype="<f8")
        n, d = vectors.shape
        names = list(class_names) if class_names is not None else [str(i) for i in range(n)]
        chunks.append(TABLE_MAGIC + struct.pack("<II", n, d))
        chunks.append(np.ascontiguousarray(vectors).tobytes())
        for name in names:
            raw = name.encode("utf-8")
            chunks.append(struct.pack("<I", len(raw)) + raw)
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path, head_l2=0.1):
    """Return ``(params, label_table, class_names)``; the last two may be None."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise DataError(f"{path}: not a checkpoint (bad magic)")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise DataError(f"{path}: truncated checkpoint")
        out = buf[pos:pos + n]
        pos += n
        return out

    version, n_layers = struct.unpack("<II", take(8))
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    weights, biases = [], []
    for _ in range(n_layers):
        rows, cols = struct.unpack("<II", take(8))
        W = np.frombuffer(take(8 * rows * cols), dtype="<f8").reshape(rows, cols)
        b = np.frombuffer(take(8 * cols), dtype="<f8")
        weights.append(Tensor(W.astype(np.float64), requires_grad=True))
        biases.append(Tensor(b.astype(np.float64), requires_grad=True))
    params = EncoderParams(weights, biases, head_l2)
    if pos == len(buf):
        return params, None, None
    if take(4) != TABLE_MAGIC:
        raise DataError(f"{path}: unexpected trailing data")
    n, d = struct.unpack("<II", take(8))
    table = np.frombuffer(take(8 * n * d), dtype="<f8").reshape(n, d).astype(np.float64)
    names = []
    for _ in range(n):
        (length,) = struct.unpack("<I", take(4))
        names.append(take(length).decode("utf-8"))
    return params, table, names
