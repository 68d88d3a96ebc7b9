"""Compare the compiled kernels with the numpy fallback.

Times each kernel on representative shapes, then one training epoch of the
adaptive-label trainer with each backend swapped in.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from adaptive_labels import _pykernels, kernels
from adaptive_labels.data import SynthSpec, batches, gen_synthetic
from adaptive_labels.encoder import EncoderConfig, init_encoder
from adaptive_labels.lwal import TrainConfig, TrainerState, init_label_table, train_step

try:
    from adaptive_labels import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times) * 1e3


def kernel_cases(rng):
    Z, C = rng.normal(size=(64, 80)), rng.normal(size=(8, 80))
    D = _pykernels.pairwise_distance(Z, C, 1e-12)
    G = rng.normal(size=D.shape)
    labels = rng.integers(0, 8, size=64).astype(np.int64)
    a, b = rng.integers(0, 5, size=300).astype(float), rng.normal(size=300)
    X = rng.random((60, 60))
    L = X + X.T
    np.fill_diagonal(L, 0)
    return {
        "pairwise_distance 64x8x80": lambda k: k.pairwise_distance(Z, C, 1e-12),
        "pairwise_backward 64x8x80": lambda k: k.pairwise_distance_backward(G, Z, C, D),
        "repel 64x80": lambda k: k.repel(Z, labels, 1e-12),
        "class_sums 64x80": lambda k: k.class_sums(Z, labels, 8),
        "tau_b_counts n=300": lambda k: k.tau_b_counts(a, b),
        "average_linkage n=60": lambda k: k.average_linkage(L),
    }


def train_epoch(impl, ds, repel_weight):
    saved = kernels._impl
    kernels._impl = impl
    try:
        cfg = TrainConfig(repel_weight=repel_weight, batch_size=64)
        params = init_encoder(EncoderConfig(ds.input_dim, 80, head_l2=0.0, init_seed=12))
        state = TrainerState.create(params, init_label_table(ds.num_classes, 80, 13), cfg)
        for X, y in batches(ds, cfg.batch_size, 12, 0):
            train_step(state, X, y, cfg)
    finally:
        kernels._impl = saved


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels is not None else [])
    if _ckernels is None:
        print("compiled extension not built; timing the numpy fallback only")
    rng = np.random.default_rng(0)
    header = f"{'case':32s}" + "".join(f"{name:>12s}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)

    def row(label, times):
        line = f"{label:32s}" + "".join(f"{t:10.3f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[0] / times[1]:9.1f}x"
        print(line)

    for label, case in kernel_cases(rng).items():
        row(label, [best_of(lambda: case(k), args.repeat) for _, k in backends])
    ds, _ = gen_synthetic(SynthSpec())
    for lam in (0.0, 10.0):
        row(f"train epoch (lambda={lam:g})",
            [best_of(lambda: train_epoch(k, ds, lam), max(1, args.repeat // 2)) for _, k in backends])


if __name__ == "__main__":
    main()
