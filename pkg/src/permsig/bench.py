"""Benchmark the trial-scoring backends against each other.

Times the hot kernel (permute one block, score it through a frozen model)
for every available backend and a range of worker-thread counts. The
compiled core releases the GIL, so it is the one expected to scale.
"""

from __future__ import annotations

import time

import numpy as np

from ._accel import available_backends, get_backend
from .models.gru import GruPredictor
from .models.mlp import MlpPredictor
from .rngstream import stream


def _mlp_workload(n_subjects: int, n_features: int, seed: int):
    rng = stream(seed, 900)
    Xs = rng.normal(size=(n_subjects, n_features))
    model = MlpPredictor.init(n_features, rng=stream(seed, 901))
    rows = np.arange(n_subjects, dtype=np.int64)
    block = np.arange(min(10, n_features), dtype=np.int64)
    return model, (Xs,), rows, block


def _gru_workload(n_subjects: int, n_features: int, seed: int):
    rng = stream(seed, 902)
    seqs = [rng.normal(size=(int(rng.integers(2, 5)), n_features)) for _ in range(n_subjects)]
    lengths = np.array([s.shape[0] for s in seqs], dtype=np.int64)
    padded = np.zeros((n_subjects, int(lengths.max()), n_features))
    for i, s in enumerate(seqs):
        padded[i, : s.shape[0]] = s
    model = GruPredictor.init(n_features, rng=stream(seed, 903))
    rows = np.arange(n_subjects, dtype=np.int64)
    block = np.arange(min(10, n_features), dtype=np.int64)
    return model, (padded, lengths), rows, block


def _perms_for(rows: np.ndarray, n_trials: int, seed: int, lengths=None) -> np.ndarray:
    from .permeng import draw_permutation

    out = np.empty((n_trials, len(rows)), dtype=np.int64)
    local_lengths = None if lengths is None else lengths[rows]
    for r in range(n_trials):
        out[r] = rows[draw_permutation(stream(seed, 904, r), len(rows), local_lengths)]
    return out


def _time_chunked(call, perms: np.ndarray, threads: int, chunk: int = 32) -> float:
    from concurrent.futures import ThreadPoolExecutor

    spans = [(lo, min(lo + chunk, perms.shape[0])) for lo in range(0, perms.shape[0], chunk)]
    start = time.perf_counter()
    if threads <= 1:
        for lo, hi in spans:
            call(perms[lo:hi])
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for f in [pool.submit(call, perms[lo:hi]) for lo, hi in spans]:
                f.result()
    return time.perf_counter() - start


def run_benchmark(arch: str = "mlp", n_subjects: int = 600, n_features: int = 126,
                  n_trials: int = 200, thread_counts=(1, 2, 4), seed: int = 0):
    """Return [(backend, threads, seconds, trials/sec)] for each combination."""
    if arch == "mlp":
        model, data, rows, block = _mlp_workload(n_subjects, n_features, seed)
        lengths = None
    else:
        model, data, rows, block = _gru_workload(n_subjects, n_features, seed)
        lengths = data[1]
    perms = _perms_for(rows, n_trials, seed, lengths)

    results = []
    for name in available_backends():
        backend = get_backend(name)
        if arch == "mlp":
            call = lambda chunk: backend.mlp_block_trials(model, data[0], rows, block, chunk)
        else:
            call = lambda chunk: backend.gru_block_trials(model, data[0], data[1], rows, block, chunk)
        call(perms[:2])  # warm up
        for threads in thread_counts:
            elapsed = _time_chunked(call, perms, threads)
            results.append((name, threads, elapsed, n_trials / elapsed))
    return results


def print_benchmark(arch="mlp", n_subjects=600, n_features=126, n_trials=200,
                    thread_counts=(1, 2, 4), seed=0) -> None:
    rows = run_benchmark(arch, n_subjects, n_features, n_trials, thread_counts, seed)
    print(f"backends: {', '.join(available_backends())}   "
          f"workload: {arch}, {n_subjects} subjects x {n_features} features, {n_trials} trials")
    print(f"{'backend':<10}{'threads':>8}{'seconds':>10}{'trials/s':>10}")
    base = {}
    for name, threads, elapsed, rate in rows:
        base.setdefault(name, elapsed)
        speedup = base[name] / elapsed
        print(f"{name:<10}{threads:>8}{elapsed:>10.3f}{rate:>10.1f}   x{speedup:.2f} vs 1 thread")
