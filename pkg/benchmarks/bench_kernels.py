"""Compare the compiled and pure-numpy kernel backends.

Runs each hot kernel on identical inputs under both backends, reports
wall time per call and the max absolute difference between outputs.

Usage: python3 benchmarks/bench_kernels.py [--repeats N] [--batch N]
       [--feature-dim D] [--classes C]
"""

import argparse
import time

import numpy as np

from maskshift.kernels import jitted, reference
from maskshift.rng import RngStream


def time_fn(fn, args, repeats):
    fn(*args)  # warm up (triggers compilation on the jitted path)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=50)
    ap.add_argument("--batch", type=int, default=512)
    ap.add_argument("--feature-dim", type=int, default=128)
    ap.add_argument("--classes", type=int, default=16)
    args = ap.parse_args()

    rng = RngStream(0)
    n, d, c = args.batch, args.feature_dim, args.classes
    X = rng.normal((n, d))
    y = (rng.uniform((n,)) * c).astype(np.int64)
    W = rng.normal((c, d), std=0.3)
    b = rng.normal((c,), std=0.1)
    delta = rng.normal((c, d), std=0.1)
    logits = X @ W.T + b
    mask_logits = rng.normal((c, d))
    noise = rng.uniform_clamped((4, c, d))

    cases = [
        ("batch_ce_grad", (logits, y)),
        ("editor_batch_grad", (W, b, delta, X, y, 0.5)),
        ("mask_batch_grad",
         (W, b, mask_logits, X, y, noise, 1.0, 0.1, False)),
    ]

    print(f"batch={n} feature_dim={d} classes={c} "
          f"repeats={args.repeats} (best-of)")
    print(f"{'kernel':<20} {'numpy':>12} {'numba':>12} "
          f"{'speedup':>8} {'max diff':>10}")
    for name, case_args in cases:
        t_ref, out_ref = time_fn(getattr(reference, name), case_args,
                                 args.repeats)
        t_jit, out_jit = time_fn(getattr(jitted, name), case_args,
                                 args.repeats)
        diff = max_diff(out_ref, out_jit)
        print(f"{name:<20} {t_ref * 1e6:>10.1f}us {t_jit * 1e6:>10.1f}us "
              f"{t_ref / t_jit:>7.2f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
