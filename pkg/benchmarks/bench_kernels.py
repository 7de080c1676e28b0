"""Timing comparison of the compiled and plain-numpy kernel twins.

Run:  python benchmarks/bench_kernels.py [--batch B] [--hidden D] [--iters N]
"""

import argparse
import time

import numpy as np

from latentchat import kernels


def bench(fn, args, iters):
    fn(*args)  # warm-up (compilation for the jitted twin)
    t0 = time.perf_counter()
    for _ in range(iters):
        fn(*args)
    return (time.perf_counter() - t0) / iters


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--hidden", type=int, default=256)
    ap.add_argument("--iters", type=int, default=200)
    args = ap.parse_args()
    b, d = args.batch, args.hidden
    rng = np.random.default_rng(0)

    pre = rng.standard_normal((b, 4 * d))
    c_prev = rng.standard_normal((b, d))
    x = rng.standard_normal((b, d))
    gain = rng.standard_normal(d) * 0.1 + 1.0
    bias = rng.standard_normal(d) * 0.1

    rows = [("lstm_gates_fwd", kernels.lstm_gates_fwd_np,
             getattr(kernels, "lstm_gates_fwd_nb", None), (pre, c_prev)),
            ("layer_norm_fwd", kernels.layer_norm_fwd_np,
             getattr(kernels, "layer_norm_fwd_nb", None), (x, gain, bias, 1e-5))]

    print(f"batch={b} hidden={d} iters={args.iters} "
          f"(numba available: {kernels.NUMBA_ENABLED})")
    print(f"{'kernel':<18}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, f_np, f_nb, a in rows:
        t_np = bench(f_np, a, args.iters) * 1e3
        if f_nb is None:
            print(f"{name:<18}{t_np:>10.3f}{'n/a':>10}{'n/a':>9}")
            continue
        t_nb = bench(f_nb, a, args.iters) * 1e3
        print(f"{name:<18}{t_np:>10.3f}{t_nb:>10.3f}{t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
