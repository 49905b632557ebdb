"""Time the numba kernels against the pure-numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N] [--batch B]``.
Shapes follow the default classifier at the desk operating point. Both
implementations are imported side by side, so ``OSRF_BACKEND`` is irrelevant
here. Outputs are compared before timing.
"""

import argparse
import time

import numpy as np

from osrf._accel import HAVE_NUMBA
from osrf.nn import kernels as K

# (in_channels, out_channels, input length) for the three conv blocks
CONV_SHAPES = ((2, 16, 4096), (16, 32, 1023), (32, 64, 254))


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(batch, rng):
    for cin, cout, length in CONV_SHAPES:
        x = rng.standard_normal((batch, cin, length))
        w = rng.standard_normal((cout, cin, 3)) * 0.1
        b = rng.standard_normal(cout)
        gout = rng.standard_normal((batch, cout, length - 2))
        tag = f"{cin}->{cout}x{length}"
        yield (f"conv fwd {tag}", lambda: K.conv1d_forward_np(x, w, b),
               lambda: K.conv1d_forward_nb(x, w, b))
        yield (f"conv bwd {tag}", lambda: K.conv1d_backward_np(gout, x, w),
               lambda: K.conv1d_backward_nb(gout, x, w))
        y = rng.standard_normal((batch, cout, length - 2))
        _, idx = K.maxpool1d_forward_np(y, 4, 4)
        gp = rng.standard_normal(idx.shape)
        yield (f"pool fwd {cout}x{length - 2}", lambda: K.maxpool1d_forward_np(y, 4, 4),
               lambda: K.maxpool1d_forward_nb(y, 4, 4))
        yield (f"pool bwd {cout}x{length - 2}",
               lambda: K.maxpool1d_backward_np(gp, idx, length - 2),
               lambda: K.maxpool1d_backward_nb(gp, idx, length - 2))


def _same(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(u, v, rtol=1e-9, atol=1e-9) for u, v in zip(a, b))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"batch {args.batch}, best of {args.repeat}")
    print(f"{'kernel':<28}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, f_np, f_nb in cases(args.batch, rng):
        if not _same(f_np(), f_nb()):  # also warms up the JIT
            raise SystemExit(f"{name}: backends disagree")
        t_np = _best(f_np, args.repeat)
        t_nb = _best(f_nb, args.repeat)
        print(f"{name:<28}{t_np * 1e3:>10.2f}{t_nb * 1e3:>10.2f}{t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
