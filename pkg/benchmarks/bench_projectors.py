"""Time forward and adjoint projections with the numba and numpy kernels.

Usage::

    python benchmarks/bench_projectors.py --size 128 --views 202 --repeat 3

The first numba call of each kernel compiles it; that call is reported
separately as ``warmup`` and excluded from the timed repeats.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tomocouple.core import Geometry
from tomocouple.phantom import SHEPP_LOGAN, rasterize
from tomocouple.projectors import ALL_KINDS, ProjectorPair, _kernels_numba, _kernels_numpy

BACKENDS = {"numba": _kernels_numba, "numpy": _kernels_numpy}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--views", type=int, default=202)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--kinds", default=",".join(k.value for k in ALL_KINDS))
    args = p.parse_args(argv)

    g = Geometry(args.views, args.size)
    img = rasterize(SHEPP_LOGAN, args.size)
    sino = np.random.default_rng(0).random(g.shape)
    print(f"{'kind':4} {'op':7} {'backend':7} {'warmup[s]':>10} {'best[s]':>10} {'speedup':>8} {'max|diff|':>10}")
    for kind in args.kinds.split(","):
        for op, arg in (("forward", img), ("adjoint", sino)):
            rows = {}
            for name, module in BACKENDS.items():
                pair = ProjectorPair(kind, g, kernels=module)
                fn = getattr(pair, op)
                t0 = time.perf_counter()
                fn(arg)
                warm = time.perf_counter() - t0
                best, out = best_of(lambda: fn(arg), args.repeat)
                rows[name] = (warm, best, out)
            diff = float(np.max(np.abs(rows["numba"][2] - rows["numpy"][2])))
            ref = rows["numpy"][1]
            for name, (warm, best, _) in rows.items():
                print(f"{kind:4} {op:7} {name:7} {warm:10.4f} {best:10.4f} {ref / best:8.2f} {diff:10.2e}")


if __name__ == "__main__":
    main()
