"""Time the numba-compiled hot loops against their pure-numpy fallbacks.

Each backend runs in its own subprocess because the choice is made at import
time (``AWP_LAB_DISABLE_NUMBA=1`` selects numpy).  Usage::

    python3 benchmarks/bench_numba.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _best(fn, repeat: int) -> float:
    fn()  # warm-up (includes JIT compilation or cache load)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def child(repeat: int) -> dict:
    import numpy as np

    from awp_lab import _accel
    from awp_lab.crystal import CrystalSpec
    from awp_lab.engine import Point, UnfoldedSetup, conditional_wavefunction
    from awp_lab.grid import Grid2D
    from awp_lab.kernels import Ordering, position_kernel
    from awp_lab.special import ssi

    x = np.random.default_rng(0).uniform(0, 60, 1_000_000)
    c = CrystalSpec.degenerate_type1(1e-3, 1.6551, 405e-9)
    g = Grid2D.square(128, 1e-6)
    k = position_kernel(c, g, pump=40e-6, ordering=Ordering.MIDPOINT)
    s = UnfoldedSetup([], k, [], g)
    return {
        "backend": _accel.backend(),
        "ssi_1e6_points_s": _best(lambda: ssi(x), repeat),
        "midpoint_kernel_128sq_s": _best(lambda: conditional_wavefunction(s, Point(3e-6, -2e-6)), repeat),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    a = ap.parse_args()
    if a.child:
        print(json.dumps(child(a.repeat)))
        return
    rows = []
    for disable in ("0", "1"):
        env = dict(os.environ, AWP_LAB_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(a.repeat)],
                             env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))
    keys = [k for k in rows[0] if k != "backend"]
    print(f"{'workload':28s}" + "".join(f"{r['backend']:>12s}" for r in rows) + f"{'speedup':>10s}")
    for k in keys:
        a_, b_ = rows[0][k], rows[1][k]
        print(f"{k:28s}{a_:12.4f}{b_:12.4f}{b_ / a_:10.2f}")


if __name__ == "__main__":
    main()
