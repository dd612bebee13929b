"""Timing comparison between the numba kernels and the numpy fallback.

Each backend runs in its own subprocess because the backend is chosen at
import time from SCHATPACK_BACKEND. The first numba run includes JIT
compilation; compiled kernels are cached on disk, so run the script twice
to see warm numbers. Usage: python3 benchmarks/bench_backends.py [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

_WORKLOAD = r"""
import json
import time

import numpy as np

import schatpack as sp

rng = np.random.default_rng(0)
results = {"backend": sp.BACKEND}

a = rng.uniform(0.0, 1.0, (50, 400))
x = rng.standard_normal((300, 30)) / np.sqrt(30)
cfg = sp.BoxedConfig.create(300, 30, 0.2, 3, 0.2)

cases = {
    "lp_inf (d=50, n=400, eps=0.05)": lambda: sp.packing_lp_solve(a, 0.05),
    "lp_p3 (d=50, n=400, eps=0.05)": lambda: sp.pnorm_packing_solve(a, 0.05, 3),
    "sdp_p3 (n=300, d=30, eps=0.1)": lambda: sp.schatten_packing_solve(x, 0.1, 3),
    "boxed (n=300, d=30, eps=0.2)": lambda: sp.boxed_schatten_decide(x * 4.0, cfg),
}
repeat = int(REPEAT)
for name, fn in cases.items():
    fn()  # warm any compilation and caches outside the timed region
    t0 = time.perf_counter()
    for _ in range(repeat):
        out = fn()
    results[name] = {
        "seconds": (time.perf_counter() - t0) / repeat,
        "verdict": out.verdict,
        "iterations": out.iterations,
    }
print(json.dumps(results))
"""


def run_backend(backend: str, repeat: int) -> dict:
    env = dict(os.environ, SCHATPACK_BACKEND=backend)
    code = _WORKLOAD.replace("REPEAT", str(repeat))
    proc = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env
    )
    if proc.returncode != 0:
        raise RuntimeError(f"{backend} run failed:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3, help="timed repetitions per case")
    args = parser.parse_args()

    rows = {}
    for backend in ("numpy", "numba"):
        try:
            rows[backend] = run_backend(backend, args.repeat)
        except RuntimeError as exc:
            print(f"skipping {backend}: {exc}", file=sys.stderr)

    cases = [k for k in next(iter(rows.values())) if k != "backend"]
    width = max(len(c) for c in cases) + 2
    header = f"{'case':<{width}}" + "".join(f"{b:>14}" for b in rows) + f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for case in cases:
        line = f"{case:<{width}}"
        times = {}
        for backend, res in rows.items():
            times[backend] = res[case]["seconds"]
            line += f"{times[backend] * 1e3:>12.2f}ms"
        if "numpy" in times and "numba" in times and times["numba"] > 0:
            line += f"{times['numpy'] / times['numba']:>9.2f}x"
        print(line)
    for backend, res in rows.items():
        iters = {c: res[c]["iterations"] for c in cases}
        print(f"{backend}: iterations {iters}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
