"""Benchmark the filtering kernels: numba backend vs pure-numpy fallback.

Runs the same timing loop in two subprocesses (the backend is fixed at import
time by DYSARAR_DISABLE_NUMBA) and prints the speedup per configuration.

Usage: python benchmarks/bench_filter.py [--t-len 2000] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = """
import json, os, time, timeit
import numpy as np
from dysarar.backend import backend_name
from dysarar.estimation import FitOptions, fit_mle
from dysarar.filter import filter_pass, simulate_filter
from dysarar.simlab import random_weight_matrix, table2_spec, table2_truth

t_len, repeat = json.loads(os.environ["BENCH_ARGS"])
w1 = random_weight_matrix(6, 0.8, 1)
w2 = random_weight_matrix(6, 0.8, 2)
spec = table2_spec()
truth = table2_truth(spec)
y, _ = simulate_filter(truth, spec, None, w1, w2, t_len, 0)

filter_pass(y, None, truth, spec, w1, w2)  # warm-up / compile
best = min(timeit.repeat(lambda: filter_pass(y, None, truth, spec, w1, w2),
                         number=1, repeat=repeat))
print(json.dumps({"backend": backend_name(), "t_len": t_len,
                  "filter_ms": best * 1e3}))
"""


def run(disable_numba: bool, t_len: int, repeat: int) -> dict:
    env = dict(os.environ,
               DYSARAR_DISABLE_NUMBA="1" if disable_numba else "0",
               BENCH_ARGS=json.dumps([t_len, repeat]))
    out = subprocess.run([sys.executable, "-c", _WORKER], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t-len", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rows = [run(False, args.t_len, args.repeat), run(True, args.t_len, args.repeat)]
    print(f"\nfilter pass, N=6, T={args.t_len} (best of {args.repeat})")
    print(f"{'backend':<8} {'ms/pass':>10} {'us/step':>10}")
    for row in rows:
        print(f"{row['backend']:<8} {row['filter_ms']:>10.2f} "
              f"{row['filter_ms'] * 1e3 / row['t_len']:>10.2f}")
    speedup = rows[1]["filter_ms"] / rows[0]["filter_ms"]
    print(f"\nnumba speedup: {speedup:.1f}x")


if __name__ == "__main__":
    main()
