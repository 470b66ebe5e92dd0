"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the same three workloads under each backend in a subprocess (backend
selection happens at import time via OPSYSLAB_PURE_NUMPY) and prints a
small table of timings.

    python3 benchmarks/bench_backends.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOADS = """
import json
import time

import numpy as np

from opsyslab import backend, conic, cpmaps, matcore, opsys, tensorcones


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_eig(repeat):
    rng = np.random.default_rng(0)
    mats = [matcore.rand_herm(rng, 4) for _ in range(4000)]

    def work():
        acc = 0.0
        for m in mats:
            acc += matcore.lambda_min(m)
        return acc

    work()  # warm-up (numba compilation)
    return timed(work, repeat)


def bench_dykstra(repeat):
    rng = np.random.default_rng(1)
    problems = [
        cpmaps.random_unital_perturbed(rng, 2, 2, 0.3)[0] for _ in range(40)
    ]

    def work():
        for f in problems:
            cpmaps.nearest_ucp(f)

    work()
    return timed(work, repeat)


def bench_tensor(repeat):
    left = opsys.dual_system(opsys.full_matrix_system(2))
    right = opsys.full_matrix_system(2)
    rng = np.random.default_rng(2)
    elems = [
        tensorcones.rand_tensor_herm(rng, left, right, level=2)
        for _ in range(10)
    ]

    def work():
        for z in elems:
            zb = tensorcones.shift_unit(z, tensorcones.min_defect(z))
            tensorcones.max_defect(zb, tol=1e-6)

    work()
    return timed(work, repeat)


repeat = int(__import__("sys").argv[1])
out = {
    "backend": backend.backend_name(),
    "eigensolver (4000 x 4x4 lambda_min)": bench_eig(repeat),
    "dykstra (40 x nearest_ucp on M2->M2)": bench_dykstra(repeat),
    "tensor cones (10 x minmax defect, M2* (x) M2)": bench_tensor(repeat),
}
print(json.dumps(out))
"""


def run_backend(pure_numpy, repeat):
    env = dict(os.environ)
    env["OPSYSLAB_PURE_NUMPY"] = "1" if pure_numpy else "0"
    proc = subprocess.run(
        [sys.executable, "-c", WORKLOADS, str(repeat)],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    results = [run_backend(False, args.repeat), run_backend(True, args.repeat)]
    names = [k for k in results[0] if k != "backend"]
    width = max(len(n) for n in names) + 2
    header = f"{'workload':{width}s} " + " ".join(
        f"{r['backend']:>10s}" for r in results
    )
    print(header)
    print("-" * len(header))
    for n in names:
        row = f"{n:{width}s} " + " ".join(f"{r[n]:>9.3f}s" for r in results)
        speed = results[1][n] / max(results[0][n], 1e-12)
        print(f"{row}   x{speed:.2f}")


if __name__ == "__main__":
    main()
