"""Compare the compiled RK4 kernel, its pure-Python twin and the generic callable path.

    python benchmarks/bench_kernels.py [--t-end 200] [--repeat 3]
"""
import argparse
import time

import numpy as np

from persist_dde import StepControl, integrate, make_history_constant
from persist_dde._backend import KERNELS
from persist_dde.models import nicholson, nicholson_system


def bench(model, t_end, backend, repeat):
    hist = make_history_constant(np.full(model.dim, 0.5), model.tau)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        tr = integrate(model, hist, t_end, StepControl(backend=backend))
        best = min(best, time.perf_counter() - t0)
    return best, tr


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=200.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    cases = [("nicholson N=1", nicholson(1.0, 2.0, 0.5)), ("nicholson_system N=2", nicholson_system())]
    backends = [b for b in ("compiled", "python") if b in KERNELS] + ["callable"]
    print(f"{'model':<22}{'backend':<10}{'steps':>8}{'seconds':>12}{'speedup':>10}{'max diff':>12}")
    for label, m in cases:
        results = {b: bench(m, args.t_end, b, args.repeat) for b in backends}
        ref_t, ref = results["callable"]
        for b in backends:
            t, tr = results[b]
            diff = float(np.max(np.abs(tr.states - ref.states)))
            print(f"{label:<22}{b:<10}{len(tr.mesh) - 1:>8}{t:>12.4f}{ref_t / t:>9.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()
