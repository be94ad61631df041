"""Compare the compiled and numpy SU(2) propagation kernels.

Run with ``python benchmarks/bench_kernels.py``. Reports wall time per call
and per step for an XY-8 schedule, and the largest difference between the
two backends' results.
"""
import argparse
import time

import numpy as np

from nvsparse import _su2_py
from nvsparse.kernels import compiled_su2_product
from nvsparse.noise import NoiseConfig, make_ensemble
from nvsparse.spin import build_xy8, compile_sequence
from nvsparse.waveforms import PM_T_PULSE, PMParams

try:
    from nvsparse import _su2
except ImportError:
    _su2 = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--blocks", type=int, default=16)
    ap.add_argument("--fields", type=int, default=32)
    ap.add_argument("--realizations", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    seq = build_xy8(args.blocks, PM_T_PULSE, 1000 - PM_T_PULSE, "pm", PMParams.default())
    sched = compile_sequence(seq)
    reals, _ = make_ensemble(NoiseConfig.default(), seq.total_time, 1, args.realizations, seed=0)
    base = np.stack([0.5 * r.delta * (sched.t1 - sched.t0) + 0.5 * r.integral(sched.t0, sched.t1)
                     for r in reals])
    g = np.linspace(0.0, 2e-5, args.fields)
    steps = base.shape[0] * g.size * sched.n_steps
    print(f"schedule: {sched.n_steps} steps x {base.shape[0]} realizations x {g.size} fields")

    results = {}
    kernels = [("python", _su2_py.su2_affine)]
    if _su2 is not None:
        kernels.insert(0, ("cython", _su2.su2_affine))
    else:
        print("compiled extension not built; benchmarking the numpy fallback only")
    for name, fn in kernels:
        t, out = best_of(lambda: fn(sched.ax, sched.ay, base, sched.ac_weight, g), args.repeat)
        results[name] = out
        print(f"{name:>7}: {t * 1e3:9.1f} ms  {t / steps * 1e9:7.2f} ns/step")
    if len(results) == 2:
        da = np.max(np.abs(results["cython"][0] - results["python"][0]))
        db = np.max(np.abs(results["cython"][1] - results["python"][1]))
        print(f"max |difference|: a {da:.2e}, b {db:.2e}")

    if compiled_su2_product is not None:
        az = np.ascontiguousarray(base[:1])
        tc, _ = best_of(lambda: compiled_su2_product(sched.ax, sched.ay, az), args.repeat)
        tp, _ = best_of(lambda: _su2_py.su2_product(sched.ax, sched.ay, az), args.repeat)
        print(f"single product: cython {tc * 1e3:.2f} ms, python {tp * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
