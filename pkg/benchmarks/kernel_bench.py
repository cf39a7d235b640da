"""Compare the numba-compiled kernels against the pure-numpy fallback.

The jitted functions expose their original Python bodies as ``.py_func``, so
both paths run in one process. With IKTRACK_NO_NUMBA=1 only the plain path is
timed.

Usage: python benchmarks/kernel_bench.py [--repeat N]
"""
import argparse
import time

import numpy as np

from iktrack import (BaumgarteConfig, Configuration, GainConfig, Rotation,
                     SolverState, TargetSample, ActiveSetSolver, NUMBA_ENABLED,
                     generate_human_chain, generate_stream, TrajectorySpec, step)
from iktrack import _kernels


def timeit(fn, repeat):
    fn()  # warm up (JIT compile / cache load)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args()

    model = generate_human_chain(66, seed=7)
    rng = np.random.default_rng(0)
    q = Configuration(rng.normal(size=3), Rotation.about_axis([0.3, 0.2, 0.9], 0.7),
                      rng.normal(scale=0.3, size=model.n))
    base_p = np.ascontiguousarray(q.base_pos)
    base_r = np.ascontiguousarray(q.base_rot.m)
    s = np.ascontiguousarray(q.s)
    pos, rot = model.fk_arrays(q)
    omegas = rng.normal(scale=0.02, size=(10_000, 3))

    cases = [
        ("fk_chain", _kernels.fk_chain,
         lambda fn: fn(model._topo, model._parent, model._joint_of, model._origin_p,
                       model._origin_r, model._axis, s, base_p, base_r)),
        ("stacked_jacobian", _kernels.stacked_jacobian_kernel,
         lambda fn: fn(model._parent, model._joint_of, model._axis, model._pos_idx,
                       model._ori_idx, pos, rot, pos[model._base_idx], model.n)),
        ("baumgarte_path_10k", _kernels.baumgarte_path_kernel,
         lambda fn: fn(base_r, omegas, 10.0, 0.01)),
    ]

    print(f"numba enabled: {NUMBA_ENABLED}")
    header = f"{'kernel':<22}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, kernel, call in cases:
        if NUMBA_ENABLED:
            t_jit = timeit(lambda: call(kernel), args.repeat)
            t_py = timeit(lambda: call(kernel.py_func), max(3, args.repeat // 10))
            print(f"{name:<22}{t_jit * 1e3:>12.3f}{t_py * 1e3:>12.3f}{t_py / t_jit:>9.1f}x")
        else:
            t_py = timeit(lambda: call(kernel), args.repeat)
            print(f"{name:<22}{'-':>12}{t_py * 1e3:>12.3f}{'-':>9}")

    # one full tracking step (kernels + QP + integration)
    spec = TrajectorySpec(kind="sinusoidal", duration=0.1, dt=0.01, amplitude=0.2, seed=1)
    _, samples = generate_stream(model, spec)
    gains = GainConfig.build(model, dt=0.01)
    baumgarte = BaumgarteConfig(rho=10.0, dt=0.01)
    solver = ActiveSetSolver()

    def one_step():
        state = SolverState.initial(model, q)
        step(state, samples[0], model, gains, baumgarte, solver)

    t_step = timeit(one_step, args.repeat)
    print(f"{'full step':<22}{t_step * 1e3:>12.3f}{'':>12}{'':>9}")


if __name__ == "__main__":
    main()
