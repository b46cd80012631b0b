"""Time the numba and numpy kernels on solver-sized meshes.

    python benchmarks/bench_kernels.py [--refinement 2] [--repeat 20]

The numpy path is the same one MAXSURF_NUMBA=0 selects.
"""
import argparse
import time

import numpy as np

from maxsurf import _kernels as K
from maxsurf.eqmesh import build_mesh
from maxsurf.surface_rep import embed_block, fuchsian_rep


def best_of(fn, repeat):
    fn()  # warm up (and compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--refinement", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--n", type=int, default=2)
    args = ap.parse_args()

    rep = embed_block(fuchsian_rep(2), args.n)
    mesh = build_mesh(rep, refinement=args.refinement, seed="perturbed", eps=0.05, rng_seed=1)
    x, y, deg = mesh.x, mesh.neighbors(), mesh.stars.deg
    fy, fdeg = mesh.fit_points(), mesh.stars.fit_deg
    print(f"rows {len(x)}, max degree {y.shape[1]}, fit set {fy.shape[1]}")

    cases = [("star_stencil", K.star_stencil_np, getattr(K, "star_stencil_nb", None), (x, y, deg))]
    cases.append(("fit_frames", K.fit_frames_np, getattr(K, "fit_frames_nb", None), (x, fy, fdeg, deg)))
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}{'max diff':>11}")
    for name, f_np, f_nb, a in cases:
        t_np = best_of(lambda: f_np(*a), args.repeat)
        if f_nb is None:
            print(f"{name:<14}{1e3 * t_np:12.3f}{'n/a':>12}")
            continue
        t_nb = best_of(lambda: f_nb(*a), args.repeat)
        diff = max(float(np.abs(np.asarray(u) - np.asarray(v)).max()) for u, v in zip(f_np(*a), f_nb(*a)))
        print(f"{name:<14}{1e3 * t_np:12.3f}{1e3 * t_nb:12.3f}{t_np / t_nb:9.1f}{diff:11.2e}")


if __name__ == "__main__":
    main()
