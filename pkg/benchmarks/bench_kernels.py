"""Timing comparison of the geometry kernel backends.

Runs the primitive ray caster and the point splatter through every importable
backend (compiled extension and pure-NumPy fallback) on a representative
workload and prints a small table.

    python benchmarks/bench_kernels.py [--frames 50] [--size 64]
"""

import argparse
import time

import numpy as np

from camflow import scenes
from camflow.camera import Z_NEAR, unproject
from camflow.kernels import available_backends


def bench(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=50, help="renders per timing")
    ap.add_argument("--size", type=int, default=64)
    args = ap.parse_args()

    k = scenes.default_intrinsics(args.size, args.size)
    scene = scenes.generate_scene(0)
    packed = scenes._pack_scene(scene)
    poses = [p for p in scenes.generate_clip(0, args.frames, "orbit", k).trajectory.poses]
    frame0, depth0 = scenes.raycast_render(scene, poses[0], k)
    cloud = unproject(depth0.astype(np.float64), poses[0], k, frame0)

    backends = available_backends()
    print(f"workload: {args.frames} x {args.size}x{args.size} frames, "
          f"{len(scene.primitives)} primitives, {len(cloud)} points\n")
    print(f"{'backend':<12}{'raycast ms/frame':>18}{'splat ms/frame':>18}")
    results = {}
    for name, mod in backends.items():
        def cast():
            for p in poses:
                mod.raycast_frame(p.rotation, p.translation, k.fx, k.fy, k.cx,
                                  k.cy, k.width, k.height, *packed, Z_NEAR)

        def splat():
            for p in poses:
                mod.splat_points(cloud.positions, cloud.colors, p.rotation,
                                 p.translation, k.fx, k.fy, k.cx, k.cy,
                                 k.width, k.height, Z_NEAR)

        r = bench(cast, 3) / args.frames * 1e3
        s = bench(splat, 3) / args.frames * 1e3
        results[name] = (r, s)
        print(f"{name:<12}{r:>18.3f}{s:>18.3f}")

    if len(results) == 2:
        ref, fast = results["reference"], results["compiled"]
        print(f"\nspeedup: raycast {ref[0] / fast[0]:.1f}x, "
              f"splat {ref[1] / fast[1]:.1f}x")


if __name__ == "__main__":
    main()
