"""Time the hot kernels on both backends and check they agree bit-for-bit.

    python3 benchmarks/bench_kernels.py [--size 512] [--repeats 20]

The native (Cython) backend must exist for a comparison; otherwise only the
numpy fallback is timed.
"""

import argparse
import time

import numpy as np

from uqseg.kernels import available_backends


def _timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _inputs(size, rng):
    image = rng.random((size, size))
    # forward affine: mild rotation + scale about the center
    theta = np.deg2rad(12.0)
    c, s = np.cos(theta), np.sin(theta)
    cx = cy = (size - 1) / 2.0
    rot = np.array([[c, -s, cx - c * cx + s * cy],
                    [s, c, cy - s * cx - c * cy],
                    [0.0, 0.0, 1.0]])
    inverse = np.linalg.inv(rot)[:2].ravel()   # (m00, m01, m02, m10, m11, m12)
    ys, xs = np.mgrid[0:size, 0:size]
    blob = ((xs - cx) ** 2 / (0.3 * size) ** 2
            + (ys - cy) ** 2 / (0.2 * size) ** 2) <= 1.0
    speckle = rng.random((size, size)) > 0.995
    mask = np.ascontiguousarray(blob | speckle)
    return image, inverse, mask


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(0)
    image, inverse, mask = _inputs(args.size, rng)

    kernels = {
        "warp_affine_bilinear": lambda impl: impl.warp_affine_bilinear(image, inverse),
        "box_blur3 (x3)": lambda impl: impl.box_blur3(image, 3),
        "trace_outer_borders": lambda impl: impl.trace_outer_borders(mask),
    }

    print(f"kernel benchmark: {args.size}x{args.size}, best of {args.repeats}")
    print(f"backends: {', '.join(backends)}")
    print()
    print(f"{'kernel':<24} " + " ".join(f"{name + ' (ms)':>14}" for name in backends)
          + ("       speedup" if len(backends) > 1 else ""))
    for name, call in kernels.items():
        times = {}
        outputs = {}
        for backend, impl in backends.items():
            times[backend] = _timeit(lambda: call(impl), args.repeats)
            outputs[backend] = call(impl)
        row = f"{name:<24} " + " ".join(f"{times[b] * 1e3:>14.3f}" for b in backends)
        if "native" in times and "python" in times:
            row += f"  {times['python'] / times['native']:>10.1f}x"
        print(row)

        if len(outputs) > 1:
            a, b = outputs["python"], outputs["native"]
            if name == "trace_outer_borders":
                same = (len(a) == len(b)
                        and all(np.array_equal(x, y) for x, y in zip(a, b)))
            else:
                same = np.array_equal(a, b)
            if not same:
                raise SystemExit(f"backend outputs differ for {name}")
    if len(backends) > 1:
        print("\nall kernel outputs bit-identical across backends")


if __name__ == "__main__":
    main()
