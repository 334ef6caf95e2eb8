"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the comparison works regardless of
``EXCERPTLAB_PURE_PYTHON``. Outputs are checked for equality before timing.
"""

import argparse
import timeit

import numpy as np

from excerptlab._kernels import _fallback

try:
    from excerptlab._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def workloads(rng):
    audio = (np.tile(rng.uniform(-0.5, 0.5, 4096), 16) * 32767).astype("<i2").tobytes()
    runs = bytes(np.repeat(rng.integers(0, 4, 20_000, dtype=np.uint8), rng.integers(1, 30, 20_000)))
    xt = rng.normal(size=(200, 30))
    b = xt.mean(axis=0) + rng.normal(scale=0.1, size=30)
    w0 = np.full(200, 1 / 200)
    return {
        "lzw_encode (128 KiB pcm)": (lambda k: k.lzw_encode(audio)),
        "lzw_decode (128 KiB pcm)": (lambda k, code=_fallback.lzw_encode(audio): k.lzw_decode(code)),
        "rle_binary_encode (~300 KB runs)": (lambda k: k.rle_binary_encode(runs)),
        "rle_binary_decode (~300 KB runs)": (lambda k, code=_fallback.rle_binary_encode(runs): k.rle_binary_decode(code)),
        "simplex_lsq (200 weights x 30)": (lambda k: k.simplex_lsq(xt, b, 0.01, w0, 1e-6, 10_000)[0]),
    }


def same(a, b):
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, atol=1e-6)
    return a == b


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled extension not available; build with `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in workloads(rng).items():
        if not same(fn(_fallback), fn(_ckernels)):
            raise SystemExit(f"{name}: backends disagree")
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:36s} {1e3 * t_py:10.2f} {1e3 * t_c:10.2f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
