"""Benchmark the compiled kernels against the pure-NumPy fallback.

Each hot kernel is timed on a workload shaped like real pipeline use:
scanplot rasterization on 10-fixation windows, fixation grouping on a
60 Hz session-length stream, and the conv/pool primitives on training
batches. Outputs agree bit-for-bit between backends (asserted before
timing); the table reports median wall time per call and the speedup.

Run:  python3 benchmarks/bench_kernels.py [--repeat N] [--json]
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time

import numpy as np

from readgaze.kernels import fallback

try:
    from readgaze.kernels import _native as native
except ImportError:
    native = None


def _time(fn, args, repeat: int, inner: int) -> float:
    """Median seconds per call over ``repeat`` rounds of ``inner`` calls."""
    rounds = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        rounds.append((time.perf_counter() - t0) / inner)
    return statistics.median(rounds)


def _workloads() -> "list[tuple[str, str, tuple, int]]":
    rng = np.random.Generator(np.random.PCG64(7))

    # 10-fixation window on the classifier raster (51x66) and the
    # full-page default raster (85x110).
    k = 10
    colors = np.linspace([0, 0, 1], [1, 0, 0], k)
    win_small = (
        rng.integers(0, 51, k),
        rng.integers(0, 66, k),
        colors,
        51,
        66,
        2,
    )
    win_page = (
        rng.integers(0, 85, k),
        rng.integers(0, 110, k),
        colors,
        85,
        110,
        2,
    )

    # 60 Hz stream, ~5 min of samples, dwell/travel structure.
    n = 18000
    t = np.arange(n) * (1000.0 / 60.0)
    dwell = rng.random(n // 60) < 0.8
    cx = np.repeat(rng.random(n // 60), 60)
    cy = np.repeat(rng.random(n // 60), 60)
    wobble = 0.002 * rng.standard_normal((2, n))
    x = cx + wobble[0] + np.where(np.repeat(dwell, 60), 0.0, 0.2 * rng.standard_normal(n))
    y = cy + wobble[1]
    idt = (x, y, t, 0.01, 80.0, 75.0)

    # Conv/pool primitives at training-batch shapes.
    batch1 = rng.standard_normal((32, 3, 66, 51))
    batch2 = rng.standard_normal((32, 8, 32, 24))
    cols = fallback.im2col3x3(batch2)
    pooled, arg = fallback.maxpool2x2(batch2)

    return [
        ("rasterize_scanpath", "10-fix window 51x66", win_small, 200),
        ("rasterize_scanpath", "10-fix window 85x110", win_page, 200),
        ("idt_spans", "18k samples @60Hz", idt, 5),
        ("im2col3x3", "batch (32,3,66,51)", (batch1,), 5),
        ("im2col3x3", "batch (32,8,32,24)", (batch2,), 5),
        ("col2im3x3", "cols of (32,8,32,24)", (cols, 32, 8, 32, 24), 5),
        ("maxpool2x2", "batch (32,8,32,24)", (batch2,), 10),
        ("maxpool2x2_backward", "grads (32,8,16,12)", (pooled, arg), 10),
    ]


def _assert_parity(name: str, args: tuple) -> None:
    ref = getattr(fallback, name)(*args)
    got = getattr(native, name)(*args)
    if isinstance(ref, tuple):
        for r, g in zip(ref, got):
            np.testing.assert_array_equal(r, g, err_msg=name)
    else:
        np.testing.assert_array_equal(ref, got, err_msg=name)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5, help="timing rounds (default 5)")
    parser.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    args = parser.parse_args(argv)

    if native is None:
        sys.stderr.write(
            "compiled kernels are not built; run pip install -e . first\n"
        )
        return 1

    rows = []
    for name, load, call_args, inner in _workloads():
        _assert_parity(name, call_args)
        t_native = _time(getattr(native, name), call_args, args.repeat, inner)
        t_fallback = _time(getattr(fallback, name), call_args, args.repeat, inner)
        rows.append(
            {
                "kernel": name,
                "workload": load,
                "native_ms": t_native * 1e3,
                "fallback_ms": t_fallback * 1e3,
                "speedup": t_fallback / t_native,
            }
        )

    if args.json:
        print(json.dumps(rows, indent=1))
        return 0

    header = f"{'kernel':<22} {'workload':<22} {'native':>10} {'fallback':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for r in rows:
        print(
            f"{r['kernel']:<22} {r['workload']:<22}"
            f" {r['native_ms']:>8.3f}ms {r['fallback_ms']:>8.3f}ms"
            f" {r['speedup']:>7.1f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
