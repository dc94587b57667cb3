"""Timing comparison of the two pixel-kernel backends.

Each kernel is run on identical float32 inputs through the pure-numpy
implementation and, when it can be imported, the numba one (after a warmup
call so JIT compilation stays out of the measurement). Outputs are also
compared bitwise — the backends implement the same operation order, so any
difference is a bug, not noise.
"""

import time
from typing import Callable, List, Optional

import numpy as np

from .kernels import _numpy as numpy_impl


def _load_numba():
    try:
        from .kernels import _numba

        return _numba
    except ImportError:
        return None


def _best_of(fn: Callable[[], np.ndarray], repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmark(size: int = 1024, repeats: int = 3, seed: int = 0) -> List[dict]:
    """Time each kernel pair; returns one row per kernel.

    Row keys: kernel, numpy_ms, numba_ms (None when numba is unavailable),
    speedup (numpy/numba), bitwise (outputs identical).
    """
    rng = np.random.default_rng(seed)
    image = rng.random((3, size, size), dtype=np.float32)
    flow = (rng.random((2, size, size), dtype=np.float32) * 8.0 - 4.0).astype(np.float32)
    matrix = np.array(
        [[0.9, 0.1, 3.0], [-0.1, 0.9, -2.0]], dtype=np.float32
    )
    seg = (size * 0.2, size * 0.3, size * 0.8, size * 0.6, size * 0.02)

    numba_impl = _load_numba()
    cases = [
        (
            "warp_bilinear",
            lambda: numpy_impl.warp_bilinear(image, flow, 0.7),
            (lambda: numba_impl.warp_bilinear_f32(image, flow, np.float32(0.7)))
            if numba_impl
            else None,
        ),
        (
            "resize_bilinear",
            lambda: numpy_impl.resize_bilinear(image, size // 2, size // 2),
            (lambda: numba_impl.resize_bilinear_f32(image, size // 2, size // 2))
            if numba_impl
            else None,
        ),
        (
            "affine_sample",
            lambda: numpy_impl.affine_sample(image, matrix),
            (lambda: numba_impl.affine_sample_f32(image, matrix))
            if numba_impl
            else None,
        ),
        (
            "segment_alpha",
            lambda: numpy_impl.segment_alpha(size, size, *seg),
            (
                lambda: numba_impl.segment_alpha_f32(
                    size, size, *(np.float32(v) for v in seg)
                )
            )
            if numba_impl
            else None,
        ),
        (
            "warp_rows_u8",
            lambda: numpy_impl.warp_rows_u8(image, flow, 0.7),
            (lambda: numba_impl.warp_rows_u8_f32(image, flow, np.float32(0.7)))
            if numba_impl
            else None,
        ),
    ]

    rows = []
    for name, np_fn, nb_fn in cases:
        np_s = _best_of(np_fn, repeats)
        row = {
            "kernel": name,
            "numpy_ms": np_s * 1e3,
            "numba_ms": None,
            "speedup": None,
            "bitwise": None,
        }
        if nb_fn is not None:
            nb_fn()  # warmup: JIT compile outside the timed region
            nb_s = _best_of(nb_fn, repeats)
            row["numba_ms"] = nb_s * 1e3
            row["speedup"] = np_s / nb_s
            row["bitwise"] = bool(np.array_equal(np_fn(), nb_fn()))
        rows.append(row)
    return rows


def format_table(rows: List[dict]) -> str:
    header = ("kernel", "numpy ms", "numba ms", "speedup", "bitwise")
    body = []
    for r in rows:
        body.append(
            (
                r["kernel"],
                f"{r['numpy_ms']:.2f}",
                "n/a" if r["numba_ms"] is None else f"{r['numba_ms']:.2f}",
                "n/a" if r["speedup"] is None else f"{r['speedup']:.1f}x",
                "n/a" if r["bitwise"] is None else ("yes" if r["bitwise"] else "NO"),
            )
        )
    table = [header] + body
    widths = [max(len(row[c]) for row in table) for c in range(len(header))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)))
        if i == 0:
            lines.append("  ".join("-" * widths[c] for c in range(len(header))))
    return "\n".join(lines)
