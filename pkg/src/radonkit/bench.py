"""Throughput benchmark of forward projection and backprojection."""
import math
import statistics
import time

import numba
import numpy as np

from . import __version__
from .geometry import angles_linspace, make_fanbeam, make_parallel
from .phantom import shepp_logan
from .projector import backprojection, forward
from .tensor import PRECISIONS


def bench_geometry(kind, size, n_angles=None, det_count=None):
    """The reference configurations: parallel over [0, pi) with ``ceil(size sqrt 2)`` cells, fan over [0, 2 pi)."""
    n_angles = n_angles or size
    if kind == "parallel":
        return make_parallel(size, angles_linspace(0, np.pi, n_angles), det_count or math.ceil(size * math.sqrt(2)))
    if kind == "fanbeam":
        return make_fanbeam(size, angles_linspace(0, 2 * np.pi, n_angles), size, det_count=det_count)
    raise ValueError(f"unknown geometry {kind!r}; expected parallel or fanbeam")


def _time(fn, repeats, warmup):
    for _ in range(warmup):
        fn()
    runs = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return runs


def run_bench(kind="parallel", size=512, batch_sizes=(1, 32), precisions=("half", "single", "double"),
              repeats=5, warmup=1, n_angles=None, det_count=None):
    """Median wall-clock time of each (operation, precision, batch size) cell.

    Returns a JSON-serializable report with the library version, the geometry
    and one entry per cell giving per-call milliseconds and images per second.
    """
    if repeats < 5:
        raise ValueError("at least 5 timed repeats are required")
    geom = bench_geometry(kind, size, n_angles, det_count)
    image = shepp_logan(size, dtype=np.float64)[0]
    results = []
    for precision in precisions:
        dtype = PRECISIONS[precision]
        for batch in batch_sizes:
            x = np.broadcast_to(image, (batch, size, size)).astype(dtype)
            y = forward(geom, x)
            for op, fn in (("forward", lambda: forward(geom, x)), ("backprojection", lambda: backprojection(geom, y))):
                runs = _time(fn, repeats, warmup)
                med = statistics.median(runs)
                results.append({
                    "operation": op,
                    "precision": precision,
                    "batch": batch,
                    "median_ms": 1e3 * med,
                    "images_per_s": batch / med,
                    "runs_ms": [1e3 * r for r in runs],
                })
    return {
        "version": __version__,
        "geometry": geom.describe(),
        "threads": numba.get_num_threads(),
        "repeats": repeats,
        "warmup": warmup,
        "results": results,
    }


def format_report(report):
    g = report["geometry"]
    lines = [
        f"radonkit {report['version']}  {g['geometry']} {g['image_size']}x{g['image_size']}  "
        f"{g['n_angles']} angles  {g['det_count']} cells  threads={report['threads']}",
        f"{'operation':<15} {'precision':<9} {'batch':>5} {'ms/call':>10} {'images/s':>10}",
    ]
    for r in report["results"]:
        lines.append(f"{r['operation']:<15} {r['precision']:<9} {r['batch']:>5} "
                     f"{r['median_ms']:>10.2f} {r['images_per_s']:>10.2f}")
    return "\n".join(lines)
