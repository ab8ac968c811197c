"""Command-line interface: ``radonkit <subcommand> [options]``.

Exit codes: 0 on success, 1 on usage or validation errors, 2 on numerical
failures (divergence, non-finite values, half-precision overflow).

Commands that write a sinogram also write a ``<output>.geom.json`` sidecar
describing the acquisition, so later commands (``backproject``, ``fbp``,
``solve``, ``admm``) pick the geometry up without repeating the flags.
Explicit geometry flags take precedence over a sidecar.
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .npyio import ArrayFormatError, atomic_write, read_array, write_array

logger = logging.getLogger("radonkit")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
GEOMETRY_FLAGS = ("angle_range", "limited_angle", "det_count", "det_spacing", "source_distance", "det_distance")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------- helpers


def _load(path):
    arr = read_array(path)
    return arr


def _as_batch(arr, ndim):
    """Add a leading batch axis to a single item; returns (batched, squeeze_back)."""
    if arr.ndim == ndim - 1:
        return arr[None], True
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim - 1}-D array or a {ndim}-D batch, got shape {arr.shape}")
    return arr, False


def _save(path, arr, squeeze):
    write_array(path, arr[0] if squeeze else arr)


def _sidecar(path):
    return Path(str(path) + ".geom.json")


def _write_sidecar(path, geom):
    desc = geom.describe()
    desc["angles"] = [float(a) for a in geom.angles]
    payload = json.dumps(desc, indent=2).encode()
    atomic_write(_sidecar(path), lambda fh: fh.write(payload))


def _read_sidecar(path):
    p = _sidecar(path)
    if not p.exists():
        return None
    with open(p) as fh:
        return json.load(fh)


def _angles(args, n_angles, kind):
    from .geometry import angles_linspace

    if getattr(args, "limited_angle", None) is not None:
        # centred limited range, endpoints included
        return (np.linspace(0, args.limited_angle, n_angles) - args.limited_angle / 2) * np.pi / 180
    span = args.angle_range if args.angle_range is not None else (180.0 if kind == "parallel" else 360.0)
    return angles_linspace(0.0, span * np.pi / 180, n_angles)


def _geometry_from_dict(d):
    from .geometry import FanbeamGeometry, ParallelGeometry

    angles = np.asarray(d["angles"], dtype=np.float64)
    if d["geometry"] == "parallel":
        return ParallelGeometry(d["image_size"], angles, d["det_count"], d["det_spacing"])
    return FanbeamGeometry(d["image_size"], angles, d["source_distance"], d["det_distance"], d["det_count"],
                           d["det_spacing"])


def _build_geometry(args, size, n_angles=None, det_count=None):
    from .geometry import make_fanbeam, make_parallel

    kind = args.geometry
    n_angles = n_angles or args.angles or size
    det_count = det_count or args.det_count
    angles = _angles(args, n_angles, kind)
    if kind == "parallel":
        return make_parallel(size, angles, det_count or math.ceil(size * math.sqrt(2)), args.det_spacing)
    source = args.source_distance if args.source_distance is not None else float(size)
    return make_fanbeam(size, angles, source, args.det_distance, det_count, args.det_spacing)


def _geometry_for_sinogram(args, sino, path):
    """Geometry matching a loaded sinogram: explicit flags, else the sidecar."""
    explicit = args.geometry is not None or args.size is not None or any(
        getattr(args, f, None) is not None for f in GEOMETRY_FLAGS)
    side = _read_sidecar(path)
    if side is not None and not explicit:
        geom = _geometry_from_dict(side)
    else:
        if args.size is None:
            raise ValueError(f"--size is required (no geometry sidecar found next to {path})")
        args.geometry = args.geometry or (side["geometry"] if side else "parallel")
        geom = _build_geometry(args, args.size, sino.shape[-2], sino.shape[-1])
    if sino.shape[-2:] != geom.sinogram_shape:
        raise ValueError(f"sinogram shape {sino.shape[-2:]} does not match geometry {geom.sinogram_shape}")
    return geom


def _emit(args, payload, text):
    if args.json:
        print(json.dumps(payload, indent=2, default=float))
    else:
        print(text)


def _add_geometry(p, with_size=True):
    g = p.add_argument_group("geometry")
    g.add_argument("--geometry", choices=("parallel", "fanbeam"), default=None,
                   help="beam geometry (default parallel, or the input's sidecar)")
    if with_size:
        g.add_argument("--size", type=int, default=None, help="image side length in pixels")
    g.add_argument("--angles", type=int, default=None, help="number of projection angles (default: image size)")
    g.add_argument("--angle-range", type=float, default=None,
                   help="angular range in degrees starting at 0, endpoint excluded (default 180 parallel, 360 fan)")
    g.add_argument("--limited-angle", type=float, default=None,
                   help="centred range of this many degrees, endpoints included (overrides --angle-range)")
    g.add_argument("--det-count", type=int, default=None,
                   help="detector cells (default ceil(size*sqrt(2)) parallel, size fan)")
    g.add_argument("--det-spacing", type=float, default=None, help="detector cell width")
    g.add_argument("--source-distance", type=float, default=None, help="fan beam: source to centre (default size)")
    g.add_argument("--det-distance", type=float, default=None, help="fan beam: detector to centre (default source)")


# ---------------------------------------------------------------- commands


def cmd_phantom(args):
    from .phantom import shepp_logan
    from .tensor import PRECISIONS

    x = shepp_logan(args.size, supersample=args.supersample, dtype=np.float64)
    write_array(args.output, x[0].astype(PRECISIONS[args.precision]) if args.precision != "half"
                else _half(x[0]))
    _emit(args, {"output": str(args.output), "shape": [args.size, args.size], "precision": args.precision},
          f"wrote {args.size}x{args.size} {args.precision} phantom to {args.output}")


def _half(x):
    from .tensor import to_half_storage

    return to_half_storage(x)


def cmd_project(args):
    from .projector import forward

    x, squeeze = _as_batch(_load(args.input), 3)
    if x.shape[-1] != x.shape[-2]:
        raise ValueError(f"expected square images, got {x.shape[-2:]}")
    args.geometry = args.geometry or "parallel"
    geom = _build_geometry(args, x.shape[-1])
    y = forward(geom, x, step=args.step)
    _save(args.output, y, squeeze)
    _write_sidecar(args.output, geom)
    _emit(args, {"output": str(args.output), "shape": list(y.shape), "geometry": geom.describe()},
          f"wrote sinogram {y.shape} to {args.output}")


def cmd_backproject(args):
    from .projector import backprojection

    y, squeeze = _as_batch(_load(args.input), 3)
    geom = _geometry_for_sinogram(args, y, args.input)
    x = backprojection(geom, y)
    _save(args.output, x, squeeze)
    _emit(args, {"output": str(args.output), "shape": list(x.shape)}, f"wrote backprojection {x.shape} to {args.output}")


def cmd_filter(args):
    from .filtering import filter_sinogram

    y, squeeze = _as_batch(_load(args.input), 3)
    out = filter_sinogram(y, args.filter)
    _save(args.output, out, squeeze)
    side = _read_sidecar(args.input)
    if side is not None:
        atomic_write(_sidecar(args.output), lambda fh: fh.write(json.dumps(side, indent=2).encode()))
    _emit(args, {"output": str(args.output), "filter": args.filter}, f"wrote {args.filter}-filtered sinogram to {args.output}")


def _reference_mse(args, recon, squeeze):
    if args.reference is None:
        return None
    from .tensor import mse

    ref, _ = _as_batch(_load(args.reference), 3)
    return mse(recon, ref)


def cmd_fbp(args):
    from .filtering import fbp

    y, squeeze = _as_batch(_load(args.input), 3)
    geom = _geometry_for_sinogram(args, y, args.input)
    if geom.describe()["geometry"] != "parallel":
        raise ValueError("fbp supports parallel-beam sinograms only")
    x = fbp(geom, y, args.filter)
    _save(args.output, x, squeeze)
    err = _reference_mse(args, x, squeeze)
    msg = f"wrote {args.filter} FBP reconstruction {x.shape} to {args.output}"
    _emit(args, {"output": str(args.output), "filter": args.filter, "mse": err},
          msg + (f"\nMSE vs reference: {err:.4e}" if err is not None else ""))


def cmd_solve(args):
    from . import linop, solvers

    y, squeeze = _as_batch(_load(args.input), 3)
    geom = _geometry_for_sinogram(args, y, args.input)
    op = linop.radon(geom)
    guess = np.zeros((y.shape[0],) + geom.image_shape, dtype=y.dtype)
    info = {"method": args.method, "iterations": args.iterations}
    if args.method == "landweber":
        alpha = args.alpha if args.alpha is not None else 0.95 * solvers.estimate_alpha(op, seed=args.seed)
        info["alpha"] = alpha
        x = solvers.landweber(op, y, guess, alpha, args.iterations)
    elif args.method == "cgne":
        x = solvers.cgne(op, guess, y, max_iter=args.iterations, tolerance=args.tolerance)
    else:
        lam = args.tikhonov
        x = solvers.cg(lambda z: op.adjoint(op.apply(z)) + lam * z, guess, op.adjoint(y),
                       max_iter=args.iterations, tolerance=args.tolerance)
    _save(args.output, x, squeeze)
    info["mse"] = _reference_mse(args, x, squeeze)
    _emit(args, dict(info, output=str(args.output)),
          f"{args.method}: wrote {x.shape} to {args.output}"
          + (f"\nMSE vs reference: {info['mse']:.4e}" if info["mse"] is not None else ""))


def cmd_shearlet(args):
    from .phantom import shepp_logan
    from .shearlet import make_plan
    from .tensor import PRECISIONS, relative_error

    if args.input is not None:
        x, _ = _as_batch(_load(args.input), 3)
    else:
        x = shepp_logan(args.size, dtype=PRECISIONS[args.precision] if args.precision != "half" else np.float32)
    plan = make_plan(x.shape[-2], x.shape[-1], [args.alpha] * args.scales)
    c = plan.forward(x)
    r = plan.backward(c)
    energy = float(np.sum(c.astype(np.float64) ** 2) / np.sum(x.astype(np.float64) ** 2))
    report = {
        "n_coeff": plan.n_coeff,
        "directions_per_scale": plan.directions_per_scale(),
        "roundtrip_relative_error": relative_error(r, x),
        "energy_ratio": energy,
        "dtype": str(x.dtype),
    }
    if args.output is not None:
        write_array(args.output, c)
    _emit(args, report,
          f"{plan.n_coeff} coefficients (directions per scale {report['directions_per_scale']} + 1 low-pass)\n"
          f"round-trip relative error {report['roundtrip_relative_error']:.3e} ({x.dtype})\n"
          f"energy ratio {energy:.8f}")


def cmd_admm(args):
    import time

    from . import linop
    from .admm import AdmmParams, admm_reconstruct
    from .filtering import fbp
    from .geometry import make_parallel
    from .shearlet import make_plan

    y, squeeze = _as_batch(_load(args.input), 3)
    n_angles = args.n_angles or y.shape[-2]
    if args.size is None:
        side = _read_sidecar(args.input)
        if side is None:
            raise ValueError(f"--size is required (no geometry sidecar found next to {args.input})")
        args.size = side["image_size"]
    angles = (np.linspace(0, args.angles_range, n_angles) - args.angles_range / 2) * np.pi / 180
    geom = make_parallel(args.size, angles, y.shape[-1])
    if y.shape[-2:] != geom.sinogram_shape:
        raise ValueError(f"sinogram shape {y.shape[-2:]} does not match {n_angles} angles x {y.shape[-1]} cells")
    op = linop.radon(geom)
    plan = make_plan(args.size, args.size, [args.alpha] * args.scales)
    params = AdmmParams(p0=args.p0, p1=args.p1, outer_iterations=args.outer, inner_cg_iterations=args.inner)
    t0 = time.perf_counter()
    f = admm_reconstruct(op, plan, y, params)
    elapsed = time.perf_counter() - t0
    _save(args.output, f, squeeze)
    info = {"output": str(args.output), "seconds": elapsed, "mse": _reference_mse(args, f, squeeze)}
    if args.reference is not None:
        info["fbp_mse"] = _reference_mse(args, fbp(geom, y), squeeze)
    text = f"ADMM ({args.outer} outer x {args.inner} CG) wrote {f.shape} to {args.output} in {elapsed:.2f} s"
    if info["mse"] is not None:
        text += f"\nMSE vs reference: ADMM {info['mse']:.4e}, FBP {info['fbp_mse']:.4e}"
    _emit(args, info, text)


def cmd_check_adjoint(args):
    from . import linop
    from .geometry import angles_linspace, make_fanbeam, make_parallel
    from .shearlet import make_plan

    kinds = ("parallel", "fanbeam", "shearlet") if args.operator == "all" else (args.operator,)
    n_angles = args.angles or 90
    report = {}
    for kind in kinds:
        if kind == "parallel":
            op = linop.radon(make_parallel(args.size, angles_linspace(0, np.pi, n_angles)))
        elif kind == "fanbeam":
            op = linop.radon(make_fanbeam(args.size, angles_linspace(0, 2 * np.pi, n_angles), float(args.size)))
        else:
            op = make_plan(args.size, args.size, [0.5] * args.scales).operator()
        report[kind] = linop.adjoint_check(op, trials=args.trials, seed=args.seed)
    _emit(args, {"size": args.size, "trials": args.trials, "seed": args.seed, "defect": report},
          "\n".join(f"{k:<10} adjoint defect {v:.3e}" for k, v in report.items()))


def cmd_bench(args):
    from .bench import format_report, run_bench

    precisions = ("half", "single", "double") if args.precision == "all" else (args.precision,)
    batches = sorted({1, args.batch})
    report = run_bench(args.geometry or "parallel", args.size, batches, precisions, args.repeats, args.warmup,
                       args.angles, args.det_count)
    if args.output is not None:
        payload = json.dumps(report, indent=2).encode()
        atomic_write(args.output, lambda fh: fh.write(payload))
    _emit(args, report, format_report(report))


def cmd_png_export(args):
    from .export import png_export

    x = _load(args.input)
    if x.ndim == 3:
        x = x[args.index]
    png_export(x, args.output, args.lo, args.hi)
    _emit(args, {"output": str(args.output)}, f"wrote {args.output}")


# ---------------------------------------------------------------- parser


def build_parser():
    parser = _Parser(prog="radonkit", description="Tomographic projection and reconstruction toolkit.")
    parser.add_argument("--version", action="version", version=f"radonkit {__version__}")
    parser.add_argument("--threads", type=int, default=None, help="cap on worker threads (results do not depend on it)")
    parser.add_argument("--json", action="store_true", help="print a JSON report on stdout")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized steps (default 0)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def io(p, inp=True, out=True, out_required=True):
        if inp:
            p.add_argument("--in", dest="input", type=Path, required=True, help="input .npy file")
        if out:
            p.add_argument("-o", "--output", type=Path, required=out_required, help="output file")

    p = sub.add_parser("phantom", help="modified Shepp-Logan phantom")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--supersample", type=int, default=4, help="sub-samples per pixel side (default 4)")
    p.add_argument("--precision", choices=("half", "single", "double"), default="single")
    io(p, inp=False)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("project", help="forward projection")
    _add_geometry(p, with_size=False)
    p.add_argument("--step", type=float, default=1.0, help="ray sampling step in pixels (default 1)")
    io(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("backproject", help="backprojection")
    _add_geometry(p)
    io(p)
    p.set_defaults(func=cmd_backproject)

    p = sub.add_parser("filter", help="ramp-filter sinogram rows")
    p.add_argument("--filter", default="ram-lak", choices=("ram-lak", "shepp-logan", "cosine", "hamming", "hann"))
    io(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("fbp", help="filtered backprojection (parallel beam)")
    p.add_argument("--filter", default="ram-lak", choices=("ram-lak", "shepp-logan", "cosine", "hamming", "hann"))
    p.add_argument("--reference", type=Path, default=None, help="ground-truth image; report the MSE")
    _add_geometry(p)
    io(p)
    p.set_defaults(func=cmd_fbp)

    p = sub.add_parser("solve", help="iterative reconstruction")
    p.add_argument("--method", choices=("landweber", "cg", "cgne"), default="cgne")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--alpha", type=float, default=None, help="Landweber step (default 0.95 * power-iteration estimate)")
    p.add_argument("--tolerance", type=float, default=1e-5, help="relative residual stop for cg/cgne")
    p.add_argument("--tikhonov", type=float, default=0.0, help="cg only: solve (A^T A + t I) x = A^T y")
    p.add_argument("--reference", type=Path, default=None, help="ground-truth image; report the MSE")
    _add_geometry(p)
    io(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("shearlet", help="alpha-shearlet diagnostics (count, round trip, energy)")
    p.add_argument("--scales", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--size", type=int, default=512, help="phantom size when no --in is given")
    p.add_argument("--precision", choices=("single", "double"), default="single")
    p.add_argument("--in", dest="input", type=Path, default=None, help="image to transform (default: phantom)")
    p.add_argument("-o", "--output", type=Path, default=None, help="write coefficients here")
    p.set_defaults(func=cmd_shearlet)

    p = sub.add_parser("admm", help="l1-shearlet ADMM reconstruction of limited-angle data")
    p.add_argument("--angles-range", type=float, default=100.0, help="centred angular range in degrees (default 100)")
    p.add_argument("--n-angles", type=int, default=None, help="number of angles (default: sinogram rows)")
    p.add_argument("--size", type=int, default=None, help="image size (default: from the sidecar)")
    p.add_argument("--scales", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--p0", type=float, default=0.02)
    p.add_argument("--p1", type=float, default=0.1)
    p.add_argument("--outer", type=int, default=50, help="outer iterations (default 50)")
    p.add_argument("--inner", type=int, default=50, help="CG iterations per outer step (default 50)")
    p.add_argument("--reference", type=Path, default=None, help="ground-truth image; report ADMM and FBP MSE")
    io(p)
    p.set_defaults(func=cmd_admm)

    p = sub.add_parser("check-adjoint", help="dot-product test of operator pairs")
    p.add_argument("--operator", choices=("parallel", "fanbeam", "shearlet", "all"), default="all")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--angles", type=int, default=None, help="projection angles (default 90)")
    p.add_argument("--scales", type=int, default=3, help="shearlet scales (default 3)")
    p.add_argument("--trials", type=int, default=10)
    p.set_defaults(func=cmd_check_adjoint)

    p = sub.add_parser("bench", help="forward/backprojection throughput")
    p.add_argument("--geometry", choices=("parallel", "fanbeam"), default="parallel")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--batch", type=int, default=32, help="batch size, timed alongside batch 1 (default 32)")
    p.add_argument("--precision", choices=("half", "single", "double", "all"), default="all")
    p.add_argument("--repeats", type=int, default=5, help="timed runs per cell, median reported (>= 5)")
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--angles", type=int, default=None, help="projection angles (default: size)")
    p.add_argument("--det-count", type=int, default=None)
    p.add_argument("-o", "--output", type=Path, default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("png-export", help="16-bit grayscale PNG")
    p.add_argument("--lo", type=float, default=0.0, help="value mapped to black")
    p.add_argument("--hi", type=float, default=1.0, help="value mapped to white")
    p.add_argument("--index", type=int, default=0, help="batch element to render")
    io(p)
    p.set_defaults(func=cmd_png_export)
    return parser


def run(argv=None):
    """Parse ``argv`` and execute one subcommand; returns the exit code."""
    from .solvers import DivergenceError, NotSPDError
    from .tensor import HalfOverflowError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return exc.code or EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.threads is not None:
            from .projector import set_threads

            set_threads(args.threads)
        args.func(args)
    except (DivergenceError, NotSPDError, HalfOverflowError, FloatingPointError) as exc:
        print(f"radonkit {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, ArrayFormatError, OSError, KeyError) as exc:
        print(f"radonkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(run())
