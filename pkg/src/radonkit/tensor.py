"""Precision modes and error metrics.

Images are ``(batch, height, width)`` arrays and sinograms are
``(batch, n_angles, det_count)`` arrays. The batch axis is always present; a
single image is a batch of one. The storage precision is carried by the dtype:

=========  =========
precision  dtype
=========  =========
half       float16
single     float32
double     float64
=========  =========

Half-storage arrays are widened to single precision before any arithmetic and
results are narrowed back only when stored.
"""
import numpy as np

PRECISIONS = {
    "half": np.dtype(np.float16),
    "single": np.dtype(np.float32),
    "double": np.dtype(np.float64),
}

_HALF_MAX = float(np.finfo(np.float16).max)


class PrecisionError(ValueError):
    pass


class HalfOverflowError(OverflowError):
    pass


def precision_of(x):
    """Name of the storage precision of ``x`` ('half', 'single' or 'double')."""
    dt = np.asarray(x).dtype
    for name, d in PRECISIONS.items():
        if d == dt:
            return name
    raise PrecisionError(f"unsupported dtype {dt}; expected one of float16, float32, float64")


def as_precision(x, precision):
    """Convert ``x`` to the named storage precision.

    Conversion to 'half' goes through :func:`to_half_storage` so that overflow
    is reported instead of silently producing infinities.
    """
    if precision not in PRECISIONS:
        raise PrecisionError(f"unknown precision {precision!r}; valid: {sorted(PRECISIONS)}")
    if precision == "half":
        return to_half_storage(x)
    return np.asarray(x, dtype=PRECISIONS[precision])


def compute_dtype(x):
    """Arithmetic dtype for an array stored as ``x``: single for half/single, double for double."""
    return np.float64 if np.asarray(x).dtype == np.float64 else np.float32


def widen(x):
    """Widen half-storage arrays to single precision; other precisions pass through."""
    x = np.asarray(x)
    if x.dtype == np.float16:
        return x.astype(np.float32)
    precision_of(x)
    return x


def to_half_storage(x):
    """Round every element to the nearest 16-bit float (ties to even).

    Raises
    ------
    HalfOverflowError
        If an element's magnitude exceeds the largest finite half value.
    """
    x = np.asarray(x)
    if x.dtype == np.float16:
        return x.copy()
    if x.dtype not in (np.float32, np.float64):
        raise PrecisionError(f"to_half_storage expects single or double input, got {x.dtype}")
    too_big = ~(np.abs(x) <= _HALF_MAX)
    if too_big.any():
        idx = tuple(int(i) for i in np.argwhere(too_big)[0])
        raise HalfOverflowError(
            f"value {x[idx]!r} at index {idx} exceeds the half-precision maximum {_HALF_MAX}"
        )
    # numpy's float16 cast is IEEE round-to-nearest-even
    return x.astype(np.float16)


def _check_shapes(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def relative_error(a, b):
    """||a - b|| / ||b|| over the flattened arrays, in double precision."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    nb = np.linalg.norm(b.ravel())
    if nb == 0:
        raise ZeroDivisionError("relative_error: reference array has zero norm")
    return float(np.linalg.norm((a - b).ravel()) / nb)


def mse(a, b):
    """Mean squared difference in double precision."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    return float(np.mean((a - b) ** 2))
