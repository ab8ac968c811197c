"""NPY v1.0 array files restricted to little-endian, C-ordered f16/f32/f64 data.

Header encoding and decoding use :mod:`numpy.lib.format`; this module adds
the stricter validation (dtype whitelist, layout, non-empty shape, payload
length) and atomic writes.
"""
import os
import tempfile
from pathlib import Path

import numpy as np
from numpy.lib import format as npformat

ALLOWED_DTYPES = (np.dtype("<f2"), np.dtype("<f4"), np.dtype("<f8"))
MAGIC = npformat.MAGIC_PREFIX


class ArrayFormatError(ValueError):
    """Malformed or unsupported array file; ``offset`` is the byte position of the problem."""

    def __init__(self, path, offset, message):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = str(path)
        self.offset = offset


def _validate(arr):
    arr = np.asarray(arr)
    if arr.dtype.newbyteorder("<") not in ALLOWED_DTYPES:
        raise ValueError(f"unsupported dtype {arr.dtype}; expected float16, float32 or float64")
    if arr.ndim == 0 or arr.size == 0:
        raise ValueError(f"refusing to store a 0-d or empty array (shape {arr.shape})")
    return np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))


def atomic_write(path, write_fn, mode="wb"):
    """Write through a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            write_fn(fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_array(path, arr):
    """Store ``arr`` as an NPY v1.0 file (atomically)."""
    arr = _validate(arr)
    header = {"descr": npformat.dtype_to_descr(arr.dtype), "fortran_order": False, "shape": arr.shape}

    def emit(fh):
        npformat.write_array_header_1_0(fh, header)
        fh.write(arr.tobytes(order="C"))

    atomic_write(path, emit)


def read_array(path):
    """Load an array written by :func:`write_array` (or any conforming NPY v1.0 file).

    Raises
    ------
    ArrayFormatError
        Bad magic, unsupported version, layout or dtype, empty shape, or a
        truncated/oversized payload.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        prefix = fh.read(len(MAGIC) + 2)
        if len(prefix) < len(MAGIC) + 2 or not prefix.startswith(MAGIC):
            raise ArrayFormatError(path, 0, "not an NPY file (bad magic string)")
        major, minor = prefix[-2], prefix[-1]
        if (major, minor) != (1, 0):
            raise ArrayFormatError(path, len(MAGIC), f"unsupported NPY version {major}.{minor}; only 1.0 is accepted")
        try:
            shape, fortran_order, dtype = npformat.read_array_header_1_0(fh)
        except ValueError as exc:
            raise ArrayFormatError(path, len(MAGIC) + 2, f"malformed header: {exc}") from None
        data_offset = fh.tell()
        if fortran_order:
            raise ArrayFormatError(path, data_offset, "Fortran-ordered layout is not supported")
        if dtype not in ALLOWED_DTYPES:
            raise ArrayFormatError(path, data_offset, f"unsupported dtype {dtype}; expected little-endian f2, f4 or f8")
        count = int(np.prod(shape)) if shape else 1
        if len(shape) == 0 or count == 0:
            raise ArrayFormatError(path, data_offset, f"0-d or empty shape {shape} is not allowed")
        expected = count * dtype.itemsize
        payload = fh.read(expected + 1)
    if len(payload) != expected:
        what = "truncated" if len(payload) < expected else "oversized"
        raise ArrayFormatError(
            path, data_offset + min(len(payload), expected),
            f"{what} payload: expected {expected} bytes after the header, found {'more' if what == 'oversized' else len(payload)}",
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="), copy=True)
