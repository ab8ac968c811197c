"""Ray-driven forward projection and pixel-driven backprojection.

Both geometries share one line-integral routine: the ray is clipped to the
image square, split into ``ceil(length / step)`` equal segments and the
bilinearly interpolated image is sampled at each segment midpoint (samples
outside the image read as zero). Backprojection maps every pixel centre to a
fractional detector coordinate, interpolates linearly between the two
neighbouring cells and sums over angles. The pair is adjoint only
approximately; :func:`materialize_matrix` gives the exact matrix of
:func:`forward` for small problems.

Every output element is produced by a single sequential loop accumulated in
double precision and rounded once to the storage precision, so results do not
depend on batch composition or on the number of worker threads.
"""
import math

import numba
import numpy as np
from numba import njit, prange

from .geometry import FanbeamGeometry, ParallelGeometry
from .tensor import precision_of

# the TBB layer shipped here is too old; omp is thread-safe for concurrent callers
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

MAX_MATERIALIZE_SIZE = 64


@njit(cache=True, fastmath=True)
def _line_integral(img, ox, oy, dx, dy, half, step):
    # img is zero-padded by one pixel on every side
    lo = -1e300
    hi = 1e300
    if abs(dx) > 1e-12:
        u1 = (-half - ox) / dx
        u2 = (half - ox) / dx
        lo = max(lo, min(u1, u2))
        hi = min(hi, max(u1, u2))
    elif abs(ox) > half:
        return 0.0
    if abs(dy) > 1e-12:
        u1 = (-half - oy) / dy
        u2 = (half - oy) / dy
        lo = max(lo, min(u1, u2))
        hi = min(hi, max(u1, u2))
    elif abs(oy) > half:
        return 0.0
    length = hi - lo
    if length <= 0.0:
        return 0.0
    n_steps = max(1, int(math.ceil(length / step - 1e-9)))
    h = length / n_steps
    last = img.shape[0] - 2
    # padded pixel coordinates: column = x + half + 0.5, row = half - y + 0.5
    col0 = ox + lo * dx + half + 0.5
    row0 = half + 0.5 - (oy + lo * dy)
    acc = 0.0
    for m in range(n_steps):
        u = (m + 0.5) * h
        col = col0 + u * dx
        row = row0 - u * dy
        j = int(col)
        i = int(row)
        # clipping can overshoot the padded border by rounding
        j = min(max(j, 0), last)
        i = min(max(i, 0), last)
        fc = col - j
        fr = row - i
        acc += (1.0 - fr) * ((1.0 - fc) * np.float64(img[i, j]) + fc * np.float64(img[i, j + 1])) \
            + fr * ((1.0 - fc) * np.float64(img[i + 1, j]) + fc * np.float64(img[i + 1, j + 1]))
    return acc * h


@njit(cache=True, parallel=True, fastmath=True)
def _forward_parallel(img, cos_a, sin_a, det_count, det_spacing, step, out):
    n_batch = img.shape[0]
    half = 0.5 * (img.shape[1] - 2)
    n_angles = cos_a.shape[0]
    for ba in prange(n_batch * n_angles):
        b = ba // n_angles
        a = ba - b * n_angles
        c = cos_a[a]
        s = sin_a[a]
        for k in range(det_count):
            t = (k - 0.5 * det_count + 0.5) * det_spacing
            out[b, a, k] = _line_integral(img[b], t * c, t * s, -s, c, half, step)


@njit(cache=True, parallel=True, fastmath=True)
def _forward_fanbeam(img, cos_a, sin_a, source_distance, det_distance, det_count, det_spacing, step, out):
    n_batch = img.shape[0]
    half = 0.5 * (img.shape[1] - 2)
    n_angles = cos_a.shape[0]
    for ba in prange(n_batch * n_angles):
        b = ba // n_angles
        a = ba - b * n_angles
        c = cos_a[a]
        s = sin_a[a]
        # e_t = (c, s), e_d = (-s, c)
        sx = source_distance * s
        sy = -source_distance * c
        for k in range(det_count):
            t = (k - 0.5 * det_count + 0.5) * det_spacing
            ex = -det_distance * s + t * c
            ey = det_distance * c + t * s
            dx = ex - sx
            dy = ey - sy
            norm = math.sqrt(dx * dx + dy * dy)
            out[b, a, k] = _line_integral(img[b], sx, sy, dx / norm, dy / norm, half, step)


@njit(cache=True, fastmath=True, inline="always")
def _interp_det(row, kf):
    # row is zero-padded by one cell on each side; kf is the unpadded coordinate
    kp = kf + 1.0
    if kp < 0.0 or kp >= row.shape[0] - 1:
        return 0.0
    k = int(kp)
    w = kp - k
    return (1.0 - w) * np.float64(row[k]) + w * np.float64(row[k + 1])


@njit(cache=True, parallel=True, fastmath=True)
def _backproject_parallel(sino, cos_a, sin_a, det_spacing, size, out):
    n_batch, n_angles, det_count = sino.shape
    det_count -= 2
    half = 0.5 * size
    center = 0.5 * det_count - 0.5
    for bi in prange(n_batch * size):
        b = bi // size
        i = bi - b * size
        y = half - i - 0.5
        for j in range(size):
            x = j - half + 0.5
            acc = 0.0
            for a in range(n_angles):
                t = x * cos_a[a] + y * sin_a[a]
                acc += _interp_det(sino[b, a], t / det_spacing + center)
            out[b, i, j] = acc


@njit(cache=True, parallel=True, fastmath=True)
def _backproject_fanbeam(sino, cos_a, sin_a, source_distance, det_distance, det_spacing, size, out):
    n_batch, n_angles, det_count = sino.shape
    det_count -= 2
    half = 0.5 * size
    center = 0.5 * det_count - 0.5
    mag = source_distance + det_distance
    for bi in prange(n_batch * size):
        b = bi // size
        i = bi - b * size
        y = half - i - 0.5
        for j in range(size):
            x = j - half + 0.5
            acc = 0.0
            for a in range(n_angles):
                c = cos_a[a]
                s = sin_a[a]
                pt = x * c + y * s
                pd = -x * s + y * c
                t = pt * mag / (source_distance + pd)
                acc += _interp_det(sino[b, a], t / det_spacing + center)
            out[b, i, j] = acc


def set_threads(n):
    """Cap the number of worker threads used by the kernels; returns the value in effect."""
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def _kernel_input(x, axes):
    """Storage dtype of ``x`` and a zero-padded copy for the kernels (half widened to single)."""
    precision_of(x)
    work = np.float32 if x.dtype == np.float16 else x.dtype
    pad = [(0, 0)] * x.ndim
    for ax in axes:
        pad[ax] = (1, 1)
    return x.dtype, np.pad(x.astype(work, copy=False), pad)


def _trig(geom):
    return np.cos(geom.angles), np.sin(geom.angles)


def forward(geom, x, step=1.0):
    """Radon transform of a batch of images.

    Parameters
    ----------
    geom : ParallelGeometry or FanbeamGeometry
    x : ndarray, shape (batch, image_size, image_size)
    step : float
        Sampling step along each ray, in pixels.

    Returns
    -------
    ndarray, shape (batch, n_angles, det_count), same dtype as ``x``.
    """
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[1:] != geom.image_shape:
        raise ValueError(f"expected images of shape (batch, {geom.image_size}, {geom.image_size}), got {x.shape}")
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    dtype, xk = _kernel_input(x, (1, 2))
    out = np.empty((x.shape[0],) + geom.sinogram_shape, dtype=xk.dtype)
    c, s = _trig(geom)
    if isinstance(geom, ParallelGeometry):
        _forward_parallel(xk, c, s, geom.det_count, geom.det_spacing, float(step), out)
    elif isinstance(geom, FanbeamGeometry):
        _forward_fanbeam(xk, c, s, geom.source_distance, geom.det_distance,
                         geom.det_count, geom.det_spacing, float(step), out)
    else:
        raise TypeError(f"unsupported geometry {type(geom).__name__}")
    return out.astype(dtype, copy=False)


def backprojection(geom, y):
    """Pixel-driven backprojection of a batch of sinograms (no distance weighting)."""
    y = np.asarray(y)
    if y.ndim != 3 or y.shape[1:] != geom.sinogram_shape:
        raise ValueError(f"expected sinograms of shape (batch, {geom.n_angles}, {geom.det_count}), got {y.shape}")
    if y.shape[0] == 0:
        raise ValueError("empty batch")
    dtype, yk = _kernel_input(y, (2,))
    out = np.empty((y.shape[0],) + geom.image_shape, dtype=yk.dtype)
    c, s = _trig(geom)
    if isinstance(geom, ParallelGeometry):
        _backproject_parallel(yk, c, s, geom.det_spacing, geom.image_size, out)
    elif isinstance(geom, FanbeamGeometry):
        _backproject_fanbeam(yk, c, s, geom.source_distance, geom.det_distance,
                             geom.det_spacing, geom.image_size, out)
    else:
        raise TypeError(f"unsupported geometry {type(geom).__name__}")
    return out.astype(dtype, copy=False)


def materialize_matrix(geom, step=1.0, chunk=256):
    """Dense matrix of :func:`forward`: column ``j`` is the projection of unit pixel ``j``.

    Rows are ordered (angle, detector) and columns follow the row-major pixel
    order, both matching ``reshape`` of sinograms and images. Computed in double
    precision; refuses images larger than 64x64.
    """
    n = geom.image_size
    if n > MAX_MATERIALIZE_SIZE:
        raise MemoryError(f"materialize_matrix is limited to image_size <= {MAX_MATERIALIZE_SIZE}, got {n}")
    n_pix = n * n
    n_rows = geom.n_angles * geom.det_count
    mat = np.empty((n_rows, n_pix), dtype=np.float64)
    for start in range(0, n_pix, chunk):
        stop = min(start + chunk, n_pix)
        units = np.zeros((stop - start, n_pix), dtype=np.float64)
        units[np.arange(stop - start), np.arange(start, stop)] = 1.0
        cols = forward(geom, units.reshape(-1, n, n), step=step)
        mat[:, start:stop] = cols.reshape(stop - start, n_rows).T
    return mat
