"""Real-valued, cone-adapted alpha-shearlet transform with Fourier-side multipliers.

Construction on the discrete frequency grid ``(fy, fx)`` (integer bins):

* Radial bands come from the Meyer low-pass profile ``phi``: the low-pass
  window is ``phi(|fx|/a) * phi(|fy|/a)`` and band ``j`` is
  ``sqrt(phi(r / (a 2^(j+1)))^2 - phi(r / (a 2^j))^2)`` with
  ``a = min(height, width) / 2^(n_scales + 1)``, so the squared bands telescope
  to one up to the Nyquist frequency.
* Directions: on the horizontal cone (radius ``|fx|``, slope ``fy/fx``) and the
  vertical cone (radius ``|fy|``, slope ``fx/fy``), scale ``j`` with exponent
  ``alpha_j`` uses the bumps ``v(2^(j(1-alpha_j)) * slope - k)`` for
  ``|k| <= ceil(2^(j(1-alpha_j)))``. The squared bumps sum to one over ``k``.
* Every window is symmetrized under ``f -> -f`` (which makes the shearlets
  real) and the whole system is divided by ``sqrt(sum of squared windows)``,
  giving a Parseval frame: ``backward(forward(x)) == x``.

Coefficients are not subsampled: each one is a full ``height x width`` image.
"""
import hashlib
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linop import LinearOperator
from .tensor import precision_of

logger = logging.getLogger(__name__)

PLAN_VERSION = 1
CACHE_ENV = "RADONKIT_CACHE_DIR"


def meyer_nu(x):
    """Smooth step: 0 for x <= 0, 1 for x >= 1, and nu(x) + nu(1 - x) = 1."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 4 * (35 - 84 * x + 70 * x ** 2 - 20 * x ** 3)


def lowpass_profile(r):
    """1 on [0, 1], Meyer roll-off on (1, 2), 0 beyond."""
    return np.cos(0.5 * np.pi * meyer_nu(np.abs(r) - 1.0))


def direction_bump(u):
    """Bump supported on [-1, 1] whose integer translates have squares summing to one."""
    u = np.abs(u)
    return np.where(u < 1.0, np.cos(0.5 * np.pi * meyer_nu(u)), 0.0)


def shears_per_cone(j, alpha):
    return 2 * math.ceil(2 ** (j * (1 - alpha))) + 1


def coefficient_count(alphas):
    """Number of coefficients: one low-pass plus two cones of shears per scale."""
    return 1 + sum(2 * shears_per_cone(j, a) for j, a in enumerate(alphas))


def _indices(alphas):
    idx = [(-1, 0, "low")]
    for j, alpha in enumerate(alphas):
        k_max = math.ceil(2 ** (j * (1 - alpha)))
        for cone in ("h", "v"):
            for k in range(-k_max, k_max + 1):
                idx.append((j, k, cone))
    return idx


def _div0(a, b):
    out = np.zeros(np.broadcast(a, b).shape)
    np.divide(a, b, out=out, where=b != 0)
    return out


def _mirror(m):
    """m(-f) on the FFT grid."""
    return np.roll(m[::-1, ::-1], 1, axis=(0, 1))


@dataclass(frozen=True, eq=False)
class ShearletPlan:
    height: int
    width: int
    alphas: tuple
    multipliers: np.ndarray  # (n_coeff, height, width), unshifted FFT layout
    scales: np.ndarray
    indices: tuple

    @property
    def n_coeff(self):
        return self.multipliers.shape[0]

    @property
    def image_shape(self):
        return (self.height, self.width)

    @property
    def coeff_shape(self):
        return (self.n_coeff, self.height, self.width)

    def half_multipliers(self, dtype):
        """Multipliers restricted to the non-negative ``fx`` half used by real FFTs."""
        key = np.dtype(dtype)
        cache = self.__dict__.setdefault("_half", {})
        if key not in cache:
            cache[key] = np.ascontiguousarray(self.multipliers[..., : self.width // 2 + 1], dtype=key)
        return cache[key]

    def directions_per_scale(self):
        counts = [0] * len(self.alphas)
        for j, _, _ in self.indices[1:]:
            counts[j] += 1
        return counts

    def forward(self, x):
        return forward(self, x)

    def backward(self, c):
        return backward(self, c)

    def operator(self):
        return LinearOperator(self.forward, self.backward, self.image_shape, self.coeff_shape, "shearlet")


def _build_multipliers(height, width, alphas):
    n_scales = len(alphas)
    a = min(height, width) / 2 ** (n_scales + 1)
    fy = (np.fft.fftfreq(height) * height)[:, None]
    fx = (np.fft.fftfreq(width) * width)[None, :]
    ax, ay = np.abs(fx), np.abs(fy)
    slope_h = _div0(fy, fx)
    slope_v = _div0(fx, fy)

    def band(r, j):
        outer = lowpass_profile(r / (a * 2 ** (j + 1))) ** 2
        inner = lowpass_profile(r / (a * 2 ** j)) ** 2
        return np.sqrt(np.maximum(outer - inner, 0.0))

    indices = _indices(alphas)
    out = np.empty((len(indices), height, width))
    out[0] = lowpass_profile(ax / a) * lowpass_profile(ay / a)
    bands = {}
    for n, (j, k, cone) in enumerate(indices[1:], start=1):
        if (j, cone) not in bands:
            bands[j, cone] = band(ax, j) if cone == "h" else band(ay, j)
        dilation = 2 ** (j * (1 - alphas[j]))
        slope = slope_h if cone == "h" else slope_v
        out[n] = bands[j, cone] * direction_bump(dilation * slope - k)
    for n in range(out.shape[0]):
        out[n] = 0.5 * (out[n] + _mirror(out[n]))
    total = np.sqrt(np.sum(out ** 2, axis=0))
    if total.min() <= 0:
        raise ValueError("shearlet windows leave frequencies uncovered; use fewer scales")
    out /= total
    return out, indices


def _cache_path(cache_dir, height, width, alphas):
    key = f"{height}x{width}:{','.join(f'{a:.6f}' for a in alphas)}:v{PLAN_VERSION}"
    digest = hashlib.sha1(key.encode()).hexdigest()[:16]
    return Path(cache_dir) / f"shearlet_{height}x{width}_{digest}.npy"


def make_plan(height, width, alphas, cache_dir=None):
    """Precompute the Parseval alpha-shearlet system for ``height x width`` images.

    ``alphas`` holds one anisotropy exponent per scale (0.5: shearlets, 1:
    wavelet-like). If ``cache_dir`` (or the ``RADONKIT_CACHE_DIR`` environment
    variable) is set, multipliers are loaded from / stored to an ``.npy`` file
    there.
    """
    alphas = tuple(float(a) for a in alphas)
    if height != width:
        raise ValueError(f"only square images are supported, got {height}x{width}")
    if not 1 <= len(alphas) <= 8:
        raise ValueError(f"between 1 and 8 scales are supported, got {len(alphas)}")
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ValueError(f"alphas must lie in [0, 1], got {alphas}")
    if 2 ** (len(alphas) + 1) > min(height, width):
        raise ValueError(f"{len(alphas)} scales need images of at least {2 ** (len(alphas) + 1)} pixels")

    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    path = _cache_path(cache_dir, height, width, alphas) if cache_dir else None
    indices = _indices(alphas)
    mult = None
    if path is not None and path.exists():
        from .npyio import read_array  # noqa: avoid import cycle at module load

        mult = read_array(path)
        if mult.shape != (len(indices), height, width) or mult.dtype != np.float64:
            logger.warning("ignoring stale shearlet cache %s", path)
            mult = None
        else:
            logger.info("loaded shearlet plan from %s", path)
    if mult is None:
        mult, indices = _build_multipliers(height, width, alphas)
        if path is not None:
            from .npyio import write_array

            path.parent.mkdir(parents=True, exist_ok=True)
            write_array(path, mult)
    mult.setflags(write=False)
    scales = np.array([0.0] + [j + 1.0 for j, _, _ in indices[1:]])
    scales.setflags(write=False)
    return ShearletPlan(int(height), int(width), alphas, mult, scales, tuple(indices))


def _work_dtype(arr):
    precision_of(arr)
    return np.float64 if arr.dtype == np.float64 else np.float32


def forward(plan, x):
    """Analysis: coefficients of shape ``(batch, n_coeff, height, width)``."""
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[1:] != plan.image_shape:
        raise ValueError(f"expected images of shape (batch, {plan.height}, {plan.width}), got {x.shape}")
    work = _work_dtype(x)
    mult = plan.half_multipliers(work)
    out = np.empty((x.shape[0],) + plan.coeff_shape, dtype=work)
    # one image at a time keeps every FFT call identical whatever the batch size
    for b in range(x.shape[0]):
        spec = np.fft.rfft2(x[b].astype(work))
        out[b] = np.fft.irfft2(spec[None] * mult, s=plan.image_shape)
    return out.astype(x.dtype, copy=False)


def backward(plan, c):
    """Synthesis (adjoint of :func:`forward`); the inverse for a Parseval frame."""
    c = np.asarray(c)
    if c.ndim != 4 or c.shape[1:] != plan.coeff_shape:
        raise ValueError(f"expected coefficients of shape (batch,) + {plan.coeff_shape}, got {c.shape}")
    work = _work_dtype(c)
    mult = plan.half_multipliers(work)
    out = np.empty((c.shape[0],) + plan.image_shape, dtype=work)
    for b in range(c.shape[0]):
        spec = np.fft.rfft2(c[b].astype(work))
        spec *= mult
        out[b] = np.fft.irfft2(spec.sum(axis=0), s=plan.image_shape)
    return out.astype(c.dtype, copy=False)
