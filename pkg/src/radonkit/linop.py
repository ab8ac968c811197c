"""Linear operators paired with their adjoints, and numerical checks.

All operators in this package are linear, so the vector-Jacobian product of
``apply`` is ``adjoint`` and vice versa. Both callables take batched arrays
of shape ``(batch,) + domain_shape`` (resp. ``range_shape``).
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import projector


class AdjointCheckError(ValueError):
    pass


@dataclass(frozen=True)
class LinearOperator:
    apply: Callable
    adjoint: Callable
    domain_shape: tuple
    range_shape: tuple
    name: str = "op"

    def __call__(self, x):
        return self.apply(x)

    @property
    def T(self):
        return LinearOperator(self.adjoint, self.apply, self.range_shape, self.domain_shape, f"{self.name}^T")

    def vjp(self, cotangent):
        """Gradient of ``<apply(x), cotangent>`` with respect to ``x``."""
        return self.adjoint(cotangent)

    def __matmul__(self, other):
        return compose(self, other)


def compose(a, b):
    """``a`` after ``b``; the adjoint is ``b.adjoint`` after ``a.adjoint``."""
    if tuple(b.range_shape) != tuple(a.domain_shape):
        raise ValueError(f"cannot compose {a.name} (domain {a.domain_shape}) with {b.name} (range {b.range_shape})")
    return LinearOperator(
        lambda x: a.apply(b.apply(x)),
        lambda y: b.adjoint(a.adjoint(y)),
        tuple(b.domain_shape),
        tuple(a.range_shape),
        f"{a.name}*{b.name}",
    )


def identity(shape):
    shape = tuple(shape)
    return LinearOperator(lambda x: np.array(x), lambda y: np.array(y), shape, shape, "identity")


def diagonal(d):
    d = np.asarray(d)
    return LinearOperator(lambda x: d * x, lambda y: d * y, d.shape, d.shape, "diagonal")


def from_matrix(mat, domain_shape, range_shape):
    """Operator backed by a dense matrix acting on flattened batch elements."""
    domain_shape, range_shape = tuple(domain_shape), tuple(range_shape)
    if mat.shape != (int(np.prod(range_shape)), int(np.prod(domain_shape))):
        raise ValueError(f"matrix shape {mat.shape} does not match {range_shape} x {domain_shape}")

    def apply(x):
        return (x.reshape(x.shape[0], -1) @ mat.T).reshape((x.shape[0],) + range_shape)

    def adjoint(y):
        return (y.reshape(y.shape[0], -1) @ mat).reshape((y.shape[0],) + domain_shape)

    return LinearOperator(apply, adjoint, domain_shape, range_shape, "matrix")


def radon(geom, step=1.0):
    """Projector of ``geom`` with backprojection as its adjoint."""
    return LinearOperator(
        lambda x: projector.forward(geom, x, step=step),
        lambda y: projector.backprojection(geom, y),
        geom.image_shape,
        geom.sinogram_shape,
        type(geom).__name__,
    )


def _checked(op, fn, arr, shape, what):
    out = fn(arr)
    if out.shape != (arr.shape[0],) + tuple(shape):
        raise AdjointCheckError(f"{op.name}.{what} returned shape {out.shape}, expected {(arr.shape[0],) + tuple(shape)}")
    return out


def adjoint_check(op, trials=10, seed=0):
    """Worst dot-product defect ``|<Ax,y> - <x,A^T y>| / (||Ax|| ||y||)`` over random Gaussian pairs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal((1,) + tuple(op.domain_shape))
        y = rng.standard_normal((1,) + tuple(op.range_shape))
        ax = _checked(op, op.apply, x, op.range_shape, "apply").astype(np.float64)
        aty = _checked(op, op.adjoint, y, op.domain_shape, "adjoint").astype(np.float64)
        lhs = np.vdot(ax.ravel(), y.ravel())
        rhs = np.vdot(x.ravel(), aty.ravel())
        defect = abs(lhs - rhs) / (np.linalg.norm(ax) * np.linalg.norm(y) + 1e-30)
        worst = max(worst, float(defect))
    return worst


def gradient_check(op, x=None, step=1e-3, n_coords=32, seed=0):
    """Compare ``adjoint(apply(x) - y0)`` with central differences of ``0.5 ||apply(x) - y0||^2``.

    The finite differences are taken on ``n_coords`` randomly chosen
    coordinates. Returns the largest absolute deviation divided by the norm of
    the analytic gradient.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    rng = np.random.default_rng(seed)
    shape = (1,) + tuple(op.domain_shape)
    if x is None:
        x = rng.standard_normal(shape)
    x = np.asarray(x, dtype=np.float64).reshape(shape)
    y0 = rng.standard_normal((1,) + tuple(op.range_shape))
    grad = op.adjoint(op.apply(x) - y0).astype(np.float64)
    gnorm = np.linalg.norm(grad)
    if gnorm == 0:
        raise ValueError("gradient vanishes at the chosen point; pick another loss point")
    n = x.size
    coords = rng.choice(n, size=min(n_coords, n), replace=False)
    probes = np.repeat(x, 2 * coords.size, axis=0).reshape(2 * coords.size, -1)
    probes[2 * np.arange(coords.size), coords] += step
    probes[2 * np.arange(coords.size) + 1, coords] -= step
    res = op.apply(probes.reshape((-1,) + tuple(op.domain_shape))).astype(np.float64) - y0
    loss = 0.5 * np.sum(res.reshape(res.shape[0], -1) ** 2, axis=1)
    fd = (loss[0::2] - loss[1::2]) / (2 * step)
    return float(np.max(np.abs(grad.ravel()[coords] - fd)) / gnorm)
