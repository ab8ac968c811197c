"""Iterative solvers: Landweber, conjugate gradient and CGNE.

Every solver is batched over the leading axis. Scalars such as step lengths
and residual norms are kept per batch element, and inner products are summed
sequentially in double precision, so a batched solve reproduces independent
solves bit for bit.
"""
import logging

import numpy as np
from numba import njit

logger = logging.getLogger(__name__)


class DivergenceError(ArithmeticError):
    pass


class NotSPDError(ArithmeticError):
    pass


@njit(cache=True)
def _batch_dot(a, b):
    out = np.zeros(a.shape[0])
    for i in range(a.shape[0]):
        acc = 0.0
        for j in range(a.shape[1]):
            acc += np.float64(a[i, j]) * np.float64(b[i, j])
        out[i] = acc
    return out


def batch_dot(a, b):
    """Per-batch-element inner products, as a float64 vector."""
    a = np.ascontiguousarray(a)
    b = np.ascontiguousarray(b)
    return _batch_dot(a.reshape(a.shape[0], -1), b.reshape(b.shape[0], -1))


def _per_element(v, ndim):
    return v.reshape((-1,) + (1,) * (ndim - 1))


def _check_finite(x, what, iteration):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"{what}: non-finite values in iterate at iteration {iteration}")


def estimate_alpha(op, n_iters=50, seed=0):
    """Power iteration on ``A^T A``; returns ``2 / sigma_max^2``.

    Scaling the result by a factor below one (e.g. 0.95) gives a convergent
    Landweber step.
    """
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.uniform(size=(1,) + tuple(op.domain_shape))
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(n_iters):
        w = op.adjoint(op.apply(v)).astype(np.float64)
        sigma2 = float(np.linalg.norm(w))
        if sigma2 == 0:
            raise ValueError(f"{op.name} maps the power-iteration vector to zero")
        v = w / sigma2
    logger.info("power iteration: sigma_max^2 ~ %g after %d iterations", sigma2, n_iters)
    return 2.0 / sigma2


def landweber(op, y, guess, alpha, iterations, callback=None):
    """``x <- x - alpha * A^T (A x - y)`` repeated ``iterations`` times from ``guess``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    x = np.array(guess, copy=True)
    for it in range(iterations):
        with np.errstate(over="ignore", invalid="ignore"):
            x -= alpha * op.adjoint(op.apply(x) - y)
        _check_finite(x, "landweber", it)
        if callback is not None:
            callback(it, x)
    return x


def cg(apply_spd, guess, b, max_iter=500, tolerance=1e-5, callback=None):
    """Conjugate gradient for ``apply_spd(x) = b``, one independent solve per batch element.

    An element stops updating once its residual norm drops to
    ``tolerance * ||b||``; the loop ends when all elements have stopped or after
    ``max_iter`` iterations.
    """
    x = np.array(guess, copy=True)
    b = np.asarray(b)
    nd = x.ndim
    r = b - apply_spd(x)
    _check_finite(r, "cg residual", 0)
    p = r.copy()
    rs = batch_dot(r, r)
    target = tolerance * np.sqrt(batch_dot(b, b))
    active = np.sqrt(rs) > target
    for it in range(max_iter):
        if not active.any():
            break
        ap = apply_spd(p)
        pap = batch_dot(p, ap)
        # NaN is left to the finiteness check so it reports as divergence
        bad = active & (pap <= 0)
        if bad.any():
            raise NotSPDError(f"cg: p.Ap = {pap[bad][0]:.3e} <= 0 at iteration {it} (operator not SPD)")
        alpha = np.divide(rs, pap, out=np.zeros_like(rs), where=active)
        x += _per_element(alpha, nd) * p
        r -= _per_element(alpha, nd) * ap
        _check_finite(x, "cg", it)
        rs_new = batch_dot(r, r)
        beta = np.divide(rs_new, rs, out=np.zeros_like(rs), where=active)
        p = r + _per_element(beta, nd) * p
        rs = np.where(active, rs_new, rs)
        active &= np.sqrt(rs) > target
        if callback is not None:
            callback(it, x)
    return x


def cgne(op, guess, y, max_iter=500, tolerance=1e-5, callback=None):
    """CG on the normal equations ``A^T A x = A^T y``."""
    return cg(lambda z: op.adjoint(op.apply(z)), guess, op.adjoint(y), max_iter, tolerance, callback)
