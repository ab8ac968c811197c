"""l1-shearlet regularized reconstruction with positivity, solved by ADMM.

Minimizes ``sum |w * SH(f)| + 0.5 ||A f - y||^2`` subject to ``f >= 0`` using
the splitting ``z1 = SH(f)``, ``z2 = f``. Each outer iteration solves
``(p0 A^T A + (1 + p1) I) f = p0 A^T y + p1 SH^T(z1 - u1) + (z2 - u2)`` by a
warm-started conjugate gradient, then updates the split variables by
soft-thresholding and clamping, and the scaled duals by the split residuals.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .solvers import DivergenceError, batch_dot, cg

logger = logging.getLogger(__name__)


def default_weights(scales):
    """Per-coefficient weights ``3^scale / 400``; finer scales are penalized more."""
    return 3.0 ** np.asarray(scales, dtype=np.float64) / 400.0


@dataclass(frozen=True)
class AdmmParams:
    p0: float = 0.02
    p1: float = 0.1
    weights: np.ndarray = None  # per coefficient; None means default_weights(plan.scales)
    outer_iterations: int = 50
    inner_cg_iterations: int = 50
    cg_tolerance: float = 1e-5

    def __post_init__(self):
        if not (self.p0 > 0 and self.p1 > 0):
            raise ValueError(f"p0 and p1 must be positive, got {self.p0}, {self.p1}")
        if self.outer_iterations < 0 or self.inner_cg_iterations < 1:
            raise ValueError("need outer_iterations >= 0 and inner_cg_iterations >= 1")
        if self.weights is not None and np.any(np.asarray(self.weights) < 0):
            raise ValueError("weights must be non-negative")

    def resolve_weights(self, plan):
        w = default_weights(plan.scales) if self.weights is None else np.asarray(self.weights, dtype=np.float64)
        if w.shape != (plan.n_coeff,):
            raise ValueError(f"expected {plan.n_coeff} weights, got shape {w.shape}")
        return w


@dataclass
class AdmmState:
    f: np.ndarray
    z1: np.ndarray
    u1: np.ndarray
    z2: np.ndarray
    u2: np.ndarray
    iteration: int = 0
    objective: list = field(default_factory=list)


def shrink(a, b):
    """Soft thresholding ``sign(a) * max(|a| - b, 0)``."""
    b = np.asarray(b)
    if np.any(b < 0):
        raise ValueError("shrink threshold must be non-negative")
    a = np.asarray(a)
    return (np.maximum(np.abs(a) - b, 0) * np.sign(a)).astype(a.dtype, copy=False)


def _coeff_weights(w, dtype):
    return np.asarray(w, dtype=dtype).reshape(1, -1, 1, 1)


def admm_objective(radon_op, plan, f, y, w):
    """Per-batch-element ``sum |w * SH(f)| + 0.5 ||A f - y||^2`` in double precision."""
    f = np.asarray(f)
    y = np.asarray(y)
    if f.shape[1:] != tuple(radon_op.domain_shape) or y.shape[1:] != tuple(radon_op.range_shape):
        raise ValueError(f"shape mismatch: f {f.shape}, y {y.shape} for {radon_op.name}")
    if f.shape[0] != y.shape[0]:
        raise ValueError(f"batch mismatch: f has {f.shape[0]}, y has {y.shape[0]}")
    coeff = plan.forward(f).astype(np.float64)
    reg = np.abs(_coeff_weights(w, np.float64) * coeff).reshape(f.shape[0], -1).sum(axis=1)
    res = radon_op.apply(f).astype(np.float64) - y
    return reg + 0.5 * batch_dot(res, res)


def admm_reconstruct(radon_op, plan, y, params=None, callback=None, track_objective=False):
    """Reconstruct a batch of (typically limited-angle) sinograms.

    Parameters
    ----------
    radon_op : LinearOperator
        Projector with backprojection as adjoint.
    plan : ShearletPlan
        Shearlet system matching the image size.
    y : ndarray, shape (batch, n_angles, det_count)
    params : AdmmParams, optional
    callback : callable, optional
        Called as ``callback(state)`` after every outer iteration.
    track_objective : bool
        Append :func:`admm_objective` of each iterate to ``state.objective``.

    Returns
    -------
    ndarray
        Reconstruction ``f`` of shape ``(batch, height, width)``.
    """
    params = params or AdmmParams()
    y = np.asarray(y)
    if y.ndim != 3 or y.shape[1:] != tuple(radon_op.range_shape):
        raise ValueError(f"expected sinograms of shape (batch,) + {tuple(radon_op.range_shape)}, got {y.shape}")
    if tuple(radon_op.domain_shape) != plan.image_shape:
        raise ValueError(f"shearlet plan is {plan.image_shape}, projector images are {radon_op.domain_shape}")
    p0, p1 = params.p0, params.p1
    w = params.resolve_weights(plan)
    threshold = _coeff_weights(p0 / p1 * w, y.dtype)

    bp = radon_op.adjoint(y)
    dt = bp.dtype
    zeros_c = np.zeros((y.shape[0],) + plan.coeff_shape, dtype=dt)
    state = AdmmState(np.zeros_like(bp), zeros_c, zeros_c.copy(), np.zeros_like(bp), np.zeros_like(bp))

    def normal_op(x):
        return (p0 * radon_op.adjoint(radon_op.apply(x)) + (1 + p1) * x).astype(dt, copy=False)

    for it in range(params.outer_iterations):
        cg_y = (p0 * bp + p1 * plan.backward(state.z1 - state.u1) + (state.z2 - state.u2)).astype(dt, copy=False)
        # warm start from the previous iterate
        state.f = cg(normal_op, state.f, cg_y, max_iter=params.inner_cg_iterations, tolerance=params.cg_tolerance)
        sh_f = plan.forward(state.f)
        state.z1 = shrink(sh_f + state.u1, threshold)
        state.z2 = np.maximum(state.f + state.u2, 0)
        state.u1 += sh_f - state.z1
        state.u2 += state.f - state.z2
        if not (np.all(np.isfinite(state.f)) and np.all(np.isfinite(state.u1)) and np.all(np.isfinite(state.u2))):
            raise DivergenceError(f"admm: non-finite values in state at outer iteration {it}")
        state.iteration = it + 1
        if track_objective:
            state.objective.append(admm_objective(radon_op, plan, state.f, y, w))
        if callback is not None:
            callback(state)
    logger.info("admm: %d outer iterations", params.outer_iterations)
    if track_objective:
        return state.f, state
    return state.f
