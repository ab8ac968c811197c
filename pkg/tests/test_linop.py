import numpy as np
import pytest

from radonkit import angles_linspace, make_fanbeam, make_parallel
from radonkit.linop import (
    AdjointCheckError,
    LinearOperator,
    adjoint_check,
    compose,
    diagonal,
    from_matrix,
    gradient_check,
    identity,
    radon,
)
from radonkit.shearlet import make_plan


def _scaled_adjoint(op, factor):
    return LinearOperator(op.apply, lambda y: factor * op.adjoint(y), op.domain_shape, op.range_shape, "scaled")


def test_identity_exact():
    assert adjoint_check(identity((8, 8))) <= 1e-7


@pytest.mark.parametrize("seed", range(10))
def test_parallel_projector_64(seed):
    op = radon(make_parallel(64, angles_linspace(0, np.pi, 90)))
    assert adjoint_check(op, trials=10, seed=seed) <= 5e-3


def test_scaled_adjoint_on_scalars():
    # |<Ax,y> - 2<Ax,y>| / (|Ax||y|) is exactly 1 when x, y are scalars
    op = _scaled_adjoint(identity((1,)), 2.0)
    assert adjoint_check(op, trials=5) == pytest.approx(1.0)


def test_scaled_adjoint_detected():
    mat = np.random.default_rng(0).standard_normal((12, 12))
    exact = from_matrix(mat, (12,), (12,))
    good = adjoint_check(exact)
    bad = adjoint_check(_scaled_adjoint(exact, 2.0))
    assert good <= 1e-14 and bad >= 1e-3


def test_shape_inconsistency():
    op = LinearOperator(lambda x: x, lambda y: y, (4,), (5,), "broken")
    with pytest.raises(AdjointCheckError):
        adjoint_check(op)
    with pytest.raises(ValueError):
        adjoint_check(identity((3,)), trials=0)


def test_gradient_identity():
    assert gradient_check(identity((6, 6)), step=1e-3) <= 1e-5


def test_gradient_projector_32():
    assert gradient_check(radon(make_parallel(32, angles_linspace(0, np.pi, 48)))) <= 1e-2


def test_gradient_shearlet_64():
    assert gradient_check(make_plan(64, 64, [0.5] * 3).operator()) <= 1e-4


def test_gradient_degenerate_point():
    zero = LinearOperator(lambda x: 0 * x, lambda y: 0 * y, (3,), (3,), "zero")
    with pytest.raises(ValueError):
        gradient_check(zero)
    with pytest.raises(ValueError):
        gradient_check(identity((3,)), step=0)


def test_composition_adjoint():
    a = from_matrix(np.random.default_rng(1).standard_normal((5, 4)), (4,), (5,))
    b = from_matrix(np.random.default_rng(2).standard_normal((4, 3)), (3,), (4,))
    ab = a @ b
    x = np.random.default_rng(3).standard_normal((1, 5))
    assert np.allclose(ab.adjoint(x), b.adjoint(a.adjoint(x)))
    assert adjoint_check(ab) <= 1e-13
    with pytest.raises(ValueError):
        compose(b, a)


def test_composition_tolerance_adds():
    proj = radon(make_parallel(64, angles_linspace(0, np.pi, 90)))
    weights = diagonal(np.random.default_rng(4).uniform(0.5, 1.5, (64, 64)))
    assert adjoint_check(proj @ weights) <= 5e-3 + 1e-7


def test_transpose_swaps():
    op = radon(make_fanbeam(32, angles_linspace(0, 2 * np.pi, 16), 32.0))
    assert op.T.domain_shape == op.range_shape
    assert op.T.T.apply is op.apply


def test_from_matrix_validates():
    with pytest.raises(ValueError):
        from_matrix(np.zeros((3, 3)), (4,), (3,))
