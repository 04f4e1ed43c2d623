import numpy as np
import pytest

from conftest import unit_box
from rumdp.errors import DegeneratePolytopeError, InfeasiblePolytopeError, InvalidInstanceError
from rumdp.lp import LinearProgram, solve_lp
from rumdp.rewards import RewardPolytope, box_polytope, chebyshev_center, contains, interior_point, to_full_reward


def test_identity_basis_passthrough():
    poly = box_polytope(4)
    w = np.array([0.1, -0.2, 0.3, 0.0])
    np.testing.assert_array_equal(to_full_reward(poly, w), w)


def test_indicator_basis():
    phi = np.array([[1, 0], [1, 0], [0, 1], [0, 0]], dtype=float)
    np.testing.assert_array_equal(to_full_reward(box_polytope(2, 5.0, phi), [2, 3]), [2, 2, 3, 0])


def test_random_basis_with_offset(rng):
    phi = rng.normal(size=(6, 3))
    r0 = rng.normal(size=6)
    w = rng.normal(size=3)
    full = to_full_reward(box_polytope(3, 1.0, phi, r0), w)
    np.testing.assert_allclose(full, r0 + phi @ w, atol=1e-12)


def test_wrong_parameter_length():
    with pytest.raises(ValueError):
        to_full_reward(box_polytope(2), [1.0])


def test_contains_conventions():
    box = unit_box(3)
    center, _ = chebyshev_center(box)
    assert contains(box, center, 0.0)
    assert not contains(box, [2.0, 0.5, 0.5], 1e-9)
    assert contains(box, [1.0, 0.5, 0.0], 1e-9)


def test_unit_box_center():
    np.testing.assert_allclose(interior_point(unit_box(3)).w, [0.5, 0.5, 0.5], atol=1e-9)


def test_simplex_incenter_matches_lp():
    # w1 >= 0, w2 >= 0, w1 + w2 <= 1
    a = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])
    b = np.array([0.0, 0.0, 1.0])
    center, radius = chebyshev_center(RewardPolytope(a, b))
    norms = np.linalg.norm(a, axis=1)
    ref = solve_lp(LinearProgram.build([0, 0, 1.0], ub=(np.c_[a, norms], b), maximize=True), backend="highs")
    np.testing.assert_allclose(np.r_[center, radius], ref.solution, atol=1e-8)
    assert radius == pytest.approx(1 / (2 + np.sqrt(2)))


def test_contradictory_rows():
    with pytest.raises(InfeasiblePolytopeError):
        interior_point(RewardPolytope([[1.0], [-1.0]], [0.0, -1.0]))


def test_flat_polytope_is_degenerate():
    with pytest.raises(DegeneratePolytopeError):
        interior_point(RewardPolytope([[1.0], [-1.0]], [0.3, -0.3]))


def test_validate_checks_basis_rank_and_offset():
    with pytest.raises(InvalidInstanceError):
        box_polytope(2, 1.0, np.ones((4, 2))).validate(4)
    with pytest.raises(InvalidInstanceError):
        box_polytope(2, 1.0, np.eye(4)[:, :2], np.ones(3)).validate(4)
