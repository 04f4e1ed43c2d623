import numpy as np
import pytest

from conftest import random_instance, threshold_instance, unit_box
from rumdp.errors import PreconditionError
from rumdp.geometry import OptRegion, adjacent_reward, line_exit_points, reward_opt_region, slack_matrix
from rumdp.mdp import bellman_slack, evaluate_policy, solve_optimal
from rumdp.rewards import contains, random_interior_point, to_full_reward


def _region(normals, offsets, policy=(0,)):
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    return OptRegion(
        normals=normals,
        offsets=np.asarray(offsets, dtype=float),
        tags=[((0, i + 1),) for i in range(len(normals))],
        anchor=np.zeros(normals.shape[1]),
        policy=np.array(policy),
        scales=np.ones(len(normals)),
    )


def test_single_action_has_no_hyperplanes():
    inst = random_instance(0, n=3, m=1, d=2)
    w = np.zeros(2)
    region = reward_opt_region(inst.mdp, inst.polytope, w, [0, 0, 0])
    assert len(region) == 0


def test_region_rejects_suboptimal_policy():
    inst = threshold_instance()
    with pytest.raises(PreconditionError):
        reward_opt_region(inst.mdp, inst.polytope, np.array([0.9]), [1])


def test_threshold_region_boundary():
    inst = threshold_instance()
    region = reward_opt_region(inst.mdp, inst.polytope, np.array([0.9]), [0])
    # policy a0 stays optimal while w >= 0.5, i.e. -w <= -0.5
    assert len(region) == 1
    assert region.normals[0, 0] == pytest.approx(-1.0)
    assert region.offsets[0] == pytest.approx(-0.5)


@pytest.mark.parametrize("seed", range(4))
def test_slacks_match_bellman(seed):
    inst = random_instance(seed, base_reward_scale=0.7)
    mdp, poly = inst.mdp, inst.polytope
    rng = np.random.default_rng(seed)
    w = random_interior_point(poly, rng)
    r = to_full_reward(poly, w)
    pol, v = solve_optimal(mdp, r)
    region = reward_opt_region(mdp, poly, w, pol)
    w2 = random_interior_point(poly, rng)
    r2 = to_full_reward(poly, w2)
    direct = bellman_slack(mdp, r2, pol, evaluate_policy(mdp, r2, pol)).ravel()
    for i, tags in enumerate(region.tags):
        for s, a in tags:
            value = (region.normals[i] @ w2 - region.offsets[i]) * region.scales[i]
            assert value == pytest.approx(direct[s * mdp.n_actions + a], abs=1e-9)


def test_slack_matrix_on_fixed_reward():
    inst = random_instance(5)
    mdp = inst.mdp
    r = np.random.default_rng(5).normal(size=mdp.n_pairs)
    pol, v = solve_optimal(mdp, r)
    np.testing.assert_allclose(slack_matrix(mdp, r, pol), bellman_slack(mdp, r, pol, v).ravel(), atol=1e-10)


def test_adjacent_crosses_threshold():
    inst = threshold_instance()
    region = reward_opt_region(inst.mdp, inst.polytope, np.array([0.9]), [0])
    w = adjacent_reward(0, region, inst.polytope, 1e-6)
    assert w is not None and w[0] < 0.5
    pol, _ = solve_optimal(inst.mdp, to_full_reward(inst.polytope, w))
    assert list(pol) == [1]


def test_adjacent_across_polytope_facet_is_none():
    box = unit_box(2)
    region = _region([[1.0, 0.0]], [1.0])
    assert adjacent_reward(0, region, box, 1e-6) is None


def test_adjacent_accepts_hyperplane_objects():
    inst = threshold_instance()
    region = reward_opt_region(inst.mdp, inst.polytope, np.array([0.9]), [0])
    h = region.hyperplanes[0]
    np.testing.assert_allclose(adjacent_reward(h, region, inst.polytope, 1e-6), adjacent_reward(0, region, inst.polytope, 1e-6))


def test_adjacent_point_is_across_and_inside():
    inst = random_instance(11, n=5, m=3, d=2)
    mdp, poly = inst.mdp, inst.polytope
    w = random_interior_point(poly, np.random.default_rng(0))
    pol, _ = solve_optimal(mdp, to_full_reward(poly, w))
    region = reward_opt_region(mdp, poly, w, pol)
    crossed = 0
    for i in range(len(region)):
        p = adjacent_reward(i, region, poly, 1e-6)
        if p is None:
            continue
        crossed += 1
        assert contains(poly, p, 1e-9)
        assert region.normals[i] @ p - region.offsets[i] >= 1e-6 - 1e-9
    assert crossed >= 1


def test_line_exit_example():
    box = unit_box(2)
    region = _region([[1.0, 0.0]], [0.5])
    pts = line_exit_points(region, box, np.array([0.25, 0.5]), np.array([1.0, 0.0]), 1e-6)
    assert len(pts) == 1
    np.testing.assert_allclose(pts[0], [0.5 + 1e-6, 0.5], atol=1e-12)


def test_line_parallel_to_everything():
    region = _region([[1.0, 0.0], [1.0, 0.0]], [0.5, 0.7])
    assert line_exit_points(region, unit_box(2), np.array([0.25, 0.5]), np.array([0.0, 1.0]), 1e-6) == []


def test_line_crossings_outside_polytope():
    region = _region([[1.0, 0.0], [-1.0, 0.0]], [1.5, 0.5])
    assert line_exit_points(region, unit_box(2), np.array([0.25, 0.5]), np.array([1.0, 0.0]), 1e-6) == []
