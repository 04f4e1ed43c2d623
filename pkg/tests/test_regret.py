import numpy as np
import pytest

from conftest import one_state_box, random_instance, single_action_instance
from rumdp.errors import BudgetExceededError, PreconditionError
from rumdp.mdp import occupancy_of
from rumdp.nondominated import NondominatedSet, enumerate_gt, make_entry
from rumdp.regret import evaluate_regret, max_regret, mixture_occupancy, solve_icg_nd, solve_xu_mannor


@pytest.fixture(scope="module")
def box_case():
    inst = one_state_box()
    return inst, enumerate_gt(inst.mdp, inst.polytope)


def test_pure_policy_regret_is_ten(box_case):
    inst, gamma_set = box_case
    pair, value = max_regret(occupancy_of(inst.mdp, [0]), gamma_set, inst.polytope)
    assert value == pytest.approx(10.0)
    np.testing.assert_allclose(pair.r_w, [0.0, 1.0], atol=1e-9)
    assert tuple(gamma_set.entries[pair.index].key) == (1,)


def test_xu_mannor_fixture(box_case):
    inst, gamma_set = box_case
    sol = solve_xu_mannor(inst.polytope, gamma_set)
    assert sol.regret == pytest.approx(5.0, abs=1e-6)
    np.testing.assert_allclose(sol.weights, [0.5, 0.5], atol=1e-6)
    assert evaluate_regret(sol, gamma_set, inst.polytope) == pytest.approx(5.0, abs=1e-6)


def test_icg_fixture(box_case):
    inst, gamma_set = box_case
    sol = solve_icg_nd(inst.mdp, inst.polytope, gamma_set)
    assert sol.regret == pytest.approx(5.0, abs=1e-6)
    np.testing.assert_allclose(sol.occupancy, [5.0, 5.0], atol=1e-6)


def test_singleton_has_zero_regret():
    inst = single_action_instance()
    gamma_set = enumerate_gt(inst.mdp, inst.polytope)
    f = gamma_set.entries[0].occupancy
    assert max_regret(f, gamma_set, inst.polytope)[1] == pytest.approx(0.0, abs=1e-9)
    xm = solve_xu_mannor(inst.polytope, gamma_set)
    assert xm.regret == pytest.approx(0.0, abs=1e-9) and list(xm.weights) == [1.0]
    ic = solve_icg_nd(inst.mdp, inst.polytope, gamma_set)
    assert ic.regret == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(ic.occupancy, f, atol=1e-8)


def test_pure_policy_against_itself():
    inst = random_instance(3)
    entry = make_entry(inst.mdp, inst.polytope, [0, 1, 2, 0], np.zeros(2))
    only = NondominatedSet()
    only.add(entry)
    assert evaluate_regret(entry.occupancy, only, inst.polytope) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_solvers_agree(seed):
    inst = random_instance(seed, n=5, m=3, d=2, base_reward_scale=0.5 * (seed % 3))
    gamma_set = enumerate_gt(inst.mdp, inst.polytope)
    xm = solve_xu_mannor(inst.polytope, gamma_set)
    ic = solve_icg_nd(inst.mdp, inst.polytope, gamma_set)
    assert xm.regret == pytest.approx(ic.regret, abs=1e-5)
    assert evaluate_regret(xm.mixture(), gamma_set, inst.polytope) == pytest.approx(xm.regret, abs=1e-6)
    assert evaluate_regret(ic, gamma_set, inst.polytope) == pytest.approx(ic.regret, abs=1e-6)
    assert all(b >= a - 1e-9 for a, b in zip(ic.history, ic.history[1:]))


def test_mixture_occupancy_forms():
    inst = random_instance(1)
    gamma_set = enumerate_gt(inst.mdp, inst.polytope)
    k = len(gamma_set)
    weights = np.full(k, 1.0 / k)
    by_key = {key: 1.0 / k for key in gamma_set.keys()}
    np.testing.assert_allclose(mixture_occupancy(weights, gamma_set), mixture_occupancy(by_key, gamma_set))
    with pytest.raises(PreconditionError):
        mixture_occupancy(np.ones(k + 1), gamma_set)


def test_empty_set_rejected():
    inst = random_instance(1)
    with pytest.raises(PreconditionError):
        solve_xu_mannor(inst.polytope, NondominatedSet())


def test_icg_tolerance_must_be_positive(box_case):
    inst, gamma_set = box_case
    with pytest.raises(ValueError):
        solve_icg_nd(inst.mdp, inst.polytope, gamma_set, tol=0.0)


def test_icg_iteration_cap_keeps_best():
    inst = random_instance(2, n=6, m=3, d=2, base_reward_scale=1.0)
    gamma_set = enumerate_gt(inst.mdp, inst.polytope)
    with pytest.raises(BudgetExceededError) as info:
        solve_icg_nd(inst.mdp, inst.polytope, gamma_set, max_iterations=1)
    assert info.value.partial.regret >= solve_xu_mannor(inst.polytope, gamma_set).regret - 1e-6
