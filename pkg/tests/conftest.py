import numpy as np
import pytest

from rumdp.instances import GenConfig, RumdpInstance, generate
from rumdp.mdp import Mdp
from rumdp.rewards import RewardPolytope

STAY, SWITCH = 0, 1


def two_state_mdp(alpha=(1.0, 0.0), gamma=0.9) -> Mdp:
    """Two states with actions stay and switch, both deterministic."""
    t = np.array(
        [
            [1.0, 0.0],  # s0 stay
            [0.0, 1.0],  # s0 switch
            [0.0, 1.0],  # s1 stay
            [1.0, 0.0],  # s1 switch
        ]
    )
    return Mdp(2, 2, t, np.array(alpha, dtype=float), gamma)


def unit_box(dim: int, basis=None, offset=None) -> RewardPolytope:
    a = np.vstack([np.eye(dim), -np.eye(dim)])
    b = np.r_[np.ones(dim), np.zeros(dim)]
    return RewardPolytope(a, b, basis, offset)


def one_state_box() -> RumdpInstance:
    """One state, two actions, both rewards free in [0, 1], gamma 0.9."""
    mdp = Mdp(1, 2, np.array([[1.0], [1.0]]), np.array([1.0]), 0.9)
    return RumdpInstance(mdp, unit_box(2))


def threshold_instance() -> RumdpInstance:
    """r(a0) = w in [0, 1] is free, r(a1) = 0.5 is fixed; the optimal action flips at w = 0.5."""
    mdp = Mdp(1, 2, np.array([[1.0], [1.0]]), np.array([1.0]), 0.9)
    return RumdpInstance(mdp, unit_box(1, basis=np.array([[1.0], [0.0]]), offset=np.array([0.0, 0.5])))


def random_instance(seed, n=4, m=3, d=2, **kw) -> RumdpInstance:
    return generate(GenConfig(n_states=n, n_actions=m, reward_dim=d, seed=seed, **kw))


def single_action_instance(seed=0) -> RumdpInstance:
    return random_instance(seed, n=3, m=1, d=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
