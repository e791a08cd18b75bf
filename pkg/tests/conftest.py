import numpy as np
import pytest
from hypothesis import settings

from slotexchange.plans import AgentState, PlanSet, Population

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_ACCEPTANCE_LINES = []


def record_criterion(number, passed: bool, detail: str) -> None:
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_population(plan_lists, preferred=None, beta=0.0) -> Population:
    """Population from nested lists of plans; plan 0 preferred unless given."""
    agents = []
    for i, plans in enumerate(plan_lists):
        idx = 0 if preferred is None else preferred[i]
        agents.append(AgentState(i, PlanSet(np.array(plans, dtype=float), preferred_index=idx), beta=beta))
    return Population(agents)


def random_integer_population(rng, n, k, d, high=4, beta=0.0) -> Population:
    """Plans with small integer values; alternates are permutations of the
    preferred plan so totals match exactly and equal values recur often."""
    sets = []
    for _ in range(n):
        pref = rng.integers(0, high, size=d).astype(float)
        plans = [pref] + [rng.permutation(pref) for _ in range(k - 1)]
        sets.append(plans)
    return make_population(sets, beta=beta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
