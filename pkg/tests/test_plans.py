import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from slotexchange.plans import (
    AgentState, GlobalResponse, PlanSet, Population, as_plan, comfort, discomfort,
    generate_plans, global_response, inefficiency, slot_totals, total_energy,
)
from slotexchange.synthetic import GRID, preferred_profile, synthetic_plan_sets

from conftest import make_population

finite = st.floats(min_value=0, max_value=100, allow_nan=False, allow_infinity=False)


def plan_pairs(max_d=12):
    return st.integers(1, max_d).flatmap(
        lambda d: st.tuples(arrays(np.float64, d, elements=finite), arrays(np.float64, d, elements=finite))
    )


# -- discomfort / comfort --------------------------------------------------

def test_discomfort_zero_on_preferred():
    x = np.array([1.0, 2.0, 3.0])
    assert discomfort(x, x) == 0.0
    assert comfort(x, x) == 1.0


def test_discomfort_hand_example():
    # deviations (1, -1, 0, 0): sqrt((1 + 1) / 4)
    got = discomfort([2, 0, 1, 1], [1, 1, 1, 1], scale=1.0)
    assert got == pytest.approx(math.sqrt(2 / 4), abs=1e-12)
    assert got == pytest.approx(0.7071, abs=1e-4)


def test_discomfort_clamp_boundary():
    pref = np.array([3.0, 3.0, 3.0])
    sel = pref + np.array([2.0, -2.0, 2.0])
    assert discomfort(sel, pref, scale=2.0) == 1.0
    assert comfort(sel, pref, scale=2.0) == 0.0
    assert discomfort(pref + 10, pref, scale=2.0) == 1.0


def test_comfort_complement():
    # RMSE 0.3 at scale 1
    assert comfort([1.3, 1.3], [1.0, 1.0]) == pytest.approx(0.7)


@pytest.mark.parametrize("bad", [
    ([1, 2], [1, 2, 3]),
    ([1, np.nan], [1, 2]),
    ([1, np.inf], [1, 2]),
])
def test_discomfort_errors(bad):
    with pytest.raises(ValueError):
        discomfort(*bad)


def test_discomfort_bad_scale():
    with pytest.raises(ValueError):
        discomfort([1], [1], scale=0.0)


@given(plan_pairs(), st.floats(min_value=0.01, max_value=50))
def test_discomfort_properties(pair, scale):
    x, y = pair
    dxy = discomfort(x, y, scale)
    assert 0.0 <= dxy <= 1.0
    assert dxy == discomfort(y, x, scale)
    assert discomfort(x, x, scale) == 0.0
    assert comfort(x, y, scale) + dxy == 1.0


# -- inefficiency -----------------------------------------------------------

def test_inefficiency_examples():
    assert inefficiency(GlobalResponse(np.array([4.0, 6.0]))) == 1.0
    assert inefficiency(np.full(5, 3.5)) == 0.0
    g = np.array([1.0, 4.0, 2.0])
    assert inefficiency(g, target=g) == 0.0


def test_inefficiency_target_shape():
    with pytest.raises(ValueError):
        inefficiency(np.ones(3), target=np.ones(4))


@given(arrays(np.float64, st.integers(1, 30), elements=finite))
def test_variance_is_mse_against_mean(g):
    flat = np.full_like(g, g.mean())
    assert inefficiency(g) == pytest.approx(inefficiency(g, target=flat), rel=1e-9, abs=1e-9)
    assert inefficiency(g) >= 0


# -- types ------------------------------------------------------------------

def test_as_plan_validation():
    with pytest.raises(ValueError):
        as_plan([[1, 2]])
    with pytest.raises(ValueError):
        as_plan([1, -1])
    with pytest.raises(ValueError):
        as_plan([1, 2], d=3)


def test_planset_rejects_unequal_totals():
    with pytest.raises(ValueError, match="total energy"):
        PlanSet(np.array([[1.0, 1.0], [1.0, 2.0]]))


def test_planset_accepts_rounding_level_totals():
    PlanSet(np.array([[0.1, 0.2], [0.3, 0.0]]))


def test_planset_index_and_readonly():
    with pytest.raises(ValueError):
        PlanSet(np.ones((2, 3)), preferred_index=2)
    ps = PlanSet(np.array([[1.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        ps.plans[0, 0] = 5.0


def test_planset_discomfort_scale():
    ps = PlanSet(np.array([[1.0, 1.0], [2.0, 0.0], [1.5, 0.5]]))
    assert ps.discomfort_scale == pytest.approx(1.0)
    assert list(ps.discomforts) == pytest.approx([0.0, 1.0, 0.5])
    flat = PlanSet(np.ones((3, 2)))
    assert flat.discomfort_scale == 1.0


def test_agent_state_defaults_and_select():
    ps = PlanSet(np.array([[1.0, 1.0], [2.0, 0.0]]))
    a = AgentState(0, ps)
    assert np.array_equal(a.selected, ps.preferred)
    assert a.discomfort() == 0.0
    a.select(1)
    assert a.discomfort() == 1.0 and a.selected_index == 1
    with pytest.raises(ValueError):
        AgentState(0, ps, beta=1.5)


def test_population_requires_common_d():
    with pytest.raises(ValueError):
        Population([AgentState(0, PlanSet(np.ones((1, 2)))), AgentState(1, PlanSet(np.ones((1, 3))))])


def test_total_energy_examples():
    p = make_population([[[5.0, 5.0]], [[2.0, 8.0]]])
    assert total_energy(p) == 20.0
    assert total_energy(Population([])) == 0.0


def test_global_response_sums_selected():
    p = make_population([[[1.0, 2.0], [2.0, 1.0]], [[0.5, 0.5], [1.0, 0.0]]])
    p[1].select(1)
    assert np.array_equal(global_response(p).totals, [2.0, 2.0])


@given(arrays(np.float64, (6, 3), elements=finite), st.randoms(use_true_random=False))
def test_slot_totals_order_independent(m, rnd):
    perm = list(range(6))
    rnd.shuffle(perm)
    assert np.array_equal(slot_totals(m), slot_totals(m[perm]))


def test_snapshot_restore_roundtrip():
    p = make_population([[[1.0, 2.0], [2.0, 1.0]], [[3.0, 0.0], [0.0, 3.0]]])
    p[0].select(1)
    snap = p.snapshot()
    p.reset_to_preferred()
    p.restore(snap)
    assert np.array_equal(p.selected_matrix(), snap)
    assert p[0].selected_index == 1


# -- generate_plans ---------------------------------------------------------

def test_generate_zero_flexibility():
    pref = np.array([1.0, 2.0, 3.0, 4.0])
    ps = generate_plans(pref, 0.0, 5, seed=3)
    assert ps.k == 5
    assert all(np.array_equal(row, pref) for row in ps.plans)


def test_generate_determinism():
    pref = np.arange(10, dtype=float)
    a = generate_plans(pref, 0.3, 6, seed=9)
    b = generate_plans(pref, 0.3, 6, seed=9)
    assert np.array_equal(a.plans, b.plans)
    c = generate_plans(pref, 0.3, 6, seed=10)
    assert not np.array_equal(a.plans, c.plans)


@pytest.mark.parametrize("kw", [dict(k=0, flexibility=0.1), dict(k=3, flexibility=1.5),
                                dict(k=3, flexibility=-0.1)])
def test_generate_errors(kw):
    with pytest.raises(ValueError):
        generate_plans(np.ones(4), seed=0, **kw)


def test_generate_grid_checks():
    with pytest.raises(ValueError):
        generate_plans(np.array([0.013, 1.0]), 0.5, 3, seed=0, grid=0.01)
    with pytest.raises(ValueError):
        generate_plans(np.ones(3), 0.5, 3, seed=0, grid=0.3)


@given(st.lists(st.integers(0, 40), min_size=2, max_size=24), st.floats(0, 1),
       st.integers(1, 8), st.integers(0, 2 ** 31))
def test_generate_conserves_energy_on_dyadic_grid(units, flex, k, seed):
    pref = np.array(units, dtype=float) * GRID
    ps = generate_plans(pref, flex, k, seed, grid=GRID)
    totals = ps.plans.sum(axis=1)
    assert np.all(totals == totals[0])
    assert np.all(ps.plans >= 0)
    assert np.array_equal(np.rint(ps.plans / GRID) * GRID, ps.plans)
    assert np.array_equal(ps.plans[0], pref)


@given(arrays(np.float64, st.integers(2, 20), elements=st.floats(0, 10)), st.floats(0, 1),
       st.integers(1, 6), st.integers(0, 2 ** 31))
def test_generate_conserves_energy_real_valued(pref, flex, k, seed):
    ps = generate_plans(pref, flex, k, seed)
    totals = ps.plans.sum(axis=1)
    assert np.allclose(totals, pref.sum(), rtol=1e-9, atol=1e-9)
    assert np.all(ps.plans >= 0)


def test_synthetic_profiles_on_grid():
    rng = np.random.default_rng(0)
    prof = preferred_profile(144, rng)
    assert prof.shape == (144,) and np.all(prof > 0)
    sets = synthetic_plan_sets(5, d=24, k=4, seed=2)
    assert len(sets) == 5
    for ps in sets:
        assert ps.k == 4 and ps.d == 24
        assert np.all(ps.plans.sum(axis=1) == ps.plans[0].sum())
