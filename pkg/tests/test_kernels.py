import numpy as np
import pytest
from hypothesis import given, strategies as st

from slotexchange import kernels
from slotexchange.synthetic import synthetic_plan_sets
from slotexchange.plans import Population
from slotexchange.tree import build_tree, run_coordination

from conftest import random_integer_population

needs_cython = pytest.mark.skipif("cython" not in kernels.available_backends(),
                                  reason="compiled kernels not built")


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.get_backend("python") is kernels._pykernels
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_active_backend_is_known():
    assert kernels.BACKEND in kernels.available_backends()


def _traces(p, seed, iterations, target=None):
    out = {}
    for name in kernels.available_backends():
        p.reset_to_preferred()
        out[name] = run_coordination(p, build_tree(p.n, seed), iterations, target=target, backend=name)
    return out


@needs_cython
@given(st.integers(0, 2 ** 31), st.integers(1, 60), st.sampled_from([0.0, 0.25, 0.5, 1.0]),
       st.booleans())
def test_backends_agree_on_integer_instances(seed, n, beta, with_target):
    rng = np.random.default_rng(seed)
    p = random_integer_population(rng, n, 4, 8, high=9, beta=beta)
    target = rng.integers(0, 30, size=8).astype(float) if with_target else None
    t = _traces(p, seed, 6, target)
    assert t["python"].global_cost == t["cython"].global_cost
    for a, b in zip(t["python"].selections, t["cython"].selections):
        assert np.array_equal(a, b)


@needs_cython
@pytest.mark.parametrize("beta", [0.0, 0.25])
def test_backends_agree_on_synthetic(beta):
    p = Population.from_plan_sets(synthetic_plan_sets(120, d=48, k=6, seed=3), beta=beta)
    t = _traces(p, 7, 10)
    assert t["python"].global_cost == t["cython"].global_cost
    assert np.array_equal(t["python"].selections[-1], t["cython"].selections[-1])
