import math

import numpy as np
import pytest
from scipy import stats

from branchfractal.branching import (GrowthTrace, generate_replicas, generate_tree, growth_exponent,
                                     next_child_time)
from branchfractal.errors import InsufficientDataError, ParameterError
from branchfractal.profiles import params_from_rho


def test_next_child_time_collapses_for_huge_rate(rng):
    assert next_child_time(3.0, 1e12, rng) == pytest.approx(3.0, rel=1e-9)


def test_log_next_time_is_unit_exponential(rng):
    logs = np.array([math.log(next_child_time(1.0, 1.0, rng)) for _ in range(100_000)])
    assert logs.mean() == pytest.approx(1.0, rel=0.02)


def test_scaled_log_gap_ks(rng):
    x = np.array([2.0 * math.log(next_child_time(5.0, 2.0, rng) / 5.0) for _ in range(10_000)])
    assert stats.kstest(x, "expon").pvalue > 0.01


def test_next_child_time_rejects_early_clock(rng):
    with pytest.raises(ParameterError):
        next_child_time(0.5, 1.0, rng)


@pytest.mark.parametrize("profile", ["exponential", "gaussian", "hardcutoff"])
@pytest.mark.parametrize("rho", [0.4, 1.0, 2.0])
def test_tree_invariants(profile, rho):
    params = params_from_rho(2, rho, profile, seed=5)
    tree, trace = generate_tree(params, 3000)
    tree.check()
    assert len(tree) == 3000 and tree.stop_reason == "vertices"
    assert np.array_equal(trace.sizes, np.arange(1, 3001))
    assert np.all(np.diff(trace.times) > 0)
    assert tree.horizon == tree.tau[-1]
    assert tree[0].parent == -1 and tree[0].tau == 1.0


def test_root_only_tree():
    tree, trace = generate_tree(params_from_rho(2, 1.0), 1)
    assert len(tree) == 1 and trace.births == 0
    tree.check()


def test_time_stop_is_exact():
    params = params_from_rho(2, 1.0, seed=2)
    big, _ = generate_tree(params, 10**6, max_time=200.0)
    assert big.stop_reason == "time"
    assert np.all(big.tau <= 200.0)
    # the same stream with a larger horizon contains the smaller tree as its prefix
    bigger, _ = generate_tree(params, 10**6, max_time=400.0)
    assert np.array_equal(bigger.tau[: len(big)], big.tau)
    assert bigger.tau[len(big)] > 200.0


def test_depth_cap():
    tree, _ = generate_tree(params_from_rho(2, 1.0, seed=3), 10**6, max_time=1e4, max_depth=2)
    tree.check()
    assert tree.depth.max() <= 2


def test_determinism():
    params = params_from_rho(3, 0.75, "exponential", seed=9)
    a, _ = generate_tree(params, 2000)
    b, _ = generate_tree(params, 2000)
    assert np.array_equal(a.chi, b.chi) and np.array_equal(a.tau, b.tau)


def test_displacements_match_profile_bound():
    params = params_from_rho(2, 0.75, "hardcutoff", seed=4)
    tree, _ = generate_tree(params, 20_000)
    disp = np.sqrt((tree.displacements()[1:] ** 2).sum(axis=1))
    assert np.all(disp <= tree.tau[1:] ** (-1 / 2))


def test_bad_budget():
    with pytest.raises(ParameterError):
        generate_tree(params_from_rho(2, 1.0), 0)
    with pytest.raises(ParameterError):
        generate_tree(params_from_rho(2, 1.0), 10, max_time=0.5)


def test_replicas_are_independent():
    params = params_from_rho(2, 1.0, seed=1)
    trees = [t for t, _ in generate_replicas(params, 3, 50)]
    assert not np.array_equal(trees[0].tau, trees[1].tau)


def test_growth_exponent_on_exact_power_law():
    t = np.geomspace(1, 1e6, 500)
    traces = [GrowthTrace(times=t, sizes=np.maximum(1, np.round(c * t ** 0.7)).astype(int))
              for c in (1.0, 3.0)]
    fit = growth_exponent(traces, 0.7, min_births=10)
    assert fit.slope == pytest.approx(0.7, abs=0.01)


def test_growth_exponent_needs_data():
    with pytest.raises(InsufficientDataError):
        growth_exponent([GrowthTrace(times=np.array([1.0, 2.0]))], 1.0)
