import math

import numpy as np
import pytest

from branchfractal.agora import (AgoraConfig, AgoraStats, PointTree, acceptance_frequency,
                                 count_radius, expected_seeds, generate_discrete,
                                 hard_acceptance_probability, min_dist, seed_growth,
                                 seed_probability, step_hard, step_smooth)
from branchfractal.errors import InsufficientDataError, ParameterError, RejectionLimitError
from branchfractal.spatial_index import distances, distances_rows


def _frozen(points):
    pts = np.vstack([np.zeros((1, 2)), np.asarray(points, dtype=float)])
    parent = np.r_[-1, np.zeros(len(pts) - 1, dtype=int)]
    return PointTree.from_arrays(pts, parent, AgoraStats(seeds=len(pts) - 1))


def test_min_dist_examples():
    tree = _frozen([[1.0, 0.0]])
    assert min_dist([0.0, 0.0], tree) == (1.0, 1)
    tree = _frozen([[1.0, 0.0], [0.25, 0.5]])
    assert min_dist([0.25, 0.5], tree) == (0.0, 2)
    with pytest.raises(InsufficientDataError):
        min_dist([0.0, 0.0], PointTree.root_only(2))


def test_min_dist_matches_exhaustive_scan(rng):
    tree = _frozen(rng.uniform(-1, 1, size=(100, 2)))
    for q in rng.uniform(-1.2, 1.2, size=(100, 2)):
        dd = distances(tree.points[1:], q)
        assert min_dist(q, tree) == (float(dd.min()), int(np.argmin(dd)) + 1)


def test_seed_probability():
    assert seed_probability(0.0, 1) == 1.0
    assert seed_probability(0.0, 5) == 0.0
    assert seed_probability(2.0, 3) == 0.5


def test_first_point_with_zero_theta_is_a_seed(rng):
    cfg = AgoraConfig(theta=0.0, model="smooth")
    tree = step_smooth(PointTree.root_only(2), cfg, rng)
    assert len(tree) == 2 and tree.parents[1] == 0
    assert np.linalg.norm(tree.points[1]) <= 1.0


def test_hard_lone_neighbour_always_accepted(rng):
    cfg = AgoraConfig(theta=0.0, model="hard", alpha=1.5)
    tree = _frozen([[0.3, 0.1]])
    y = tree.points[1] + 0.5 * count_radius(cfg, 2) * np.array([0.6, 0.8])
    assert hard_acceptance_probability(tree, y, cfg) == 1.0
    step_hard(tree, cfg, rng)
    assert tree.parents[2] == 1 and tree.stats.rejections == 0


def test_hard_acceptance_frequency_oracle(rng):
    cfg = AgoraConfig(theta=0.0, model="hard", alpha=1.5)
    tree = _frozen(rng.normal(scale=0.15, size=(50, 2)))
    r = count_radius(cfg, len(tree))
    for _ in range(5):
        y = tree.points[1 + rng.integers(50)] + rng.uniform(-0.5, 0.5, 2) * r
        k = int(np.count_nonzero(distances(tree.points[1:], y) <= r))
        freq = acceptance_frequency(tree, y, cfg, 10**6, rng)
        assert freq == pytest.approx(1.0 / max(k, 1), rel=0.01)


def test_dense_cluster_thinning(rng):
    # ten coincident points against one lone point: z lands in the cluster ten
    # times as often but is accepted a tenth as often, so parents split evenly
    cfg = AgoraConfig(theta=0.0, model="hard", alpha=1.5)
    base = _frozen([[0.0, 0.0]] * 10 + [[5.0, 5.0]])
    assert count_radius(cfg, len(base)) < 1.0
    in_cluster = 0
    trials = 4000
    for _ in range(trials):
        tree = base.copy()
        step_hard(tree, cfg, rng)
        in_cluster += tree.parents[-1] <= 10
    # each side has probability 1/2; 4 standard errors of a binomial proportion
    assert abs(in_cluster / trials - 0.5) <= 4 * math.sqrt(0.25 / trials)


@pytest.mark.parametrize("theta", [0.0, 1.0, 3.0])
def test_smooth_parent_is_nearest_point(theta):
    cfg = AgoraConfig(d=2, alpha=1.5, theta=theta, n_points=2000, model="smooth", seed=11)
    tree = generate_discrete(cfg)
    tree.check()
    pts, par = tree.points, tree.parents
    for k in range(2, len(tree)):
        if par[k] != 0:
            dd = distances(pts[1:k], pts[k])
            assert par[k] == int(np.argmin(dd)) + 1
    assert np.all(np.linalg.norm(pts, axis=1) <= 1.0)


@pytest.mark.parametrize("alpha", [10 / 9, 1.5])
def test_hard_points_within_proposal_radius(alpha):
    cfg = AgoraConfig(d=2, alpha=alpha, theta=1.0, n_points=20_000, model="hard", seed=5)
    tree = generate_discrete(cfg)
    tree.check()
    k = np.arange(1, len(tree))
    nonseed = tree.parents[1:] != 0
    gap = distances_rows(tree.points[1:], tree.points[tree.parents[1:]])
    # point k arrived when the tree held k points
    assert np.all(gap[nonseed] <= k[nonseed] ** (-1.0 / alpha))


def test_hard_model_in_three_dimensions():
    tree = generate_discrete(AgoraConfig(d=3, alpha=2.0, n_points=3000, model="hard", seed=1))
    tree.check()
    assert tree.points.shape == (3001, 3)


def test_inverse_n_count_radius():
    cfg = AgoraConfig(alpha=1.5, n_points=3000, model="hard", seed=2, count_radius="inverse-n")
    assert count_radius(cfg, 10) == 0.1
    generate_discrete(cfg).check()


@pytest.mark.parametrize("model", ["smooth", "hard"])
def test_determinism(model):
    cfg = AgoraConfig(alpha=1.3, theta=2.0, n_points=3000, model=model, seed=4)
    a, b = generate_discrete(cfg), generate_discrete(cfg)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.parents, b.parents)
    assert a.stats == b.stats


def test_step_functions_match_generator():
    cfg = AgoraConfig(alpha=1.5, theta=1.0, n_points=500, model="hard", seed=8)
    whole = generate_discrete(cfg)
    rng = np.random.default_rng(cfg.seed)
    tree = PointTree.root_only(2)
    for _ in range(cfg.n_points):
        step_hard(tree, cfg, rng)
    assert np.array_equal(whole.points, tree.points)


def test_zero_points_gives_root_only():
    tree = generate_discrete(AgoraConfig(n_points=0))
    assert len(tree) == 1 and tree.parents[0] == -1


def test_rejection_guard_carries_partial_tree():
    cfg = AgoraConfig(alpha=0.2, theta=0.5, n_points=5000, model="smooth", seed=1,
                      max_rejections_per_point=50)
    with pytest.raises(RejectionLimitError) as info:
        generate_discrete(cfg)
    err = info.value
    assert err.tree is not None and 1 < len(err.tree) < 5001
    err.tree.check()
    assert err.stats.proposals >= 50


@pytest.mark.parametrize("kwargs", [dict(d=1), dict(alpha=2.0), dict(alpha=0.0), dict(theta=-1.0),
                                    dict(model="medium")])
def test_config_validation(kwargs):
    with pytest.raises(ParameterError):
        AgoraConfig(**kwargs)


def test_config_round_trip():
    cfg = AgoraConfig(d=3, alpha=2.5, theta=0.5, n_points=7, model="smooth", count_radius="inverse-n")
    assert AgoraConfig.from_dict(cfg.to_dict()) == cfg


def test_seed_law_helpers():
    assert expected_seeds(0.0, 10) == 1.0
    assert expected_seeds(1.0, 3) == pytest.approx(1 + 1 / 2 + 1 / 3)
    assert seed_growth(2.0, 10**4) == pytest.approx(17.03, abs=0.01)
