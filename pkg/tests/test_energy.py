"""Weight basis of the 5-dimensional complement, energies, decay experiments."""

import math

import numpy as np
import pytest

import opplab.dynamics as dyn
import opplab.energy as en
from opplab import B0, DomainError, NotInH, NotMember


def test_r_basis_algebraic_properties():
    basis = en.r_basis()
    assert len(basis) == 5
    for X in basis:
        BX = B0 @ X
        assert np.array_equal(BX, BX.T)
        assert np.trace(X) == 0.0
    flat = np.stack([X.ravel() for X in basis])
    assert np.linalg.matrix_rank(flat) == 5


def test_r_basis_weights_under_diagonal_flow():
    t = 1.0
    at = dyn.a(t).matrix
    ati = np.linalg.inv(at)
    for X, wt in zip(en.r_basis(), (2, 1, 0, -1, -2)):
        err = np.max(np.abs(at @ X @ ati - math.exp(wt * t) * X))
        assert err <= 1e-12 * math.exp(abs(wt))


def test_ad_identity():
    w = np.array([0.1, -0.2, 0.3, 0.4, -0.5])
    assert np.max(np.abs(en.ad_action(np.eye(3), w) - w)) <= 1e-12


def test_ad_diagonal_flow_matrix():
    t = 0.8
    M = en.ad_matrix(dyn.a(t).matrix)
    expect = np.diag(np.exp(np.array([2.0, 1.0, 0.0, -1.0, -2.0]) * t))
    assert np.max(np.abs(M - expect)) <= 1e-12 * math.exp(2 * t)


def test_ad_unipotent_is_upper_unipotent():
    M = en.ad_matrix(dyn.u(1.0).matrix)
    assert np.max(np.abs(np.tril(M, -1))) <= 1e-12
    N = M - np.eye(5)
    assert np.max(np.abs(np.linalg.matrix_power(N, 5))) <= 1e-9


def test_ad_requires_h():
    with pytest.raises(NotInH):
        en.ad_action(np.diag([2.0, 1.0, 1.0]), np.zeros(5))


def test_ad_homomorphism():
    rng = np.random.default_rng(53)
    for _ in range(10):
        h1 = (dyn.a(rng.uniform(-1, 1)).matrix
              @ dyn.u(rng.uniform(-1, 1)).matrix
              @ dyn.k(rng.uniform(0, 6)).matrix)
        h2 = (dyn.uminus(rng.uniform(-1, 1)).matrix
              @ dyn.a(rng.uniform(-1, 1)).matrix)
        w = rng.standard_normal(5)
        lhs = en.ad_action(h1 @ h2, w)
        rhs = en.ad_action(h1, en.ad_action(h2, w))
        assert np.max(np.abs(lhs - rhs)) <= 1e-8 * max(1.0, np.max(np.abs(lhs)))


def test_ad_flow_coords_match_conjugation():
    rng = np.random.default_rng(59)
    w = rng.standard_normal(5)
    for d, r in ((0.0, 0.3), (1.2, 0.9), (2.0, -0.5)):
        direct = en.ad_action(dyn.a(d).matrix @ dyn.u(r).matrix, w)
        fast = en.ad_flow_coords(d, np.array([r]), w)[0]
        assert np.max(np.abs(direct - fast)) <= 1e-9 * max(1.0, np.max(np.abs(direct)))


def test_energy_hand_examples():
    pts = np.zeros((2, 5))
    pts[1, 0] = 1.0
    assert en.energy(en.PointCloud(pts, 1.0, 0.0), pts[0]) == 1.0
    assert en.energy(en.PointCloud(pts, 1.0, 2.0), pts[0]) == 0.5
    pts3 = np.zeros((3, 5))
    pts3[0, 0] = -1.0
    pts3[2, 0] = 1.0
    assert en.energy(en.PointCloud(pts3, 1.0, 0.0), pts3[1]) == 2.0


def test_energy_membership():
    pts = np.zeros((2, 5))
    pts[1, 0] = 1.0
    with pytest.raises(NotMember):
        en.energy(en.PointCloud(pts, 1.0), np.full(5, 0.25))


def test_energy_scaling_law():
    rng = np.random.default_rng(61)
    pts = rng.uniform(-1, 1, (12, 5))
    alpha = 1.7
    c = 0.5
    e1 = [en.energy(en.PointCloud(pts, alpha, 0.0), p) for p in pts]
    e2 = [en.energy(en.PointCloud(c * pts, alpha, 0.0), c * p) for p in pts]
    for a_, b_ in zip(e1, e2):
        assert abs(b_ - a_ * c ** -alpha) <= 1e-9 * abs(b_)


def test_energy_monotone_in_delta_and_alpha():
    rng = np.random.default_rng(67)
    pts = rng.uniform(-0.5, 0.5, (10, 5))  # pairwise distances <= 1
    w = pts[0]
    by_delta = [en.energy(en.PointCloud(pts, 1.5, d), w)
                for d in (0.0, 0.1, 0.5, 1.0)]
    assert all(x >= y for x, y in zip(by_delta, by_delta[1:]))
    by_alpha = [en.energy(en.PointCloud(pts, a, 0.0), w)
                for a in (0.5, 1.0, 2.0, 3.0)]
    assert all(x <= y for x, y in zip(by_alpha, by_alpha[1:]))


def test_varpi_pinned_values():
    assert en.varpi(0.2) == 0.4
    assert en.varpi(3.5) == 2.0
    assert en.varpi(4.5) == 1.0


def test_varpi_positive_on_grid():
    grid = np.arange(1, 500) * 0.01
    for a in grid:
        assert en.varpi(float(a)) > 0.0


def test_varpi_lower_bound():
    for khat in (0.01, 0.05):
        a = 0.01
        while a <= 5.0 - khat + 1e-12:
            assert en.varpi(a) >= min(2.0 * a, 2.0 * khat) - 1e-12
            a += 0.01


def test_varpi_domain():
    with pytest.raises(DomainError):
        en.varpi(0.0)
    with pytest.raises(DomainError):
        en.varpi(5.1)


def test_expansion_check_domain():
    with pytest.raises(DomainError):
        en.expansion_check(np.ones(5), 1.0, 0.3)
    with pytest.raises(DomainError):
        en.expansion_check(np.zeros(5), 1.0, 0.1)


def test_expansion_check_top_weight_vector_is_flat():
    w = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    for d in (0.0, 2.0, 5.0):
        integral, normalized = en.expansion_check(w, d, 0.2)
        assert abs(normalized - 1.0) <= 1e-6


def test_expansion_check_uniformly_bounded():
    rng = np.random.default_rng(71)
    for _ in range(20):
        w = rng.standard_normal(5)
        w /= np.max(np.abs(w))
        n2 = en.expansion_check(w, 2.0, 0.2)[1]
        n6 = en.expansion_check(w, 6.0, 0.2)[1]
        assert n6 <= 3.0 * n2


def test_sampler_reproducible_and_in_ball():
    p1 = en.sample_regular_cloud(400, 2.5, seed=5)
    p2 = en.sample_regular_cloud(400, 2.5, seed=5)
    assert np.array_equal(p1, p2)
    assert np.max(np.abs(p1)) <= 1.0
    assert p1.shape[0] <= 400


def test_sampler_ball_count_regularity():
    pts = en.sample_regular_cloud(1000, 2.5, seed=9)
    n = pts.shape[0]
    rng = np.random.default_rng(0)
    idx = rng.choice(n, 50, replace=False)
    for b in (0.125, 0.25, 0.5):
        worst = 0
        for i in idx:
            d = np.max(np.abs(pts - pts[i]), axis=1)
            worst = max(worst, int(np.sum(d <= b)))
        assert worst <= 40 * n * b ** 2.5  # generous absolute constant


def test_projection_experiment_reproducible():
    s1 = en.projection_decay_experiment(500, 2.5, 1.5, trials=8, seed=2)
    s2 = en.projection_decay_experiment(500, 2.5, 1.5, trials=8, seed=2)
    assert s1 == s2
    assert s1.pairs == s1.trials * s1.n_points


def test_projection_experiment_degenerate():
    s = en.projection_decay_experiment(1, 2.5, 1.5, trials=4, seed=0)
    assert s.degenerate


def test_projection_experiment_no_expansion_at_zero_ell():
    s = en.projection_decay_experiment(800, 2.5, 0.0, trials=6, seed=4)
    assert 0.5 <= s.median_decay <= 2.0


def test_projection_experiment_guards():
    with pytest.raises(DomainError):
        en.projection_decay_experiment(10**5, 2.5, 1.5)
    with pytest.raises(DomainError):
        en.projection_decay_experiment(100, 2.5, 1.5, trials=500)


def test_rvector_norm():
    v = en.RVector(np.array([0.1, -2.0, 0.3, 0.0, 1.0]))
    assert v.norm == 2.0
    with pytest.raises(DomainError):
        en.RVector(np.zeros(4))
