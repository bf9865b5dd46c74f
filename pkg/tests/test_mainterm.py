"""Main-term constant: quadrature against analytic values and the MC oracle."""

import math

import numpy as np
import pytest

import opplab as op
from opplab import DomainError, NotIndefinite, cq_montecarlo, cq_quadrature

from test_qform import random_indefinite

PI_SQRT2 = math.pi * math.sqrt(2.0)
Q0 = op.q0_form()
Q1, _ = op.normalize_det(op.from_coefficients(math.sqrt(2), -1,
                                              -1 / math.sqrt(2), 0, 0, 0))


def test_quadrature_model_form_analytic():
    est = cq_quadrature(Q0, 1e-8)
    assert abs(est.value - PI_SQRT2) <= 1e-6
    assert est.method == "quadrature" and est.stderr == 0.0


def test_quadrature_rotated_cone_analytic():
    est = cq_quadrature(op.from_coefficients(1, -1, -1, 0, 0, 0), 1e-8)
    assert abs(est.value - PI_SQRT2) <= 1e-6


def test_quadrature_definite_rejected():
    with pytest.raises(NotIndefinite):
        cq_quadrature(op.from_coefficients(1, 1, 1, 0, 0, 0))


def test_quadrature_rotation_invariance():
    rng = np.random.default_rng(31)
    for _ in range(5):
        q = random_indefinite(rng)
        base = cq_quadrature(q, 1e-9).value
        # random rotation
        m = rng.standard_normal((3, 3))
        k, _ = np.linalg.qr(m)
        if np.linalg.det(k) < 0:
            k[:, 0] = -k[:, 0]
        qrot = op.QForm(k.T @ q.matrix @ k)
        rot = cq_quadrature(qrot, 1e-9).value
        assert abs(base - rot) <= 1e-7 * max(1.0, base)


def test_quadrature_tolerance_self_consistency():
    v1 = cq_quadrature(Q1, 1e-6).value
    v2 = cq_quadrature(Q1, 5e-7).value
    assert abs(v1 - v2) < 1e-6


def test_montecarlo_pinned_seed_within_two_percent():
    est = cq_montecarlo(Q0, 10**6, 50.0, 0.2, seed=9)
    assert abs(est.value - PI_SQRT2) / PI_SQRT2 <= 0.02
    assert est.stderr > 0


def test_montecarlo_consistent_with_quadrature():
    est = cq_montecarlo(Q1, 10**6, 50.0, 0.2, seed=4)
    quad = cq_quadrature(Q1, 1e-8).value
    assert abs(est.value - quad) <= 3.0 * est.stderr


def test_montecarlo_zero_width():
    est = cq_montecarlo(Q0, 10**4, 50.0, 0.0, seed=0)
    assert est.value == 0.0


def test_montecarlo_sample_minimum():
    with pytest.raises(DomainError):
        cq_montecarlo(Q0, 10**3, 50.0, 0.2, seed=0)


def test_montecarlo_scaling_law():
    # vol{|cQ| <= w/2} = vol{|Q| <= w/(2c)}, so the estimates match after
    # multiplying the cQ side by c (the estimator divides by its own width)
    c = 2.0
    q2 = op.QForm(c * Q1.matrix)
    e1 = cq_montecarlo(q2, 2 * 10**5, 30.0, 0.2, seed=8)
    e2 = cq_montecarlo(Q1, 2 * 10**5, 30.0, 0.2 / c, seed=21)
    err = math.hypot(c * e1.stderr, e2.stderr)
    assert abs(c * e1.value - e2.value) <= 3.0 * err


def test_montecarlo_reproducible():
    e1 = cq_montecarlo(Q0, 10**5, 50.0, 0.2, seed=3)
    e2 = cq_montecarlo(Q0, 10**5, 50.0, 0.2, seed=3)
    assert e1 == e2
