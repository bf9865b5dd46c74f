"""Form construction, evaluation, normalization, factorization, duality."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

import opplab as op
from opplab import (B0, DegenerateForm, DomainError, NotIndefinite, QForm,
                    dual, evaluate, factor_gq, from_coefficients, gradient,
                    load_form, normalize_det, q0_form, signature, wedge_dual)


def random_sl3(rng):
    while True:
        m = rng.standard_normal((3, 3))
        d = np.linalg.det(m)
        if abs(d) > 0.1:
            if d < 0:
                m[:, 0] = -m[:, 0]
                d = -d
            return m / d ** (1.0 / 3.0)


def random_indefinite(rng):
    while True:
        m = rng.standard_normal((3, 3))
        q = QForm(0.5 * (m + m.T))
        try:
            pos, neg = signature(q)
        except DegenerateForm:
            continue
        if (pos, neg) in ((1, 2), (2, 1)):
            return normalize_det(q)[0]


def test_from_coefficients_model_form():
    q = from_coefficients(0, -1, 0, 0, 2, 0)
    assert np.array_equal(q.matrix, B0)


def test_from_coefficients_identity():
    q = from_coefficients(1, 1, 1, 0, 0, 0)
    assert np.array_equal(q.matrix, np.eye(3))


def test_from_coefficients_zero_rejected():
    with pytest.raises(DegenerateForm):
        from_coefficients(0, 0, 0, 0, 0, 0)


def test_evaluate_examples():
    q0 = q0_form()
    assert evaluate(q0, (1, 0, 1)) == 2
    assert evaluate(q0, (0, 1, 0)) == -1
    assert evaluate(q0, (1, 2, 2)) == 0


def test_evaluate_exact_is_rational():
    q0 = q0_form()
    val = evaluate(q0, (Fraction(1, 3), Fraction(1, 2), Fraction(2, 5)))
    assert val == 2 * Fraction(1, 3) * Fraction(2, 5) - Fraction(1, 4)


def test_gradient_examples():
    q0 = q0_form(exact=False)
    assert np.allclose(gradient(q0, (1.0, 2.0, 3.0)), [6.0, -4.0, 2.0])
    assert np.allclose(gradient(q0, (0.0, 0.0, 0.0)), [0.0, 0.0, 0.0])
    qd = from_coefficients(1, -1, -1, 0, 0, 0)
    assert np.allclose(gradient(qd, (1.0, 1.0, 1.0)), [2.0, -2.0, -2.0])


def test_gradient_linear_in_exact_mode():
    q0 = q0_form()
    u, v = (1, 2, 3), (4, -5, 6)
    gu = gradient(q0, u)
    gv = gradient(q0, v)
    guv = gradient(q0, (5, -3, 9))
    assert [a + b for a, b in zip(gu, gv)] == guv


def test_signature_examples():
    assert signature(q0_form()) == (1, 2)
    assert signature(from_coefficients(1, 1, 1, 0, 0, 0)) == (3, 0)
    q = from_coefficients(math.sqrt(2), -1, -1 / math.sqrt(2), 0, 0, 0)
    assert signature(q) == (1, 2)


def test_signature_singular_rejected():
    with pytest.raises(DegenerateForm):
        signature(from_coefficients(1, 1, 0, 0, 0, 0))


def test_normalize_det_examples():
    q0 = q0_form()
    qn, s = normalize_det(q0)
    assert s == 1.0 and np.array_equal(qn.matrix, B0)

    q2 = QForm(2.0 * B0, exact=[[Fraction(0), Fraction(0), Fraction(2)],
                                [Fraction(0), Fraction(-2), Fraction(0)],
                                [Fraction(2), Fraction(0), Fraction(0)]])
    qn, s = normalize_det(q2)
    assert s == 0.5 and np.array_equal(qn.matrix, B0)
    assert qn.exact is not None

    qn, s = normalize_det(QForm(-B0))
    assert s == -1.0 and np.array_equal(qn.matrix, B0)


def test_normalize_det_idempotent():
    rng = np.random.default_rng(5)
    for _ in range(10):
        q = random_indefinite(rng)
        qn, s = normalize_det(q)
        assert abs(s - 1.0) < 1e-12
        assert np.max(np.abs(qn.matrix - q.matrix)) < 1e-12


def test_normalize_det_definite_rejected():
    with pytest.raises(NotIndefinite):
        normalize_det(from_coefficients(1, 1, 1, 0, 0, 0))


def test_factor_gq_model_form_is_identity():
    g = factor_gq(q0_form())
    assert np.array_equal(g.matrix, np.eye(3))


def test_factor_gq_diagonal_residual():
    q, _ = normalize_det(from_coefficients(math.sqrt(2), -1,
                                           -1 / math.sqrt(2), 0, 0, 0))
    g = factor_gq(q)
    res = np.max(np.abs(g.matrix.T @ B0 @ g.matrix - q.matrix))
    assert res <= 1e-10
    assert abs(np.linalg.det(g.matrix) - 1.0) <= 1e-10


def test_factor_gq_definite_rejected():
    with pytest.raises((NotIndefinite, op.NotNormalized)):
        factor_gq(from_coefficients(1, 1, 1, 0, 0, 0))


def test_factor_gq_roundtrip_random():
    rng = np.random.default_rng(11)
    for _ in range(20):
        q = random_indefinite(rng)
        g = factor_gq(q).matrix
        for _ in range(5):
            v = rng.standard_normal(3) * 3
            lhs = evaluate(q, v)
            gv = g @ v
            rhs = 2 * gv[0] * gv[2] - gv[1] ** 2
            assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(lhs))


def test_dual_examples():
    q0 = q0_form()
    assert np.array_equal(dual(q0).matrix, B0)
    q = from_coefficients(math.sqrt(2), -1, -1 / math.sqrt(2), 0, 0, 0)
    qd = dual(q)
    expect = np.diag([1 / math.sqrt(2), -1.0, -math.sqrt(2)])
    assert np.max(np.abs(qd.matrix - expect)) < 1e-12


def test_dual_inverse_and_involution():
    rng = np.random.default_rng(17)
    for _ in range(10):
        q = random_indefinite(rng)
        qd = dual(q)
        assert np.max(np.abs(qd.matrix @ q.matrix - np.eye(3))) < 1e-10
        assert np.max(np.abs(dual(qd).matrix - q.matrix)) < 1e-10


def test_wedge_dual_examples():
    assert np.array_equal(wedge_dual(np.eye(3)).matrix, np.eye(3))
    at = np.diag([math.e ** 2, 1.0, math.e ** -2])
    assert np.max(np.abs(wedge_dual(at).matrix
                         - np.diag([math.e ** -2, 1.0, math.e ** 2]))) < 1e-12


def test_wedge_dual_cross_product_identity():
    rng = np.random.default_rng(23)
    for _ in range(20):
        g = random_sl3(rng)
        gs = wedge_dual(g).matrix
        v1 = rng.integers(-5, 6, 3).astype(float)
        v2 = rng.integers(-5, 6, 3).astype(float)
        lhs = np.cross(g @ v1, g @ v2)
        rhs = gs @ np.cross(v1, v2)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_wedge_dual_homomorphism():
    rng = np.random.default_rng(29)
    for _ in range(10):
        g, h = random_sl3(rng), random_sl3(rng)
        lhs = wedge_dual(g @ h).matrix
        rhs = wedge_dual(g).matrix @ wedge_dual(h).matrix
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_norm_value_and_hash():
    q0 = q0_form()
    assert q0.norm_value == 1.0
    assert q0.content_hash() == q0_form().content_hash()
    assert q0.content_hash() != from_coefficients(1, -1, -1, 0, 0, 0).content_hash()


def test_load_form(tmp_path):
    p = tmp_path / "form.json"
    p.write_text(json.dumps({"coeffs": [0, -1, 0, 0, 2, 0]}))
    assert np.array_equal(load_form(str(p)).matrix, B0)
    p.write_text(json.dumps({"matrix": B0.tolist()}))
    assert np.array_equal(load_form(str(p)).matrix, B0)
    p.write_text(json.dumps({"exact": {"num": [[0, 0, 1], [0, -1, 0], [1, 0, 0]],
                                       "den": 1}}))
    q = load_form(str(p))
    assert q.exact is not None and np.array_equal(q.matrix, B0)
    p.write_text(json.dumps({"nope": 1}))
    with pytest.raises(DomainError):
        load_form(str(p))
