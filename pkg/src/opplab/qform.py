"""Ternary quadratic forms, the model form 2xz - y^2, duals, and SL3 factorizations.

A form is stored by its symmetric Gram matrix B, so Q(v) = v^T B v.  The model
form q0(x, y, z) = 2xz - y^2 has Gram matrix B0 = [[0,0,1],[0,-1,0],[1,0,0]],
det B0 = 1 and signature (1, 2).  Every det-1 form of that signature factors as
Q = q0 o g_Q for some g_Q in SL3(R).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DegenerateForm, DomainError, NotIndefinite, NotNormalized

#: Gram matrix of the model form 2xz - y^2.
B0 = np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])

#: absolute tolerance for group identities on 3x3 matrices.
GROUP_TOL = 1e-10

#: relative tolerance for factorization round trips.
FACTOR_TOL = 1e-8


def _as_exact_matrix(exact):
    """Validate a 3x3 matrix of Fractions (list of lists)."""
    rows = [[Fraction(x) for x in row] for row in exact]
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise DomainError("exact matrix must be 3x3")
    for i in range(3):
        for j in range(3):
            if rows[i][j] != rows[j][i]:
                raise DomainError("exact matrix must be symmetric")
    return rows


@dataclass(frozen=True)
class QForm:
    """A real ternary quadratic form with optional exact rational coefficients."""

    matrix: np.ndarray
    exact: list | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise DomainError("form matrix must be 3x3")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.exact is not None:
            rows = _as_exact_matrix(self.exact)
            img = np.array([[float(x) for x in row] for row in rows])
            if not np.array_equal(img, m):
                raise DomainError("exact matrix does not match float matrix")
            object.__setattr__(self, "exact", rows)

    @property
    def norm_value(self) -> float:
        """Max-abs entry of the Gram matrix."""
        return float(np.max(np.abs(self.matrix)))

    def content_hash(self) -> str:
        """Canonical hash of the form (17 significant digits, row-major)."""
        canon = ",".join(f"{x:.17g}" for x in self.matrix.ravel())
        return hashlib.sha256(canon.encode()).hexdigest()

    def __repr__(self):
        return f"QForm({self.matrix.tolist()!r})"


@dataclass(frozen=True)
class GroupElement:
    """A 3x3 real matrix with det within 1e-10 of 1."""

    matrix: np.ndarray
    det_tolerance: float = GROUP_TOL

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise DomainError("group element must be 3x3")
        if abs(np.linalg.det(m) - 1.0) > self.det_tolerance:
            raise DomainError(f"matrix determinant {np.linalg.det(m)} not within "
                              f"{self.det_tolerance} of 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(np.eye(3))

    def __matmul__(self, other):
        if isinstance(other, GroupElement):
            return GroupElement(self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    def inv(self) -> "GroupElement":
        return GroupElement(np.linalg.inv(self.matrix))


def _mat(g) -> np.ndarray:
    return g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=float)


def from_coefficients(c11, c22, c33, c12, c13, c23, exact: bool = False) -> QForm:
    """Assemble the form c11 x^2 + c22 y^2 + c33 z^2 + c12 xy + c13 xz + c23 yz.

    Off-diagonal Gram entries are half the cross coefficients.  With
    exact=True the coefficients are read as rationals and kept exactly.
    """
    coeffs = [c11, c22, c33, c12, c13, c23]
    if all(float(c) == 0.0 for c in coeffs):
        raise DegenerateForm("all coefficients are zero")
    if exact:
        f = [Fraction(c) for c in coeffs]
        rows = [[f[0], f[3] / 2, f[4] / 2],
                [f[3] / 2, f[1], f[5] / 2],
                [f[4] / 2, f[5] / 2, f[2]]]
        m = [[float(x) for x in row] for row in rows]
        return QForm(np.array(m), exact=rows)
    c11, c22, c33, c12, c13, c23 = (float(c) for c in coeffs)
    m = np.array([[c11, c12 / 2, c13 / 2],
                  [c12 / 2, c22, c23 / 2],
                  [c13 / 2, c23 / 2, c33]])
    return QForm(m)


def q0_form(exact: bool = True) -> QForm:
    """The model form 2xz - y^2."""
    return from_coefficients(0, -1, 0, 0, 2, 0, exact=exact)


def evaluate(q: QForm, v):
    """Q(v) = v^T B v; exact Fraction result when both form and v are exact."""
    if q.exact is not None and _is_exact_vector(v):
        vv = [Fraction(x) for x in v]
        return sum(vv[i] * q.exact[i][j] * vv[j] for i in range(3) for j in range(3))
    v = np.asarray(v, dtype=float)
    return float(v @ q.matrix @ v)


def evaluate_pair(q: QForm, u, v):
    """Polar form Q(u, v) = u^T B v (exact when everything is exact)."""
    if q.exact is not None and _is_exact_vector(u) and _is_exact_vector(v):
        uu = [Fraction(x) for x in u]
        vv = [Fraction(x) for x in v]
        return sum(uu[i] * q.exact[i][j] * vv[j] for i in range(3) for j in range(3))
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(u @ q.matrix @ v)


def _is_exact_vector(v) -> bool:
    return all(isinstance(x, (int, np.integer, Fraction)) for x in v)


def gradient(q: QForm, v):
    """grad Q(v) = 2 B v (exact when form and v are exact)."""
    if q.exact is not None and _is_exact_vector(v):
        vv = [Fraction(x) for x in v]
        return [2 * sum(q.exact[i][j] * vv[j] for j in range(3)) for i in range(3)]
    v = np.asarray(v, dtype=float)
    return 2.0 * (q.matrix @ v)


def signature(q: QForm) -> tuple[int, int]:
    """(positives, negatives) eigenvalue counts; raises DegenerateForm if singular."""
    w = np.linalg.eigvalsh(q.matrix)
    scale = np.max(np.abs(w))
    if scale == 0.0 or np.min(np.abs(w)) < 1e-12 * scale:
        raise DegenerateForm("form matrix is singular")
    return int(np.sum(w > 0)), int(np.sum(w < 0))


def _rational_cbrt(x: Fraction):
    """Exact cube root of a positive rational, or None."""
    def icbrt(n: int):
        r = round(n ** (1.0 / 3.0))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c**3 == n:
                return c
        return None
    p = icbrt(x.numerator)
    q = icbrt(x.denominator)
    if p is None or q is None:
        return None
    return Fraction(p, q)


def normalize_det(q: QForm) -> tuple[QForm, float]:
    """Rescale so det B = 1 and the signature is (1, 2); returns (form, scale)."""
    pos, neg = signature(q)
    if (pos, neg) not in ((1, 2), (2, 1)):
        raise NotIndefinite(f"signature {(pos, neg)} is not indefinite ternary")
    det = float(np.linalg.det(q.matrix))
    s = abs(det) ** (-1.0 / 3.0)
    if (pos, neg) == (2, 1):
        s = -s
    exact = None
    if q.exact is not None:
        dexact = _exact_det(q.exact)
        se = _rational_cbrt(abs(dexact))
        if se is not None:
            se = 1 / se if (pos, neg) == (1, 2) else -1 / se
            exact = [[x * se for x in row] for row in q.exact]
            s = float(se)
    m = s * q.matrix
    if exact is not None:
        m = np.array([[float(x) for x in row] for row in exact])
    return QForm(m, exact=exact), s


def is_normalized(q: QForm, tol: float = 1e-12) -> bool:
    try:
        pos, neg = signature(q)
    except DegenerateForm:
        return False
    return (pos, neg) == (1, 2) and abs(np.linalg.det(q.matrix) - 1.0) <= max(tol, 1e-9)


def _exact_det(rows) -> Fraction:
    a, b, c = rows[0]
    d, e, f = rows[1]
    g, h, i = rows[2]
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


#: fixed orthogonal change of basis with S^T B0 S = diag(1, -1, -1).
_S = np.array([[1 / np.sqrt(2), 0.0, 1 / np.sqrt(2)],
               [0.0, 1.0, 0.0],
               [1 / np.sqrt(2), 0.0, -1 / np.sqrt(2)]])


def factor_gq(q: QForm) -> GroupElement:
    """Return g in SL3(R) with g^T B0 g = B, i.e. Q = q0 o g.

    Construction: eigendecompose B = O diag(mu1, -mu2, -mu3) O^T and return
    S diag(sqrt(mu_i)) O^T, flipping one column of O if the determinant is -1.
    """
    try:
        pos, neg = signature(q)
    except DegenerateForm:
        raise NotNormalized("form is singular")
    if (pos, neg) != (1, 2):
        raise NotIndefinite(f"signature {(pos, neg)}; normalize first")
    if abs(np.linalg.det(q.matrix) - 1.0) > 1e-9:
        raise NotNormalized("det B is not 1; call normalize_det first")
    if np.array_equal(q.matrix, B0):
        return GroupElement.identity()
    w, O = np.linalg.eigh(q.matrix)
    order = np.argsort(-w)  # positive eigenvalue first
    w = w[order]
    O = O[:, order]
    mus = np.array([w[0], -w[1], -w[2]])
    D = np.diag(np.sqrt(mus))
    g = _S @ D @ O.T
    if np.linalg.det(g) < 0:
        O[:, 0] = -O[:, 0]
        g = _S @ D @ O.T
    residual = np.max(np.abs(g.T @ B0 @ g - q.matrix))
    if residual > GROUP_TOL:
        raise NotNormalized(f"factorization residual {residual:g} too large")
    return GroupElement(g)


def dual(q: QForm) -> QForm:
    """The form with Gram matrix B^{-1}; acts on covectors w1 ^ w2."""
    det = np.linalg.det(q.matrix)
    if abs(det) < 1e-12:
        raise DegenerateForm("cannot dualize a singular form")
    exact = None
    if q.exact is not None:
        exact = _exact_inverse(q.exact)
    if exact is not None:
        m = np.array([[float(x) for x in row] for row in exact])
    else:
        m = np.linalg.inv(q.matrix)
        m = 0.5 * (m + m.T)
    return QForm(m, exact=exact)


def _exact_inverse(rows):
    det = _exact_det(rows)
    if det == 0:
        raise DegenerateForm("exact matrix is singular")
    a, b, c = rows[0]
    d, e, f = rows[1]
    g, h, i = rows[2]
    cof = [[e * i - f * h, c * h - b * i, b * f - c * e],
           [f * g - d * i, a * i - c * g, c * d - a * f],
           [d * h - e * g, b * g - a * h, a * e - b * d]]
    return [[cof[r][s] / det for s in range(3)] for r in range(3)]


def wedge_dual(g) -> GroupElement:
    """g* = (g^T)^{-1}; satisfies (g v1) x (g v2) = g* (v1 x v2) for det g = 1."""
    m = _mat(g)
    if abs(np.linalg.det(m) - 1.0) > GROUP_TOL:
        raise DomainError("wedge dual requires det g = 1")
    return GroupElement(np.linalg.inv(m).T)


def load_form(source) -> QForm:
    """Read a form from a JSON file path or a parsed dict.

    Accepted shapes: {"coeffs": [c11,c22,c33,c12,c13,c23]} or
    {"matrix": [[...],[...],[...]]}, optionally with
    {"exact": {"num": [[...]], "den": d}} for a rational Gram matrix.
    """
    if isinstance(source, (str, bytes)):
        with open(source) as fh:
            data = json.load(fh)
    else:
        data = source
    exact = None
    if "exact" in data:
        num = data["exact"]["num"]
        den = int(data["exact"].get("den", 1))
        exact = [[Fraction(int(num[i][j]), den) for j in range(3)] for i in range(3)]
    if exact is not None:
        m = np.array([[float(x) for x in row] for row in exact])
        return QForm(m, exact=exact)
    if "coeffs" in data:
        c = data["coeffs"]
        if len(c) != 6:
            raise DomainError("coeffs must have 6 entries")
        return from_coefficients(*c)
    if "matrix" in data:
        return QForm(np.array(data["matrix"], dtype=float))
    raise DomainError("form file needs 'coeffs', 'matrix', or 'exact'")
