"""Exceptional rational lines and planes of a form, the special count they carry,
and rational approximants built from almost-null vectors.

A rational line spanned by a primitive v is (rho, A, t)-exceptional when
||v|| <= e^(rho t) and |Q(v)| <= e^(-A rho t); a rational plane is exceptional
when its primitive covector w1 ^ w2 is exceptional for the dual form.  Heights
use the max norm.  Nearly-rational forms concentrate excess solutions on such
subspaces; the special count R_T measures that excess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (BudgetExceeded, CoplanarInput, DomainError,
                     IntegralizationError, SingularBasis)
from .lattice import _quad_int_range, collect_shell_points
from .qform import QForm, dual, evaluate, evaluate_pair


@dataclass(frozen=True)
class ExceptionalLine:
    """Primitive direction vector with witnesses (height, |Q(v)|)."""

    vector: tuple
    height: float
    value: float


@dataclass(frozen=True)
class ExceptionalPlane:
    """Primitive covector u = w1 ^ w2 with a reduced basis of the plane."""

    covector: tuple
    basis: tuple          # (w1, w2) integer basis of the plane's lattice
    heights: tuple        # (||w1||, ||w2||) max-norm heights
    dual_value: float     # |Q*(u)|


@dataclass(frozen=True)
class ExceptionalSet:
    lines: tuple
    planes: tuple
    params: tuple         # (rho, A, t)

    @property
    def is_empty(self) -> bool:
        return not self.lines and not self.planes

    def over_budget(self) -> bool:
        """More than 4 lines or planes signals rational proximity of the form."""
        return len(self.lines) > 4 or len(self.planes) > 4


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    for x in v:
        if x != 0:
            return v if x > 0 else -v
    return v


def _check_budget(rho: float, t: float):
    if rho * t > math.log(1e6):
        raise BudgetExceeded("height budget e^(rho t) exceeds 1e6")
    if rho <= 0 or t <= 0:
        raise DomainError("rho and t must be positive")


def find_exceptional_lines(q: QForm, rho: float, A: float, t: float) -> ExceptionalSet:
    """All primitive v with ||v||_inf <= e^(rho t), |Q(v)| <= e^(-A rho t),
    sign-normalized and deduplicated by line."""
    _check_budget(rho, t)
    height = math.exp(rho * t)
    eps = math.exp(-A * rho * t)
    if height < 1.0:
        return ExceptionalSet((), (), (rho, A, t))
    pts = collect_shell_points(q, -eps, eps, height, primitive_only=True,
                               norm_kind="max")
    lines = []
    seen = set()
    for v in pts:
        vv = _sign_normalize(v)
        key = tuple(int(x) for x in vv)
        if key in seen:
            continue
        seen.add(key)
        lines.append(ExceptionalLine(key, float(np.max(np.abs(vv))),
                                     abs(evaluate(q, key))))
    lines.sort(key=lambda e: (e.height, e.vector))
    return ExceptionalSet(tuple(lines), (), (rho, A, t))


def _kernel_basis(u: np.ndarray):
    """Integer basis (w1, w2) of {x in Z^3: u . x = 0} for primitive u.

    Column-reduces u to (g, 0, 0) by integer operations; the last two columns
    of the accumulated unimodular matrix span the kernel.  The pair is then
    Lagrange-reduced in the plane.
    """
    u = [int(x) for x in u]
    U = np.eye(3, dtype=np.int64)
    r = list(u)
    # fold r[1] and r[2] into r[0] by gcd steps
    for j in (1, 2):
        while r[j] != 0:
            if r[0] == 0:
                r[0], r[j] = r[j], 0
                U[:, [0, j]] = U[:, [j, 0]]
                break
            qj = r[j] // r[0]
            r[j] -= qj * r[0]
            U[:, j] -= qj * U[:, 0]
            if r[j] != 0:
                r[0], r[j] = r[j], r[0]
                U[:, [0, j]] = U[:, [j, 0]]
    w1, w2 = U[:, 1].copy(), U[:, 2].copy()
    # 2-D Lagrange reduction for short witnesses
    for _ in range(64):
        if w1 @ w1 > w2 @ w2:
            w1, w2 = w2, w1
        denom = int(w1 @ w1)
        if denom == 0:
            break
        mu = round((w2 @ w1) / denom)
        if mu == 0:
            break
        w2 = w2 - mu * w1
    return w1, w2


def find_exceptional_planes(q: QForm, rho: float, A: float, t: float) -> ExceptionalSet:
    """Exceptional planes of q: exceptional lines of the dual form, each
    completed to an integer basis (w1, w2) of the plane u . x = 0."""
    _check_budget(rho, t)
    qd = dual(q)
    covs = find_exceptional_lines(qd, rho, A, t)
    planes = []
    for line in covs.lines:
        u = np.array(line.vector, dtype=np.int64)
        w1, w2 = _kernel_basis(u)
        wedge = np.cross(w1, w2)
        if not (np.array_equal(wedge, u) or np.array_equal(wedge, -u)):
            raise SingularBasis("kernel basis does not wedge to the covector")
        planes.append(ExceptionalPlane(
            tuple(int(x) for x in u),
            (tuple(int(x) for x in w1), tuple(int(x) for x in w2)),
            (float(np.max(np.abs(w1))), float(np.max(np.abs(w2)))),
            abs(evaluate(qd, line.vector))))
    return ExceptionalSet((), tuple(planes), (rho, A, t))


def detect_exceptional(q: QForm, rho: float, A: float, t: float) -> ExceptionalSet:
    """Lines and planes in one set."""
    lines = find_exceptional_lines(q, rho, A, t)
    planes = find_exceptional_planes(q, rho, A, t)
    return ExceptionalSet(lines.lines, planes.planes, (rho, A, t))


# ---------------------------------------------------------------------------
# special count
# ---------------------------------------------------------------------------

def _line_points(q: QForm, v0: np.ndarray, a: float, b: float, T: float,
                 norm_kind: str):
    """Lattice points n v0 (n != 0) with ||n v0|| <= T and a <= Q(n v0) <= b."""
    v0 = np.asarray(v0, dtype=np.int64)
    if norm_kind == "euclidean":
        nmax = int(math.floor(T / math.sqrt(float(v0 @ v0)) + 1e-12))
    else:
        nmax = int(math.floor(T / np.max(np.abs(v0)) + 1e-12))
    if nmax < 1:
        return []
    qv = evaluate(q, [int(x) for x in v0])
    ns = np.arange(1, nmax + 1, dtype=np.int64)
    vals = float(qv) * ns.astype(float) ** 2
    keep = ns[(vals >= a) & (vals <= b)]
    out = []
    for n in keep:
        out.append(tuple(int(n) * int(x) for x in v0))
        out.append(tuple(-int(n) * int(x) for x in v0))
    return out


def _plane_points(q: QForm, w1, w2, a: float, b: float, T: float,
                  norm_kind: str):
    """Lattice points m w1 + n w2 != 0 in the window, via a 2-D fiber sweep."""
    W = np.stack([np.asarray(w1, dtype=np.int64),
                  np.asarray(w2, dtype=np.int64)], axis=1)  # 3x2
    B = q.matrix
    Bp = W.T.astype(float) @ B @ W.astype(float)   # restricted binary form
    Gp = (W.T @ W).astype(float)                    # ball Gram (pos. definite)
    T2 = T * T
    mmax = int(math.floor(T * math.sqrt(np.linalg.inv(Gp)[0, 0]) + 1e-9)) + 1
    out = []
    for m in range(-mmax, mmax + 1):
        mf = float(m)
        if norm_kind == "euclidean":
            c2 = Gp[1, 1]
            c1 = 2.0 * Gp[0, 1] * mf
            c0 = Gp[0, 0] * mf * mf - T2
            lo, hi = _quad_int_range(c2, c1, c0)
            lo, hi = float(lo), float(hi)
        else:
            lo, hi = -np.inf, np.inf
            feas = True
            for i in range(3):
                c1v, c2v = int(W[i, 0]), int(W[i, 1])
                off = c1v * mf
                if c2v == 0:
                    feas = feas and abs(off) <= T
                    continue
                lo_i = (-T - off) / c2v
                hi_i = (T - off) / c2v
                if c2v < 0:
                    lo_i, hi_i = hi_i, lo_i
                lo = max(lo, math.ceil(lo_i - 1e-9))
                hi = min(hi, math.floor(hi_i + 1e-9))
            if not feas or lo > hi:
                continue
        if lo > hi:
            continue
        alpha = Bp[1, 1]
        beta = 2.0 * Bp[0, 1] * mf
        gamma = Bp[0, 0] * mf * mf
        aa, bb = a, b
        if alpha == 0.0:
            ns = np.arange(lo, hi + 1)
            vals = beta * ns + gamma
            ns = ns[(vals >= aa) & (vals <= bb)]
        else:
            if alpha < 0.0:
                alpha, beta, gamma, aa, bb = -alpha, -beta, -gamma, -b, -a
            lob, hib = _quad_int_range(alpha, np.array([beta]),
                                       np.array([gamma - bb]))
            loa, hia = _quad_int_range(alpha, np.array([beta]),
                                       np.array([gamma - aa]), strict=True)
            l1, u1 = max(lo, float(lob[0])), min(hi, float(hib[0]))
            l2, u2 = max(lo, float(loa[0])), min(hi, float(hia[0]))
            if l1 > u1:
                continue
            if l2 > u2 or u2 < l1 or l2 > u1:
                ns = np.arange(l1, u1 + 1)
            else:
                ns = np.concatenate([np.arange(l1, min(u1, l2 - 1) + 1),
                                     np.arange(max(l1, u2 + 1), u1 + 1)])
        for n in ns:
            if m == 0 and n == 0:
                continue
            vec = m * W[:, 0] + int(n) * W[:, 1]
            # max-norm check already enforced; euclidean enforced by range
            out.append(tuple(int(x) for x in vec))
    return out


def special_count(q: QForm, exc: ExceptionalSet, a: float, b: float, T: float,
                  norm_kind: str = "euclidean") -> int:
    """Count of nonzero lattice points on the union of the listed lines and
    planes with ||v|| <= T and a <= Q(v) <= b.

    Points are enumerated per subspace and deduplicated exactly, which handles
    lines lying inside listed planes and plane-plane intersection lines."""
    if exc.is_empty:
        return 0
    pts = set()
    for line in exc.lines:
        pts.update(_line_points(q, np.array(line.vector), a, b, T, norm_kind))
    for plane in exc.planes:
        pts.update(_plane_points(q, plane.basis[0], plane.basis[1],
                                 a, b, T, norm_kind))
    return len(pts)


# ---------------------------------------------------------------------------
# rational approximants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalApproximant:
    """Integral form P with scaling lambda = sign(det P) |det P|^(-1/3) and the
    achieved distance ||Q - lambda P|| (max-abs entry)."""

    P: np.ndarray
    lam: float
    distance: float

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.int64)
        if P.shape != (3, 3) or not np.array_equal(P, P.T):
            raise DomainError("P must be an integer symmetric 3x3 matrix")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    def to_dict(self) -> dict:
        return {"P": self.P.tolist(), "lambda": self.lam,
                "distance": self.distance}


def _int_det3(M) -> int:
    a, b, c = (int(M[0][0]), int(M[0][1]), int(M[0][2]))
    d, e, f = (int(M[1][0]), int(M[1][1]), int(M[1][2]))
    g, h, i = (int(M[2][0]), int(M[2][1]), int(M[2][2]))
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def _signed_lambda(detP: int) -> float:
    return math.copysign(abs(detP) ** (-1.0 / 3.0), detP)


def _distance(q: QForm, P: np.ndarray, lam: float) -> float:
    return float(np.max(np.abs(q.matrix - lam * P.astype(float))))


def rational_from_five(q: QForm, v1, v2, v3, v4, v5,
                       snap_tol: float = 1e-3) -> RationalApproximant:
    """Integral approximant from five almost-null integer vectors.

    No three of the vectors may be coplanar.  Writing Q in the basis
    gamma = (v1, v2, v3) gives a Gram matrix with small diagonal whose
    off-diagonal vector is pinned, up to scale, by the two linear conditions
    coming from v4 and v5; clearing denominators of gamma^-1 v4, gamma^-1 v5
    yields an integer direction, the rescaled Gram matrix is snapped to the
    nearest integer matrix, and the result is pulled back through gamma.
    """
    vs = [np.asarray(v, dtype=np.int64) for v in (v1, v2, v3, v4, v5)]
    for i in range(5):
        for j in range(i + 1, 5):
            for kk in range(j + 1, 5):
                if _int_det3(np.stack([vs[i], vs[j], vs[kk]], axis=1)) == 0:
                    raise CoplanarInput(
                        f"vectors {i + 1}, {j + 1}, {kk + 1} are coplanar")
    gamma = np.stack(vs[:3], axis=1)
    detg = _int_det3(gamma)
    if detg == 0:
        raise SingularBasis("first three vectors are not a basis")

    # exact rational solve gamma x = v via the integer adjugate
    adj = np.array([[_cof(gamma, r, c) for r in range(3)] for c in range(3)],
                   dtype=np.int64)

    def solve(v):
        w = adj @ v
        return [Fraction(int(w[i]), detg) for i in range(3)]

    a4 = solve(vs[3])
    a5 = solve(vs[4])
    m4 = [a4[1] * a4[2], a4[0] * a4[2], a4[0] * a4[1]]
    m5 = [a5[1] * a5[2], a5[0] * a5[2], a5[0] * a5[1]]
    c = [m4[1] * m5[2] - m4[2] * m5[1],
         m4[2] * m5[0] - m4[0] * m5[2],
         m4[0] * m5[1] - m4[1] * m5[0]]
    if all(x == 0 for x in c):
        raise SingularBasis("direction conditions from v4, v5 are collinear")
    den = math.lcm(*(x.denominator for x in c))
    w = [int(x * den) for x in c]
    g = math.gcd(*(abs(x) for x in w))
    w = [x // g for x in w]

    exact_mode = q.exact is not None
    if exact_mode:
        bvals = [evaluate_pair(q, [int(x) for x in vs[1]], [int(x) for x in vs[2]]),
                 evaluate_pair(q, [int(x) for x in vs[0]], [int(x) for x in vs[2]]),
                 evaluate_pair(q, [int(x) for x in vs[0]], [int(x) for x in vs[1]])]
        dvals = [evaluate(q, [int(x) for x in v]) for v in vs[:3]]
        mu = sum(b * wi for b, wi in zip(bvals, [Fraction(x) for x in w])) / \
            sum(Fraction(x) ** 2 for x in w)
        if mu == 0:
            raise IntegralizationError("rescaling factor vanished")
        entries = {}
        offd = [(1, 2), (0, 2), (0, 1)]
        Pg = [[Fraction(0)] * 3 for _ in range(3)]
        for idx, (r, cc) in enumerate(offd):
            val = bvals[idx] / mu
            Pg[r][cc] = Pg[cc][r] = val
        for i in range(3):
            Pg[i][i] = dvals[i] / mu
        Pint = [[_snap_fraction(x, snap_tol) for x in row] for row in Pg]
        # pull back through gamma^-1 on both sides, then clear denominators
        Pback = [[sum(Fraction(int(adj[i][r]), detg) * Pint[i][j]
                      * Fraction(int(adj[j][cc]), detg)
                      for i in range(3) for j in range(3))
                  for cc in range(3)] for r in range(3)]
        den2 = math.lcm(*(x.denominator for row in Pback for x in row))
        Pmat = np.array([[int(x * den2) for x in row] for row in Pback],
                        dtype=np.int64)
        nz = [int(abs(x)) for x in Pmat.ravel() if x != 0]
        if not nz:
            raise IntegralizationError("approximant collapsed to zero")
        Pmat //= math.gcd(*nz)
    else:
        gf = gamma.astype(float)
        Bg = gf.T @ q.matrix @ gf
        bvec = np.array([Bg[1, 2], Bg[0, 2], Bg[0, 1]])
        warr = np.array(w, dtype=float)
        mu = float(bvec @ warr) / float(warr @ warr)
        if mu == 0.0:
            raise IntegralizationError("rescaling factor vanished")
        Pg = Bg / mu
        Pground = np.rint(Pg)
        if np.max(np.abs(Pg - Pground)) > snap_tol:
            raise IntegralizationError(
                f"rescaled Gram matrix off integers by "
                f"{np.max(np.abs(Pg - Pground)):g}")
        # pull back with exact rational arithmetic on the integer snap
        Pint = [[Fraction(int(Pground[i][j])) for j in range(3)] for i in range(3)]
        Pback = [[sum(Fraction(int(adj[i][r]), detg) * Pint[i][j]
                      * Fraction(int(adj[j][cc]), detg)
                      for i in range(3) for j in range(3))
                  for cc in range(3)] for r in range(3)]
        den2 = math.lcm(*(x.denominator for row in Pback for x in row))
        Pmat = np.array([[int(x * den2) for x in row] for row in Pback],
                        dtype=np.int64)
        nz = [int(abs(x)) for x in Pmat.ravel() if x != 0]
        if not nz:
            raise IntegralizationError("approximant collapsed to zero")
        Pmat //= math.gcd(*nz)

    detP = _int_det3(Pmat)
    if detP == 0:
        raise IntegralizationError("approximant is singular")
    lam = _signed_lambda(detP)
    return RationalApproximant(Pmat, lam, _distance(q, Pmat, lam))


def _cof(M, r, c) -> int:
    rows = [i for i in range(3) if i != r]
    cols = [j for j in range(3) if j != c]
    a = int(M[rows[0], cols[0]]) * int(M[rows[1], cols[1]])
    b = int(M[rows[0], cols[1]]) * int(M[rows[1], cols[0]])
    return (-1) ** (r + c) * (a - b)


def _snap_fraction(x: Fraction, tol: float) -> Fraction:
    nearest = Fraction(round(x))
    if abs(x - nearest) > tol:
        raise IntegralizationError(f"entry {float(x):g} not within {tol} of an integer")
    return nearest


def diophantine_quality(q: QForm, N: int) -> RationalApproximant:
    """Exhaustive minimizer of ||Q - lambda P|| over integral symmetric P with
    max-abs entry <= N and det P != 0, lambda = sign(det P) |det P|^(-1/3).

    Scan order is lexicographic in (p11, p22, p33, p12, p13, p23) and the first
    minimizer is kept, so results are reproducible."""
    if N < 1:
        raise DomainError("need N >= 1: no nonzero integral form otherwise")
    if N > 12:
        raise BudgetExceeded(
            "exhaustive search capped at N <= 12; use rational_from_five on "
            "almost-null vectors for larger heights")
    B = q.matrix
    rng = np.arange(-N, N + 1, dtype=np.int64)
    p12, p13, p23 = np.meshgrid(rng, rng, rng, indexing="ij")
    p12 = p12.ravel()
    p13 = p13.ravel()
    p23 = p23.ravel()
    best = (math.inf, None, 0.0)
    for d11 in rng:
        for d22 in rng:
            for d33 in rng:
                det = (d11 * (d22 * d33 - p23 * p23)
                       - p12 * (p12 * d33 - p23 * p13)
                       + p13 * (p12 * p23 - d22 * p13))
                ok = det != 0
                if not ok.any():
                    continue
                detf = np.where(ok, det, 1)
                lam = np.copysign(np.abs(detf).astype(float) ** (-1.0 / 3.0),
                                  detf)
                dist = np.abs(B[0, 0] - lam * d11)
                np.maximum(dist, np.abs(B[1, 1] - lam * d22), out=dist)
                np.maximum(dist, np.abs(B[2, 2] - lam * d33), out=dist)
                np.maximum(dist, np.abs(B[0, 1] - lam * p12), out=dist)
                np.maximum(dist, np.abs(B[0, 2] - lam * p13), out=dist)
                np.maximum(dist, np.abs(B[1, 2] - lam * p23), out=dist)
                dist = np.where(ok, dist, np.inf)
                i = int(np.argmin(dist))
                if dist[i] < best[0]:
                    P = np.array([[d11, p12[i], p13[i]],
                                  [p12[i], d22, p23[i]],
                                  [p13[i], p23[i], d33]], dtype=np.int64)
                    best = (float(dist[i]), P, float(lam[i]))
    dist, P, lam = best
    return RationalApproximant(P, lam, dist)
