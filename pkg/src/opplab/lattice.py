"""Integer-point counting in balls and value shells, shortest vectors, cusp functions.

The counting strategy fibers the lattice along one coordinate axis: for each
integer pair in the transverse plane, the window condition a <= Q(v) <= b and
the ball condition reduce to quadratic inequalities in the fiber variable, each
of whose integer solution sets is computed exactly (closed-form roots plus an
integer endpoint re-check).  This is O(T^2) with O(1) work per fiber instead of
O(T^3) brute force.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._num import map_chunks, thread_count
from .errors import (BudgetExceeded, DegenerateForm, DomainError, NotNormalized,
                     OracleTooLarge)
from .qform import GroupElement, QForm, _mat, is_normalized, wedge_dual

NORM_KINDS = ("euclidean", "max")


@dataclass(frozen=True)
class CountResult:
    """Outcome of a shell/ball count."""

    T: float
    a: float
    b: float
    total: int
    primitive_only: bool
    norm_kind: str
    elapsed: float
    warning: str | None = None


@dataclass(frozen=True)
class LatticeVectorReport:
    """A lattice vector together with the norm of its image."""

    vector: tuple
    image_norm: float
    is_primitive: bool


# ---------------------------------------------------------------------------
# coordinate frame: fiber axis selection and unimodular shear fallback
# ---------------------------------------------------------------------------

_ELEMENTARY_SHEARS = []
for _i in range(3):
    for _j in range(3):
        if _i != _j:
            _g = np.eye(3, dtype=np.int64)
            _g[_i, _j] = 1
            _ELEMENTARY_SHEARS.append(_g)


def _frame(B: np.ndarray):
    """Unimodular M and Bw = M^T B M with |Bw[2,2]| = max diag, fiber axis last.

    Counts over v = M w are counts over w; a shear is inserted only when every
    diagonal entry is numerically degenerate.
    """
    M = np.eye(3, dtype=np.int64)
    Bc = B
    if np.max(np.abs(np.diag(Bc))) < 1e-6:
        best = None
        for g in _ELEMENTARY_SHEARS:
            Bs = g.T.astype(float) @ B @ g.astype(float)
            cand = float(np.max(np.abs(np.diag(Bs))))
            if best is None or cand > best[0]:
                best = (cand, g, Bs)
        _, M, Bc = best
        if np.max(np.abs(np.diag(Bc))) < 1e-6:
            return None, None  # caller falls back to brute force
    k = int(np.argmax(np.abs(np.diag(Bc))))
    perm = [i for i in range(3) if i != k] + [k]
    P = np.zeros((3, 3), dtype=np.int64)
    for col, src in enumerate(perm):
        P[src, col] = 1
    M = M @ P
    Bw = M.T.astype(float) @ B @ M.astype(float)
    return M, Bw


# ---------------------------------------------------------------------------
# exact integer ranges of quadratic / linear inequalities
# ---------------------------------------------------------------------------

def _quad_int_range(c2: float, c1, c0, strict: bool = False):
    """Integer range [lo, hi] of {z: c2 z^2 + c1 z + c0 <= 0} (or < 0), c2 > 0.

    c1, c0 are arrays over fibers.  Float roots are corrected by evaluating the
    quadratic at candidate boundary integers, so the range is exact with
    respect to the float predicate.  Empty ranges have lo > hi.
    """
    c1 = np.asarray(c1, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    disc = c1 * c1 - 4.0 * c2 * c0
    s = np.sqrt(np.maximum(disc, 0.0))
    lo = np.ceil((-c1 - s) / (2.0 * c2))
    hi = np.floor((-c1 + s) / (2.0 * c2))

    if strict:
        def pred(t):
            return (c2 * t + c1) * t + c0 < 0.0
    else:
        def pred(t):
            return (c2 * t + c1) * t + c0 <= 0.0

    for _ in range(2):
        lo = np.where(pred(lo - 1.0), lo - 1.0, lo)
        hi = np.where(pred(hi + 1.0), hi + 1.0, hi)
    for _ in range(2):
        shrink = (lo <= hi) & ~pred(lo)
        lo = np.where(shrink, lo + 1.0, lo)
        shrink = (lo <= hi) & ~pred(hi)
        hi = np.where(shrink, hi - 1.0, hi)
    # tangency rescue: float discriminant marginally negative
    empty = lo > hi
    if np.any(empty):
        vtx = np.round(-c1 / (2.0 * c2))
        hit = empty & pred(vtx)
        lo = np.where(hit, vtx, lo)
        hi = np.where(hit, vtx, hi)
    bad = lo > hi
    lo = np.where(bad, 0.0, lo)
    hi = np.where(bad, -1.0, hi)
    return lo, hi


def _value_ranges(Bw, x, y, a, b):
    """Integer fiber ranges of {q <= b} and {q < a} for q(z) = Q(x, y, z)."""
    B11, B22, B33 = Bw[0, 0], Bw[1, 1], Bw[2, 2]
    B12, B13, B23 = Bw[0, 1], Bw[0, 2], Bw[1, 2]
    alpha = B33
    beta = 2.0 * (B13 * x + B23 * y)
    gamma = B11 * x * x + 2.0 * B12 * x * y + B22 * y * y
    if alpha < 0.0:
        alpha, beta, gamma, a, b = -alpha, -beta, -gamma, -b, -a
    lob, hib = _quad_int_range(alpha, beta, gamma - b, strict=False)
    loa, hia = _quad_int_range(alpha, beta, gamma - a, strict=True)
    return lob, hib, loa, hia


def _ball_range_euclid(G, x, y, T2):
    """Integer fiber range of {z: ||M(x,y,z)||_2^2 <= T^2}."""
    c2 = G[2, 2]
    c1 = 2.0 * (G[0, 2] * x + G[1, 2] * y)
    c0 = G[0, 0] * x * x + 2.0 * G[0, 1] * x * y + G[1, 1] * y * y - T2
    return _quad_int_range(c2, c1, c0, strict=False)


def _ball_range_max(M, x, y, T):
    """Integer fiber range of {z: ||M(x,y,z)||_inf <= T}."""
    n = np.size(y)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    feasible = np.ones(n, dtype=bool)
    for i in range(3):
        m1, m2, m3 = int(M[i, 0]), int(M[i, 1]), int(M[i, 2])
        off = m1 * x + m2 * np.asarray(y, dtype=float)
        if m3 == 0:
            feasible &= np.abs(off) <= T
            continue
        lo_i = (-T - off) / m3
        hi_i = (T - off) / m3
        if m3 < 0:
            lo_i, hi_i = hi_i, lo_i
        lo = np.maximum(lo, np.ceil(lo_i))
        hi = np.minimum(hi, np.floor(hi_i))
    lo = np.where(feasible, lo, 0.0)
    hi = np.where(feasible, hi, -1.0)
    # endpoint re-check against the exact box predicate
    def ok(t):
        r = np.ones(n, dtype=bool)
        for i in range(3):
            m1, m2, m3 = int(M[i, 0]), int(M[i, 1]), int(M[i, 2])
            r &= np.abs(m1 * x + m2 * np.asarray(y, dtype=float) + m3 * t) <= T
        return r
    live = lo <= hi
    for _ in range(2):
        lo = np.where(live & ok(lo - 1.0), lo - 1.0, lo)
        hi = np.where(live & ok(hi + 1.0), hi + 1.0, hi)
    for _ in range(2):
        shrink = (lo <= hi) & ~ok(lo)
        lo = np.where(shrink, lo + 1.0, lo)
        shrink = (lo <= hi) & ~ok(hi)
        hi = np.where(shrink, hi - 1.0, hi)
    bad = lo > hi
    lo = np.where(bad, 0.0, lo)
    hi = np.where(bad, -1.0, hi)
    return lo, hi


def _outer_ranges(M, G, T, T2, norm_kind):
    """Ranges for the first two sweep coordinates (superset is enough)."""
    if norm_kind == "euclidean":
        Ginv = np.linalg.inv(G)
        xmax = int(math.floor(T * math.sqrt(max(Ginv[0, 0], 0.0)))) + 1

        A = G[:2, :2] - np.outer(G[:2, 2], G[:2, 2]) / G[2, 2]

        def yrange(x):
            c2 = A[1, 1]
            c1 = 2.0 * A[0, 1] * x
            c0 = A[0, 0] * x * x - T2
            disc = c1 * c1 - 4.0 * c2 * c0
            if disc < 0:
                return 1, 0
            s = math.sqrt(disc)
            return (int(math.floor((-c1 - s) / (2.0 * c2))) - 1,
                    int(math.ceil((-c1 + s) / (2.0 * c2))) + 1)
        return xmax, yrange
    Minv = np.rint(np.linalg.inv(M)).astype(np.int64)
    box = np.sum(np.abs(Minv), axis=1) * T
    xmax = int(math.floor(box[0])) + 1
    ylim = int(math.floor(box[1])) + 1

    def yrange(x):
        return -ylim, ylim
    return xmax, yrange


# ---------------------------------------------------------------------------
# the sweep
# ---------------------------------------------------------------------------

def _sweep_rows(Bw, M, G, T, T2, a, b, norm_kind, xs, yrange, collect):
    """Process rows x in xs; returns (count, hits) over the half space
    {x > 0} u {x = 0, y > 0} u {x = 0, y = 0, z > 0}."""
    total = 0
    hits = [] if collect else None
    for x in xs:
        ylo, yhi = yrange(x)
        if x == 0:
            ylo = max(ylo, 0)
        if ylo > yhi:
            continue
        y = np.arange(ylo, yhi + 1, dtype=float)
        if norm_kind == "euclidean":
            bl, bh = _ball_range_euclid(G, float(x), y, T2)
        else:
            bl, bh = _ball_range_max(M, float(x), y, T)
        if x == 0:
            # the (0, 0) fiber contributes z > 0 only
            zero_fiber = y == 0.0
            bl = np.where(zero_fiber, np.maximum(bl, 1.0), bl)
        lob, hib, loa, hia = _value_ranges(Bw, float(x), y, a, b)
        l1 = np.maximum(bl, lob)
        u1 = np.minimum(bh, hib)
        l2 = np.maximum(bl, loa)
        u2 = np.minimum(bh, hia)
        n = np.maximum(u1 - l1 + 1.0, 0.0) - np.maximum(u2 - l2 + 1.0, 0.0)
        total += int(n.sum())
        if collect:
            for i in np.nonzero(n > 0)[0]:
                li, ui = int(l1[i]), int(u1[i])
                la, ua = int(l2[i]), int(u2[i])
                if la > ua or ua < li or la > ui:
                    zs = np.arange(li, ui + 1)
                else:
                    zs = np.concatenate([np.arange(li, min(ui, la - 1) + 1),
                                         np.arange(max(li, ua + 1), ui + 1)])
                if zs.size == 0:
                    continue
                w = np.empty((zs.size, 3), dtype=np.int64)
                w[:, 0] = x
                w[:, 1] = int(y[i])
                w[:, 2] = zs
                hits.append(w @ M.T)
    return total, hits


def _run_sweep(q: QForm, a: float, b: float, T: float, norm_kind: str,
               collect: bool):
    """Exact half-space sweep; returns (count, hits or None, warning)."""
    M, Bw = _frame(q.matrix)
    if M is None:
        return None, None, "degenerate-fiber"
    G = (M.T @ M).astype(float)
    T2 = T * T
    xmax, yrange = _outer_ranges(M, G, T, T2, norm_kind)
    xs = list(range(0, xmax + 1))
    nchunk = max(1, 4 * thread_count())
    size = max(1, (len(xs) + nchunk - 1) // nchunk)
    chunks = [xs[i:i + size] for i in range(0, len(xs), size)]

    def work(chunk):
        return _sweep_rows(Bw, M, G, T, T2, a, b, norm_kind, chunk, yrange, collect)

    results = map_chunks(work, chunks)
    total = sum(r[0] for r in results)
    hits = None
    if collect:
        parts = [h for r in results for h in (r[1] or [])]
        hits = np.concatenate(parts) if parts else np.zeros((0, 3), dtype=np.int64)
    return total, hits, None


def _check_window(a, b, T):
    if not (a <= b):
        raise DomainError(f"need a <= b, got a={a}, b={b}")
    if not (T >= 1):
        raise DomainError(f"need T >= 1, got T={T}")


def _check_norm(norm_kind):
    if norm_kind not in NORM_KINDS:
        raise DomainError(f"unknown norm kind {norm_kind!r}")


def count_in_shell(q: QForm, a: float, b: float, T: float,
                   primitive_only: bool = False,
                   norm_kind: str = "euclidean") -> CountResult:
    """Count nonzero v in Z^3 with ||v|| <= T and a <= Q(v) <= b, exactly."""
    _check_window(a, b, T)
    _check_norm(norm_kind)
    if not is_normalized(q):
        raise NotNormalized("count_in_shell requires a normalized form")
    t0 = time.perf_counter()
    collect = bool(primitive_only)
    total, hits, warning = _run_sweep(q, a, b, T, norm_kind, collect)
    if warning is not None:
        if T > 200:
            raise DegenerateForm("fiber frame failed and T too large for brute force")
        res = count_bruteforce(q, a, b, T, primitive_only, norm_kind)
        return CountResult(T, a, b, res.total, primitive_only, norm_kind,
                           time.perf_counter() - t0, warning="degenerate-fiber fallback")
    if primitive_only:
        if hits.shape[0]:
            g = np.gcd.reduce(np.abs(hits), axis=1)
            total = int(np.sum(g == 1))
        else:
            total = 0
    return CountResult(T, a, b, 2 * total, primitive_only, norm_kind,
                       time.perf_counter() - t0)


def collect_shell_points(q: QForm, a: float, b: float, T: float,
                         primitive_only: bool = False,
                         norm_kind: str = "euclidean",
                         sign_pairs: bool = False) -> np.ndarray:
    """Materialize the counted vectors.

    Returns one representative per +/- pair (half-space reps); with
    sign_pairs=True both signs are included.
    """
    _check_window(a, b, T)
    _check_norm(norm_kind)
    total, hits, warning = _run_sweep(q, a, b, T, norm_kind, True)
    if warning is not None:
        raise DegenerateForm("fiber frame failed")
    if primitive_only and hits.shape[0]:
        g = np.gcd.reduce(np.abs(hits), axis=1)
        hits = hits[g == 1]
    if sign_pairs and hits.shape[0]:
        hits = np.concatenate([hits, -hits])
    return hits


def count_bruteforce(q: QForm, a: float, b: float, T: float,
                     primitive_only: bool = False,
                     norm_kind: str = "euclidean") -> CountResult:
    """Triple-loop reference count; independent oracle for count_in_shell."""
    _check_window(a, b, T)
    _check_norm(norm_kind)
    if T > 200:
        raise OracleTooLarge(f"brute-force oracle limited to T <= 200, got {T}")
    t0 = time.perf_counter()
    B = q.matrix
    n = int(math.floor(T + 1e-9))
    rng = np.arange(-n, n + 1)
    y, z = np.meshgrid(rng, rng, indexing="ij")
    yf = y.astype(float)
    zf = z.astype(float)
    T2 = T * T
    total = 0
    for x in range(-n, n + 1):
        xf = float(x)
        vals = (B[0, 0] * xf * xf + B[1, 1] * yf * yf + B[2, 2] * zf * zf
                + 2.0 * B[0, 1] * xf * yf + 2.0 * B[0, 2] * xf * zf
                + 2.0 * B[1, 2] * yf * zf)
        if norm_kind == "euclidean":
            inball = xf * xf + yf * yf + zf * zf <= T2
        else:
            inball = (abs(x) <= T) & (np.abs(yf) <= T) & (np.abs(zf) <= T)
        mask = inball & (vals >= a) & (vals <= b)
        if x == 0:
            mask &= ~((y == 0) & (z == 0))
        if primitive_only:
            g = np.gcd(np.gcd(abs(x), np.abs(y)), np.abs(z))
            mask &= g == 1
        total += int(np.count_nonzero(mask))
    return CountResult(T, a, b, total, primitive_only, norm_kind,
                       time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# value solver
# ---------------------------------------------------------------------------

def _sign_normalize(v: np.ndarray) -> np.ndarray:
    for x in v:
        if x != 0:
            return v if x > 0 else -v
    return v


def min_value_solve(q: QForm, s: float, T: float,
                    norm_kind: str = "euclidean"):
    """Primitive v with 0 < ||v|| <= T minimizing |Q(v) - s|.

    Ties are broken by smaller norm, then by the lexicographically largest
    sign-normalized vector.  Returns (vector, residual).
    """
    if not (T >= 1):
        raise DomainError(f"need T >= 1, got T={T}")
    _check_norm(norm_kind)
    M, Bw = _frame(q.matrix)
    if M is None:
        raise DegenerateForm("fiber frame failed")
    G = (M.T @ M).astype(float)
    T2 = T * T
    xmax, yrange = _outer_ranges(M, G, T, T2, norm_kind)

    B11, B22, B33 = Bw[0, 0], Bw[1, 1], Bw[2, 2]
    B12, B13, B23 = Bw[0, 1], Bw[0, 2], Bw[1, 2]

    def work(xs):
        best = math.inf
        ties = []
        for x in xs:
            ylo, yhi = yrange(x)
            if x == 0:
                ylo = max(ylo, 0)
            if ylo > yhi:
                continue
            y = np.arange(ylo, yhi + 1, dtype=float)
            if norm_kind == "euclidean":
                bl, bh = _ball_range_euclid(G, float(x), y, T2)
            else:
                bl, bh = _ball_range_max(M, float(x), y, T)
            if x == 0:
                bl = np.where(y == 0.0, np.maximum(bl, 1.0), bl)
            live = bl <= bh
            if not np.any(live):
                continue
            beta = 2.0 * (B13 * x + B23 * y)
            gamma = B11 * x * x + 2.0 * B12 * x * y + B22 * y * y - s
            # candidates: ball endpoints, parabola vertex, both roots of q = s
            cands = [bl, bh, np.round(-beta / (2.0 * B33))]
            disc = beta * beta - 4.0 * B33 * gamma
            sq = np.sqrt(np.maximum(disc, 0.0))
            r1 = (-beta - sq) / (2.0 * B33)
            r2 = (-beta + sq) / (2.0 * B33)
            for r in (r1, r2):
                cands.append(np.floor(r))
                cands.append(np.ceil(r))
            Z = np.clip(np.stack(cands), bl, bh)
            vals = np.abs((B33 * Z + beta) * Z + gamma)
            gxy = np.gcd(abs(x), np.abs(y.astype(np.int64)))
            prim = np.gcd(gxy, np.abs(Z.astype(np.int64))) == 1
            vals = np.where(prim & live, vals, np.inf)
            rm = float(vals.min())
            if rm > best or rm == math.inf:
                continue
            if rm < best:
                best = rm
                ties = []
            ii, jj = np.nonzero(vals == rm)
            for k in range(ii.size):
                w = np.array([x, int(y[jj[k]]), int(Z[ii[k], jj[k]])],
                             dtype=np.int64)
                ties.append(M @ w)
        return best, ties

    xs = list(range(0, xmax + 1))
    nchunk = max(1, 4 * thread_count())
    size = max(1, (len(xs) + nchunk - 1) // nchunk)
    results = map_chunks(work, [xs[i:i + size] for i in range(0, len(xs), size)])
    best = min(r[0] for r in results)
    if best == math.inf:
        raise DomainError("no primitive vector in range (T too small?)")
    ties = [v for r in results if r[0] == best for v in r[1]]
    normed = [_sign_normalize(v) for v in ties]
    key = min((float(v @ v), tuple(-int(c) for c in v)) for v in normed)
    vec = tuple(-c for c in key[1])
    return vec, best


# ---------------------------------------------------------------------------
# shortest vectors and cusp functions
# ---------------------------------------------------------------------------

_BOX = np.array([[i, j, k] for i in range(-2, 3) for j in range(-2, 3)
                 for k in range(-2, 3) if (i, j, k) != (0, 0, 0)],
                dtype=np.int64).T  # (3, 124)


def _pairwise_reduce(basis: np.ndarray):
    """Greedy pairwise (Lagrange-style) size reduction of basis columns.

    Returns (reduced, U) with reduced = basis @ U and U integer unimodular.
    """
    Bred = basis.astype(float).copy()
    U = np.eye(3, dtype=np.int64)
    for _ in range(256):
        n2 = (Bred * Bred).sum(axis=0)
        order = np.argsort(n2, kind="stable")
        Bred = Bred[:, order]
        U = U[:, order]
        changed = False
        for j in range(1, 3):
            for i in range(j):
                denom = float(Bred[:, i] @ Bred[:, i])
                if denom == 0.0:
                    continue
                mu = round(float(Bred[:, j] @ Bred[:, i]) / denom)
                if mu != 0:
                    Bred[:, j] -= mu * Bred[:, i]
                    U[:, j] -= mu * U[:, i]
                    changed = True
        if not changed:
            break
    return Bred, U


def shortest_vector(g) -> LatticeVectorReport:
    """Nonzero v in Z^3 minimizing ||g v|| (Euclidean).

    Pairwise reduction of the basis followed by exhaustive search over the
    coefficient box [-2, 2]^3 in the reduced basis; exact in dimension 3.
    """
    m = _mat(g)
    if abs(np.linalg.det(m) - 1.0) > 1e-10:
        raise DomainError("shortest_vector requires det g = 1")
    Bred, U = _pairwise_reduce(m)
    imgs = Bred @ _BOX
    n2 = (imgs * imgs).sum(axis=0)
    c = _BOX[:, int(np.argmin(n2))]
    v = _sign_normalize(U @ c)
    image = m @ v.astype(float)
    return LatticeVectorReport(tuple(int(x) for x in v),
                               float(np.linalg.norm(image)),
                               bool(np.gcd.reduce(np.abs(v)) == 1))


def alpha(g, index: int) -> float:
    """Cusp functions: alpha_1(g) = max 1/||g v||; alpha_2 via the wedge dual."""
    if index == 1:
        return 1.0 / shortest_vector(g).image_norm
    if index == 2:
        return 1.0 / shortest_vector(wedge_dual(g)).image_norm
    raise DomainError(f"index must be 1 or 2, got {index}")


def upper_bound_check(q: QForm, M: float, s_max: float, s_min: int = 0,
                      eta: float = 0.1, norm_kind: str = "euclidean"):
    """Counts N(s) = #{0 != v: ||v|| <= e^s, |Q(v)| <= M} on an integer grid of s,
    with the growth ratio N(s) / e^((1+eta) s).  Ratios should stay bounded."""
    if s_max > math.log(2e5):
        raise BudgetExceeded("s_max too large for exact counting at desk scale")
    rows = []
    for s in range(int(s_min), int(math.floor(s_max)) + 1):
        T = max(1.0, math.exp(s))
        res = count_in_shell(q, -M, M, T, primitive_only=False, norm_kind=norm_kind)
        rows.append((s, res.total, res.total / math.exp((1.0 + eta) * s)))
    return rows
