"""The symmetry group of 2xz - y^2: one-parameter subgroups, circle averages,
Siegel transforms, and the fiber-integral identity used for counting.

H = SO(2xz - y^2)^0 is generated by the diagonal flow a(t), the unipotent
flows u(r), uminus(s), and the circle K = H n SO(3) = {k(theta)}.  Averages of
Siegel transforms over K drive the counting asymptotics; the identity checked
by emm_calculus_check collapses such an average for a single vector to a 1-D
fiber integral J_f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._num import adaptive_simpson, map_chunks, periodic_trapezoid, thread_count
from .errors import BudgetExceeded, DomainError
from .lattice import _pairwise_reduce, alpha as _alpha
from .qform import B0, GroupElement, _mat, wedge_dual


def a(t: float) -> GroupElement:
    """Diagonal flow diag(e^t, 1, e^-t)."""
    return GroupElement(np.diag([math.exp(t), 1.0, math.exp(-t)]))


def u(r: float) -> GroupElement:
    """Upper unipotent flow with (1,2) = (2,3) = r and (1,3) = r^2/2."""
    return GroupElement(np.array([[1.0, r, r * r / 2.0],
                                  [0.0, 1.0, r],
                                  [0.0, 0.0, 1.0]]))


def uminus(s: float) -> GroupElement:
    """Lower unipotent flow, the transpose pattern of u."""
    return GroupElement(np.array([[1.0, 0.0, 0.0],
                                  [s, 1.0, 0.0],
                                  [s * s / 2.0, s, 1.0]]))


def k(theta: float) -> GroupElement:
    """The circle subgroup K = H n SO(3); k(0) = I and k is 2pi-periodic."""
    c = math.cos(theta)
    s = math.sin(theta)
    s2 = s / math.sqrt(2.0)
    return GroupElement(np.array([[(1 + c) / 2, -s2, (1 - c) / 2],
                                  [s2, c, -s2],
                                  [(1 - c) / 2, s2, (1 + c) / 2]]))


def k_batch(theta: np.ndarray) -> np.ndarray:
    """Stack of k(theta) matrices, shape (n, 3, 3)."""
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta)
    s = np.sin(theta)
    s2 = s / math.sqrt(2.0)
    out = np.empty((theta.size, 3, 3))
    out[:, 0, 0] = (1 + c) / 2
    out[:, 0, 1] = -s2
    out[:, 0, 2] = (1 - c) / 2
    out[:, 1, 0] = s2
    out[:, 1, 1] = c
    out[:, 1, 2] = -s2
    out[:, 2, 0] = (1 - c) / 2
    out[:, 2, 1] = s2
    out[:, 2, 2] = (1 + c) / 2
    return out


def in_h(g, tol: float = 1e-10) -> bool:
    """Whether g preserves the model form: g^T B0 g = B0."""
    m = _mat(g)
    return bool(np.max(np.abs(m.T @ B0 @ m - B0)) <= tol)


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Compactly supported nonnegative test function on R^3.

    kind "bump":  separable product of cosine-tapered interval bumps with
                  per-axis radii and taper width (taper 0 gives a sharp box);
    kind "ball":  indicator of the closed Euclidean ball;
    kind "zero":  identically zero.
    """

    __test__ = False  # not a pytest class, despite the name

    kind: str
    radii: tuple = (1.0, 1.0, 1.0)
    taper: float = 0.0

    def __post_init__(self):
        if self.kind not in ("bump", "ball", "zero"):
            raise DomainError(f"unknown test function kind {self.kind!r}")
        if self.taper < 0 or any(r < 0 for r in self.radii):
            raise DomainError("radii and taper must be nonnegative")
        if self.kind == "bump" and self.taper > min(self.radii) > 0:
            raise DomainError("taper exceeds a support radius")

    @classmethod
    def ball(cls, radius: float) -> "TestFunction":
        return cls("ball", (radius, radius, radius))

    @classmethod
    def box(cls, rx: float, ry: float = None, rz: float = None) -> "TestFunction":
        ry = rx if ry is None else ry
        rz = rx if rz is None else rz
        return cls("bump", (rx, ry, rz), 0.0)

    @classmethod
    def bump(cls, rx: float, ry: float = None, rz: float = None,
             taper: float = 0.25) -> "TestFunction":
        ry = rx if ry is None else ry
        rz = rx if rz is None else rz
        return cls("bump", (rx, ry, rz), taper)

    @classmethod
    def zero(cls) -> "TestFunction":
        return cls("zero", (0.0, 0.0, 0.0))

    @property
    def support_radius(self) -> float:
        """Euclidean radius of a ball containing the support."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "ball":
            return self.radii[0]
        return float(np.linalg.norm(self.radii))

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant of a taper factor (inf for sharp indicators)."""
        if self.kind == "zero":
            return 0.0
        if self.taper > 0:
            return math.pi / (2.0 * self.taper)
        return math.inf

    def _factor(self, x: np.ndarray, r: float) -> np.ndarray:
        ax = np.abs(x)
        if self.taper == 0.0:
            return (ax <= r).astype(float)
        inner = r - self.taper
        out = np.zeros_like(ax)
        out[ax <= inner] = 1.0
        edge = (ax > inner) & (ax < r)
        out[edge] = np.cos((ax[edge] - inner) * (math.pi / (2.0 * self.taper))) ** 2
        return out

    def values(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate on points of shape (n, 3)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "zero":
            return np.zeros(pts.shape[0])
        if self.kind == "ball":
            return ((pts * pts).sum(axis=1) <= self.radii[0] ** 2).astype(float)
        out = np.ones(pts.shape[0])
        for i in range(3):
            out *= self._factor(pts[:, i], self.radii[i])
        return out

    def slot_values(self, x, y, z) -> np.ndarray:
        """Evaluate on coordinate arrays (used by the fiber integral)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.kind == "zero":
            return np.zeros(np.broadcast(x, y, z).shape)
        if self.kind == "ball":
            return (x * x + y * y + z * z <= self.radii[0] ** 2).astype(float)
        return (self._factor(x, self.radii[0]) * self._factor(y, self.radii[1])
                * self._factor(z, self.radii[2]))


# ---------------------------------------------------------------------------
# Siegel transform and circle averages
# ---------------------------------------------------------------------------

def _enumerate_ball(m: np.ndarray, radius: float):
    """All v in Z^3 with ||m v||_2 <= radius, including 0 (shape (n, 3)).

    The basis is pairwise-reduced first so nested interval bounds stay tight.
    """
    if radius <= 0:
        return np.zeros((1, 3), dtype=np.int64)
    Bred, U = _pairwise_reduce(m)
    G = Bred.T @ Bred
    R2 = radius * radius
    # ranges from the dual Gram: |c_i| <= radius * sqrt((G^-1)_ii)
    Ginv = np.linalg.inv(G)
    bounds = np.floor(radius * np.sqrt(np.maximum(np.diag(Ginv), 0.0)) + 1e-12)
    est = np.prod(2.0 * bounds + 1.0)
    if est > 1e8:
        raise BudgetExceeded(f"Siegel enumeration box ~{est:.2g} points")
    b0, b1, b2 = (int(x) for x in bounds)
    out = []
    c0 = np.arange(-b0, b0 + 1, dtype=float)
    for c2 in range(-b2, b2 + 1):
        for c1 in range(-b1, b1 + 1):
            # quadratic in c0: G00 c0^2 + 2(G01 c1 + G02 c2) c0 + rest <= R2
            beta = 2.0 * (G[0, 1] * c1 + G[0, 2] * c2)
            gamma = (G[1, 1] * c1 * c1 + 2.0 * G[1, 2] * c1 * c2
                     + G[2, 2] * c2 * c2 - R2)
            disc = beta * beta - 4.0 * G[0, 0] * gamma
            if disc < 0:
                continue
            s = math.sqrt(disc)
            lo = math.ceil((-beta - s) / (2.0 * G[0, 0]) - 1e-9)
            hi = math.floor((-beta + s) / (2.0 * G[0, 0]) + 1e-9)
            if lo > hi:
                continue
            cs = np.arange(lo, hi + 1, dtype=float)
            vals = (G[0, 0] * cs + beta) * cs + gamma
            cs = cs[vals <= 0.0]
            if cs.size:
                block = np.empty((cs.size, 3), dtype=np.int64)
                block[:, 0] = cs.astype(np.int64)
                block[:, 1] = c1
                block[:, 2] = c2
                out.append(block)
    if not out:
        return np.zeros((0, 3), dtype=np.int64)
    coeffs = np.concatenate(out)
    return coeffs @ U.T


def siegel_transform(f: TestFunction, g) -> float:
    """f-hat(g) = sum over v in Z^3 of f(g v); exact finite sum, v = 0 included."""
    if f.kind == "zero":
        return 0.0
    m = _mat(g)
    vs = _enumerate_ball(m, f.support_radius)
    if vs.shape[0] == 0:
        return 0.0
    return float(f.values(vs.astype(float) @ m.T).sum())


@dataclass(frozen=True)
class CircleAverageResult:
    value: float
    nodes: int
    t: float
    richardson_gap: float


def circle_average(f: TestFunction, xi, t: float, g,
                   nodes: int = 1 << 12) -> CircleAverageResult:
    """Mean over theta of xi(theta) * f-hat(a(t) k(theta) g).

    Trapezoid rule on `nodes` equispaced angles (nodes a power of two, >= 256);
    the Richardson gap |value(nodes) - value(nodes/2)| is reported.  xi is a
    callable on angle arrays, or None for the constant weight 1.
    """
    if nodes < 256 or nodes & (nodes - 1):
        raise DomainError("nodes must be a power of two, at least 2^8")
    gm = _mat(g)
    at = a(t).matrix
    theta = np.arange(nodes) * (2.0 * math.pi / nodes)
    weights = np.ones(nodes) if xi is None else np.asarray(xi(theta), dtype=float)

    idx = np.arange(nodes)
    chunks = np.array_split(idx, max(1, 4 * thread_count()))

    def work(ch):
        ks = k_batch(theta[ch])
        out = np.empty(ch.size)
        for j, i in enumerate(ch):
            out[j] = siegel_transform(f, at @ ks[j] @ gm)
        return out

    vals = np.concatenate(map_chunks(work, [c for c in chunks if c.size]))
    seq = weights * vals
    value = float(seq.mean())
    half = float(seq[::2].mean())
    return CircleAverageResult(value, nodes, t, abs(value - half))


# ---------------------------------------------------------------------------
# fiber integral and calculus identity
# ---------------------------------------------------------------------------

def j_integral(f: TestFunction, c: float, d: float, tol: float = 1e-9) -> float:
    """J_f(c, d) = (1/d) * integral of f((c + y^2) / (2d), -y, d) dy."""
    if d <= 0:
        raise DomainError(f"need d > 0, got {d}")
    if f.kind == "zero":
        return 0.0
    ylim = f.support_radius if f.kind == "ball" else f.radii[1]
    if ylim <= 0:
        return 0.0

    def integrand(y):
        x = (c + y * y) / (2.0 * d)
        return f.slot_values(x, -y, d)

    # breakpoints of indicator edges make sharp test functions integrate exactly
    bps = set()
    if f.kind != "ball":
        rx = f.radii[0]
        for edge in (rx, rx - f.taper, -rx, -(rx - f.taper)):
            y2 = 2.0 * d * edge - c
            if y2 > 0:
                bps.add(math.sqrt(y2))
                bps.add(-math.sqrt(y2))
        ry = f.radii[1]
        bps.update((ry - f.taper, -(ry - f.taper)))
    val = adaptive_simpson(integrand, -ylim, ylim, tol=tol,
                           breakpoints=[p for p in bps if -ylim < p < ylim])
    return val / d


def _k_orbit_components(v: np.ndarray, theta: np.ndarray):
    """Coordinates of k(theta) v for an angle array."""
    c = np.cos(theta)
    s = np.sin(theta)
    s2 = s / math.sqrt(2.0)
    x = v[0] * (1 + c) / 2 - v[1] * s2 + v[2] * (1 - c) / 2
    y = v[0] * s2 + v[1] * c - v[2] * s2
    z = v[0] * (1 - c) / 2 + v[1] * s2 + v[2] * (1 + c) / 2
    return x, y, z


def emm_calculus_check(f: TestFunction, xi, v, t: float,
                       nodes: int = 1 << 20):
    """Compare the circle average of f along a single vector with its J_f form.

    lhs  = mean over theta of f(a(t) k(theta) v) xi(k(-theta) e3)
    rhs  = sqrt(2) e^-t / (2 pi) * J_f(q0(v), e^-t ||v||) * xi(v / ||v||)
    Returns (lhs, rhs, relerr).  xi is a callable on unit vectors (n, 3).

    The prefactor sqrt(2) e^-t / (2 pi) equals sqrt(2) d / (2 pi ||v||) with
    d = e^-t ||v||; the factor d is forced by J_f's own 1/d normalization, as
    the exact-count bridge (2 pi / sqrt 2) e^t * average = (1 + O(eps)) N
    only balances with it.
    """
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if not (math.exp(t) / 2.0 <= nv <= math.exp(t)):
        raise DomainError("need e^t / 2 <= ||v|| <= e^t")
    if f.kind != "zero" and f.support_radius > 1.0 and t < 2.0 * math.log(f.support_radius):
        raise DomainError("need t >= 2 log(support radius)")
    if f.kind == "zero":
        return 0.0, 0.0, 0.0
    theta = np.arange(nodes) * (2.0 * math.pi / nodes)
    x, y, z = _k_orbit_components(v, theta)
    et = math.exp(t)
    fv = f.slot_values(et * x, y, z / et)
    # k(-theta) e3 = ((1 - cos)/2, sin/sqrt2, (1 + cos)/2)
    c = np.cos(theta)
    s = np.sin(theta)
    dirs = np.stack([(1 - c) / 2, s / math.sqrt(2.0), (1 + c) / 2], axis=1)
    xv = np.asarray(xi(dirs), dtype=float)
    lhs = float((fv * xv).mean())
    q0v = 2.0 * v[0] * v[2] - v[1] * v[1]
    rhs = (math.sqrt(2.0) / (2.0 * math.pi * et)
           * j_integral(f, q0v, nv / et)
           * float(np.asarray(xi(v[None, :] / nv))[0]))
    relerr = abs(lhs - rhs) / max(abs(rhs), 1e-12)
    return lhs, rhs, relerr


def kintegral_decay(v, t: float, delta: float, sigma: float = None,
                    nodes: int = 1 << 10):
    """Quadrature of ||a(t) k v||^(-1-delta) over K against its decay bound.

    With sigma given the bound is delta^-1 e^((-1+delta+sigma) t) ||v||^(-1-delta)
    and requires |q0(v)| >= e^(-2 sigma t) and 0 < delta < 1 - sigma; without
    sigma the unconditional bound e^(delta t) ||v||^(-1-delta) is used.
    Returns (integral, bound_ratio).
    """
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise DomainError("v must be nonzero")
    if delta <= 0:
        raise DomainError("delta must be positive")
    q0v = 2.0 * v[0] * v[2] - v[1] * v[1]
    if sigma is not None:
        if not (0.0 < sigma < 1.0 and delta < 1.0 - sigma):
            raise DomainError("need 0 < sigma < 1 and 0 < delta < 1 - sigma")
        if abs(q0v) < math.exp(-2.0 * sigma * t):
            raise DomainError("sigma mode needs |q0(v)| >= e^(-2 sigma t)")
        bound = math.exp((-1.0 + delta + sigma) * t) * nv ** (-1.0 - delta) / delta
    else:
        bound = math.exp(delta * t) * nv ** (-1.0 - delta)
    et = math.exp(t)

    def integrand(theta):
        x, y, z = _k_orbit_components(v, np.asarray(theta, dtype=float))
        n2 = (et * x) ** 2 + y * y + (z / et) ** 2
        return n2 ** (-(1.0 + delta) / 2.0)

    tol = max(1e-12, 1e-6 * bound)
    integral = adaptive_simpson(integrand, 0.0, 2.0 * math.pi,
                                tol=tol, max_depth=60,
                                breakpoints=np.arange(1, nodes) * (2 * math.pi / nodes))
    integral /= 2.0 * math.pi
    return integral, integral / bound


def alpha_moment(g, t: float, p: float, index: int,
                 nodes: int = 1 << 12) -> float:
    """Mean over theta of alpha_index(a(t) k(theta) g)^p."""
    if not (0.0 < p <= 1.0):
        raise DomainError("need 0 < p <= 1")
    if nodes < 256:
        raise DomainError("need at least 2^8 nodes")
    gm = _mat(g)
    at = a(t).matrix
    theta = np.arange(nodes) * (2.0 * math.pi / nodes)
    idx = np.arange(nodes)
    chunks = np.array_split(idx, max(1, 4 * thread_count()))

    def work(ch):
        ks = k_batch(theta[ch])
        out = np.empty(ch.size)
        for j in range(ch.size):
            out[j] = _alpha(at @ ks[j] @ gm, index) ** p
        return out

    vals = np.concatenate(map_chunks(work, [c for c in chunks if c.size]))
    return float(vals.mean())
