"""The five-dimensional complement of Lie(H) in sl3, its weight basis, localized
Riesz-type energies of finite point sets, and empirical energy-decay experiments
under the expanding action of the diagonal and unipotent flows.

The complement r = {X in sl3 : B0 X symmetric} carries weights (2, 1, 0, -1, -2)
under conjugation by a(t); coordinates below are always taken in that basis and
norms are max-abs coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._num import adaptive_simpson, shard_rng
from .errors import DomainError, NotInH, NotMember
from .qform import B0, _mat


def r_basis() -> list:
    """Weight basis of r = {X in sl3 : B0 X symmetric}, weights (2,1,0,-1,-2).

    Each matrix is traceless, satisfies (B0 X)^T = B0 X, and is an eigenvector
    of conjugation by a(t) with eigenvalue e^(weight * t).
    """
    E13 = np.zeros((3, 3)); E13[0, 2] = 1.0
    W1 = np.zeros((3, 3)); W1[0, 1] = 1.0; W1[1, 2] = -1.0
    W0 = np.diag([1.0, -2.0, 1.0])
    Wm1 = np.zeros((3, 3)); Wm1[1, 0] = 1.0; Wm1[2, 1] = -1.0
    E31 = np.zeros((3, 3)); E31[2, 0] = 1.0
    return [E13, W1, W0, Wm1, E31]


WEIGHTS = np.array([2.0, 1.0, 0.0, -1.0, -2.0])

_BASIS = np.stack(r_basis())                      # (5, 3, 3)
_BASIS_FLAT = _BASIS.reshape(5, 9).T              # (9, 5)
_BASIS_PINV = np.linalg.pinv(_BASIS_FLAT)         # (5, 9)


def to_matrix(coords) -> np.ndarray:
    """Coordinates in the weight basis -> 3x3 matrix in r."""
    coords = np.asarray(coords, dtype=float)
    return np.einsum("i,ijk->jk", coords, _BASIS)


def from_matrix(X: np.ndarray, tol: float = 1e-9):
    """3x3 matrix -> weight-basis coordinates; off-r residual must be <= tol."""
    X = np.asarray(X, dtype=float)
    coords = _BASIS_PINV @ X.ravel()
    residual = np.max(np.abs(X - to_matrix(coords)))
    if residual > tol:
        raise DomainError(f"matrix is {residual:g} away from r")
    return coords


@dataclass(frozen=True)
class RVector:
    """A vector of r in weight-basis coordinates (w2, w1, w0, w-1, w-2)."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (5,):
            raise DomainError("RVector needs 5 coordinates")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def norm(self) -> float:
        """Max-abs coordinate."""
        return float(np.max(np.abs(self.coords)))


def _coords_of(w):
    if isinstance(w, RVector):
        return w.coords
    return np.asarray(w, dtype=float)


def ad_action(h, w):
    """Conjugation action of h in H on r, in weight coordinates.

    h must preserve the model form to within 1e-8; the conjugated matrix is
    projected back to r (residual above 1e-9 raises).
    """
    m = _mat(h)
    if np.max(np.abs(m.T @ B0 @ m - B0)) > 1e-8:
        raise NotInH("matrix does not preserve the model form")
    coords = _coords_of(w)
    X = to_matrix(coords)
    Y = m @ X @ np.linalg.inv(m)
    out = from_matrix(Y, tol=1e-9)
    return RVector(out) if isinstance(w, RVector) else out


def ad_matrix(h) -> np.ndarray:
    """The 5x5 matrix of ad_action(h, .) in weight coordinates."""
    m = _mat(h)
    if np.max(np.abs(m.T @ B0 @ m - B0)) > 1e-8:
        raise NotInH("matrix does not preserve the model form")
    minv = np.linalg.inv(m)
    cols = [_BASIS_PINV @ (m @ _BASIS[i] @ minv).ravel() for i in range(5)]
    return np.stack(cols, axis=1)


#: nilpotent coordinate matrix of bracketing with the unipotent generator.
_N_UP = None


def _nilpotent_up() -> np.ndarray:
    global _N_UP
    if _N_UP is None:
        n = np.zeros((3, 3))
        n[0, 1] = 1.0
        n[1, 2] = 1.0
        cols = [_BASIS_PINV @ (n @ _BASIS[i] - _BASIS[i] @ n).ravel()
                for i in range(5)]
        _N_UP = np.stack(cols, axis=1)
    return _N_UP


def ad_flow_coords(d: float, r: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Coordinates of Ad(a(d) u(r)) w for an array of r values, shape (n, 5).

    Uses exp(r N) = sum r^k N^k / k! with N nilpotent (N^5 = 0), then the
    diagonal weight scaling of a(d).
    """
    N = _nilpotent_up()
    w = np.asarray(w, dtype=float)
    terms = [w.copy()]
    for _ in range(4):
        terms.append(N @ terms[-1])
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros((r.size, 5))
    fact = 1.0
    for kk in range(5):
        if kk:
            fact *= kk
        out += (r[:, None] ** kk) * (terms[kk] / fact)
    out *= np.exp(WEIGHTS * d)[None, :]
    return out


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointCloud:
    """A finite set of r-vectors in the unit max-norm ball, with energy params."""

    points: np.ndarray
    alpha: float
    delta: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != 5:
            raise DomainError("points must have shape (n, 5)")
        if not (0.0 < self.alpha <= 5.0):
            raise DomainError("alpha must be in (0, 5]")
        if self.delta < 0:
            raise DomainError("delta must be nonnegative")
        if pts.shape[0] and np.max(np.abs(pts)) > 1.0 + 1e-12:
            raise DomainError("all points must lie in the unit max-norm ball")
        uniq = np.unique(pts, axis=0)
        if uniq.shape[0] != pts.shape[0]:
            raise DomainError("points must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]


def energy(cloud: PointCloud, w) -> float:
    """Localized alpha-energy at w: sum over w' != w of max(||w - w'||, delta)^-alpha.

    Distances are max-norm in weight coordinates; delta = 0 uses raw distances
    (distinctness guarantees finiteness).  w must be a member of the cloud.
    """
    wc = _coords_of(w)
    match = np.nonzero((cloud.points == wc).all(axis=1))[0]
    if match.size == 0:
        raise NotMember("w is not a point of the cloud")
    d = np.max(np.abs(cloud.points - wc), axis=1)
    d = np.delete(d, match[0])
    if d.size == 0:
        return 0.0
    return float(np.sum(np.maximum(d, cloud.delta) ** (-cloud.alpha)))


def varpi(alpha: float) -> float:
    """Piecewise decay exponent for dimension parameter alpha in (0, 5].

    With m = 2: 2 alpha - sum_{i<ceil(alpha)} i on (0, 3];
    max(2(alpha - 3), 2(5 - alpha) - 1) on (3, 4]; 2(5 - alpha) on [4, 5].
    """
    if not (0.0 < alpha <= 5.0):
        raise DomainError(f"alpha must be in (0, 5], got {alpha}")
    m = 2.0
    if alpha <= 2 * m - 1:
        k = math.ceil(alpha)
        return m * alpha - k * (k - 1) / 2.0
    if alpha <= 2 * m:
        return max(m * (1 - 2 * m + alpha), m * (1 + 2 * m - alpha) - 1)
    return m * (1 + 2 * m - alpha)


def expansion_check(w, d: float, alpha: float, nodes: int = 256):
    """Average contraction of ||.||^-alpha along the expanded unipotent orbit.

    integral  = quadrature over r in [0, 1] of ||Ad(a(d) u(r)) w||^-alpha;
    normalized = integral * e^(2 alpha d) * ||w||^alpha, which stays bounded by
    an absolute constant for alpha <= 1/5.  Returns (integral, normalized).
    """
    if not (0.0 < alpha <= 0.2):
        raise DomainError("alpha must be in (0, 1/5]")
    wc = _coords_of(w)
    nw = float(np.max(np.abs(wc)))
    if nw == 0.0:
        raise DomainError("w must be nonzero")

    def integrand(r):
        coords = ad_flow_coords(d, r, wc)
        return np.max(np.abs(coords), axis=1) ** (-alpha)

    seeds = np.linspace(0.0, 1.0, max(8, nodes) + 1)[1:-1]
    integral = adaptive_simpson(integrand, 0.0, 1.0, tol=1e-8,
                                breakpoints=seeds)
    return integral, integral * math.exp(2.0 * alpha * d) * nw ** alpha


# ---------------------------------------------------------------------------
# alpha-regular sampling and the projection-decay experiment
# ---------------------------------------------------------------------------

def sample_regular_cloud(n: int, alpha: float, seed: int) -> np.ndarray:
    """Centers of a random stopping-time dyadic tree in the unit cube [0, 1]^5.

    Cells split into 2^5 children surviving independently with probability
    2^(alpha - 5) (the root always survives), so the expected leaf count per
    level scales like 2^alpha and dyadic ball counts behave like n b^alpha
    down to scale about n^(-1/alpha).  If more than n leaves survive, a seeded
    subsample of exactly n is returned.  The cube sits inside the unit
    max-norm ball, as the energy machinery requires.
    """
    if n < 1:
        return np.zeros((0, 5))
    rng = shard_rng(seed, 0)
    depth = max(1, math.ceil(math.log2(max(n, 2)) / alpha))
    p = 2.0 ** (alpha - 5.0)
    cells = np.full((1, 5), 0.5)
    half = 0.5
    for _ in range(depth):
        half /= 2.0
        offsets = half * (np.array(np.meshgrid(*([[-1.0, 1.0]] * 5),
                                               indexing="ij")).reshape(5, -1).T)
        children = (cells[:, None, :] + offsets[None, :, :]).reshape(-1, 5)
        keep = rng.random(children.shape[0]) < p
        if not keep.any():
            keep[rng.integers(children.shape[0])] = True
        cells = children[keep]
        if cells.shape[0] > 4 * n:
            idx = rng.choice(cells.shape[0], size=4 * n, replace=False)
            cells = cells[np.sort(idx)]
    if cells.shape[0] > n:
        idx = rng.choice(cells.shape[0], size=n, replace=False)
        cells = cells[np.sort(idx)]
    return cells


@dataclass(frozen=True)
class DecayStatistics:
    """Record of one projection-decay experiment."""

    n_points: int
    alpha: float
    ell: float
    delta: float
    delta_prime: float
    trials: int
    seed: int
    upsilon: float
    fraction_passing: float
    median_decay: float
    pairs: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("n_points", "alpha", "ell", "delta", "delta_prime", "trials",
                 "seed", "upsilon", "fraction_passing", "median_decay",
                 "pairs", "degenerate")}


def projection_decay_experiment(n: int, alpha: float, ell: float,
                                trials: int = 20, seed: int = 0) -> DecayStatistics:
    """Empirical energy decay under Ad(a(ell) u(r)) on an alpha-regular cloud.

    For each sampled r and each point w, the localized image energy at scale
    delta' = e^(2 ell) delta is compared with the initial per-point energy at
    scale delta = n^(-1/alpha); the pass bar is a decay factor of
    e^(-varpi(alpha) ell / 2), and the fraction of passing (r, w) pairs and
    the median decay factor are reported.
    """
    if n > 5000 or trials > 200:
        raise DomainError("desk-scale limits: n <= 5000, trials <= 200")
    pts = sample_regular_cloud(n, alpha, seed)
    m = pts.shape[0]
    delta = m ** (-1.0 / alpha) if m else 0.0
    if m < 2:
        return DecayStatistics(m, alpha, ell, delta, 0.0, trials, seed,
                               0.0, 0.0, math.nan, 0, degenerate=True)
    cloud = PointCloud(pts, alpha, delta)
    delta_prime = math.exp(2.0 * ell) * delta

    # pairwise max-norm distances, initial energies, neighborhoods
    diff = np.zeros((m, m))
    for j in range(5):
        np.maximum(diff, np.abs(pts[:, j][:, None] - pts[None, :, j]), out=diff)
    np.fill_diagonal(diff, np.inf)
    pre = np.sum(np.maximum(diff, delta) ** (-alpha), axis=1)
    upsilon = float(pre.max())
    radius = math.exp(-2.0 * ell)
    neighbors = [np.nonzero(diff[i] <= radius)[0] for i in range(m)]

    rng = shard_rng(seed, 1)
    rs = rng.random(trials)
    bar = math.exp(-varpi(alpha) * ell / 2.0)
    decays = []
    for r in rs:
        images = _transform_cloud(ell, float(r), pts)
        for i in range(m):
            nb = neighbors[i]
            if nb.size == 0:
                decays.append(0.0)
                continue
            d = np.max(np.abs(images[nb] - images[i]), axis=1)
            post = float(np.sum(np.maximum(d, delta_prime) ** (-alpha)))
            decays.append(post / pre[i])
    decays = np.asarray(decays)
    fraction = float(np.mean(decays <= bar))
    return DecayStatistics(m, alpha, ell, delta, delta_prime, trials, seed,
                           upsilon, fraction, float(np.median(decays)),
                           int(decays.size))


def _transform_cloud(ell: float, r: float, pts: np.ndarray) -> np.ndarray:
    """Ad(a(ell) u(r)) applied to every row of pts."""
    N = _nilpotent_up()
    M = np.eye(5)
    term = np.eye(5)
    fact = 1.0
    for kk in range(1, 5):
        fact *= kk
        term = term @ N
        M = M + (r ** kk / fact) * term
    M = np.exp(WEIGHTS * ell)[:, None] * M
    return pts @ M.T
