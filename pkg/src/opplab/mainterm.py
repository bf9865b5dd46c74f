"""The main-term constant C_Q = integral over the light cone of d(sigma)/|grad Q|.

For a normalized form, #{v in Z^3: ||v|| <= T, a <= Q(v) <= b} grows like
C_Q (b - a) T.  The quadrature route parametrizes the cone-sphere intersection
in the principal-axes frame and integrates a closed curve; homogeneity of
grad Q removes the radial integral analytically.  An independent Monte-Carlo
slab-volume estimate serves as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._num import RNG_SHARDS, doubling_trapezoid, map_chunks, shard_rng
from .errors import DomainError, NotIndefinite
from .qform import QForm, signature


@dataclass(frozen=True)
class CqEstimate:
    value: float
    method: str
    stderr: float
    samples_or_nodes: int


def _principal_axes(q: QForm):
    """Eigenvalues (mu1, mu2, mu3) of B, ordered (+, -, -) and made positive."""
    pos, neg = signature(q)
    if (pos, neg) != (1, 2):
        raise NotIndefinite(f"C_Q needs signature (1, 2), got {(pos, neg)}")
    w = np.linalg.eigvalsh(q.matrix)
    w = w[np.argsort(-w)]
    return w[0], -w[1], -w[2]


def cq_quadrature(q: QForm, tol: float = 1e-8) -> CqEstimate:
    """C_Q by adaptive node-doubling trapezoid over the cone's spherical curve.

    In the rotated frame the cone is mu1 x^2 = mu2 y^2 + mu3 z^2; each nappe
    intersects the unit sphere in a closed curve omega(theta).  Since grad Q is
    homogeneous of degree 1 the radial integral contributes a factor 1 and
    C_Q = sum over nappes of the curve integral of ||omega'|| / ||grad Q(omega)||.
    """
    mu1, mu2, mu3 = _principal_axes(q)
    D = np.array([mu1, -mu2, -mu3])

    def integrand_for(sign):
        def f(theta):
            c = np.empty((3, theta.size))
            c[0] = sign / np.sqrt(mu1)
            c[1] = np.cos(theta) / np.sqrt(mu2)
            c[2] = np.sin(theta) / np.sqrt(mu3)
            dc = np.zeros_like(c)
            dc[1] = -np.sin(theta) / np.sqrt(mu2)
            dc[2] = np.cos(theta) / np.sqrt(mu3)
            nc = np.sqrt((c * c).sum(axis=0))
            omega = c / nc
            # omega' = dc/nc - c (c . dc)/nc^3
            cdot = (c * dc).sum(axis=0)
            domega = dc / nc - c * (cdot / nc**3)
            speed = np.sqrt((domega * domega).sum(axis=0))
            grad = 2.0 * D[:, None] * omega
            return speed / np.sqrt((grad * grad).sum(axis=0))
        return f

    fplus = integrand_for(1.0)
    fminus = integrand_for(-1.0)

    def total(theta):
        return fplus(theta) + fminus(theta)

    # mean over [0, 2pi) times 2pi gives the curve integral
    value, nodes, _gap = doubling_trapezoid(lambda th: total(th), tol=tol / (2 * np.pi))
    return CqEstimate(2.0 * np.pi * value, "quadrature", 0.0, nodes)


def cq_montecarlo(q: QForm, samples: int = 10**6, T_ref: float = 50.0,
                  width: float = 0.2, seed: int = 0) -> CqEstimate:
    """Estimate vol{||v|| <= T_ref, |Q(v)| <= width/2} / (width T_ref) by
    uniform sampling in the Euclidean ball; converges to C_Q as T_ref grows
    and width shrinks.  Binomial standard error is reported."""
    if samples < 10**4:
        raise DomainError(f"need at least 1e4 samples, got {samples}")
    if width < 0:
        raise DomainError("width must be nonnegative")
    pos, neg = signature(q)
    if (pos, neg) != (1, 2):
        raise NotIndefinite(f"C_Q needs signature (1, 2), got {(pos, neg)}")
    if width == 0.0:
        return CqEstimate(0.0, "montecarlo", 0.0, samples)
    B = q.matrix
    half = width / 2.0
    per = samples // RNG_SHARDS
    counts = [per] * RNG_SHARDS
    counts[-1] += samples - per * RNG_SHARDS

    def work(shard):
        i, n = shard
        if n == 0:
            return 0
        rng = shard_rng(seed, i)
        u = rng.standard_normal((n, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = T_ref * np.cbrt(rng.random(n))
        pts = u * r[:, None]
        vals = np.einsum("ni,ij,nj->n", pts, B, pts)
        return int(np.count_nonzero(np.abs(vals) <= half))

    hits = sum(map_chunks(work, list(enumerate(counts))))
    vol_ball = 4.0 / 3.0 * np.pi * T_ref**3
    p = hits / samples
    scale = vol_ball / (width * T_ref)
    stderr = np.sqrt(max(p * (1.0 - p), 0.0) / samples) * scale
    return CqEstimate(p * scale, "montecarlo", float(stderr), samples)
