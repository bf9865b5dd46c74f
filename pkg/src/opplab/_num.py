"""Shared numerics: adaptive quadrature, periodic trapezoid, worker pools, RNG shards."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

#: number of fixed RNG shards; merge order is shard order, so results do not
#: depend on how many workers actually run.
RNG_SHARDS = 64


def thread_count() -> int:
    """Worker count from OPPLAB_THREADS (default: all cores)."""
    raw = os.environ.get("OPPLAB_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def map_chunks(fn, chunks):
    """Apply fn to each chunk, in parallel if OPPLAB_THREADS > 1.

    Results are returned in chunk order, so any merge by summation is
    deterministic regardless of worker count.
    """
    chunks = list(chunks)
    n = thread_count()
    if n <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=min(n, len(chunks))) as pool:
        return list(pool.map(fn, chunks))


def shard_rng(seed: int, shard: int) -> np.random.Generator:
    """Counter-based generator for shard `shard` of a run keyed by `seed`."""
    return np.random.Generator(np.random.Philox(key=np.array([seed & (2**64 - 1), shard], dtype=np.uint64)))


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-9,
                     max_depth: int = 48, breakpoints=()) -> float:
    """Adaptive composite Simpson rule for a vectorized integrand on [a, b].

    `f` must accept an ndarray of abscissae and return an ndarray of values.
    `breakpoints` seeds subdivision at known kinks or jumps.
    """
    if b <= a:
        return 0.0
    pts = [a] + sorted(p for p in set(float(p) for p in breakpoints) if a < p < b) + [b]
    lo = np.array(pts[:-1])
    hi = np.array(pts[1:])
    flo = f(lo)
    fhi = f(hi)
    mid = 0.5 * (lo + hi)
    fmid = f(mid)
    seg = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    total = 0.0
    span = b - a
    for _ in range(max_depth):
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flm = f(lmid)
        frm = f(rmid)
        sl = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        sr = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        s2 = sl + sr
        err = np.abs(s2 - seg)
        done = err <= 15.0 * tol * np.maximum((hi - lo) / span, 1e-300)
        total += float(np.sum((s2 + (s2 - seg) / 15.0)[done]))
        if np.all(done):
            return total
        keep = ~done
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        flo = np.concatenate([flo[keep], fmid[keep]])
        fhi = np.concatenate([fmid[keep], fhi[keep]])
        mid = np.concatenate([lmid[keep], rmid[keep]])
        fmid = np.concatenate([flm[keep], frm[keep]])
        seg = np.concatenate([sl[keep], sr[keep]])
    return total + float(np.sum(seg))


def periodic_trapezoid(f, nodes: int, period: float = 2.0 * np.pi):
    """Mean of f over one period using `nodes` equispaced samples.

    Returns (mean, samples); trapezoid and midpoint coincide on a periodic
    uniform grid, and halving the grid reuses the even-index samples.
    """
    theta = np.arange(nodes) * (period / nodes)
    vals = np.asarray(f(theta), dtype=float)
    return float(vals.mean()), vals


def doubling_trapezoid(f, tol: float, start: int = 64, cap: int = 1 << 22):
    """Periodic trapezoid with node doubling until successive values differ < tol.

    Returns (value, nodes, gap). `f` takes an array of angles in [0, 2pi).
    """
    n = start
    prev, _ = periodic_trapezoid(f, n)
    while n < cap:
        n *= 2
        cur, _ = periodic_trapezoid(f, n)
        gap = abs(cur - prev)
        if gap < tol:
            return cur, n, gap
        prev = cur
    return prev, n, float("nan")
