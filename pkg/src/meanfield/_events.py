"""Internals of the event-driven collision engine.

The jump processes draw one global exponential clock and a uniform pair
per event (superposition of the per-pair Poisson clocks, same law, O(1)
per event).  Exactness under vectorization rests on two facts:

* collision updates on disjoint pairs commute, so events can be applied
  in batches cut wherever a particle index repeats;
* all per-event randomness (waiting time, pair, deviation-angle cosine,
  and a raw frame vector for the azimuth) is drawn up front in event
  order, so the realized trajectory is independent of the batching.
"""

from __future__ import annotations

import numpy as np

from .core import RngStream


def sample_event_times(rate: float, t0: float, t1: float, rng: RngStream) -> np.ndarray:
    """Jump times of a Poisson clock of the given rate on (t0, t1]."""
    if rate <= 0.0 or t1 <= t0:
        return np.empty(0)
    out = []
    t = t0
    expected = max(64, int(1.2 * rate * (t1 - t0)) + 16)
    while True:
        gaps = rng.exponential(scale=1.0 / rate, size=expected)
        times = t + np.cumsum(gaps)
        if times[-1] >= t1:
            out.append(times[times < t1])
            break
        out.append(times)
        t = float(times[-1])
        expected = max(64, int(0.25 * expected))
    return np.concatenate(out) if out else np.empty(0)


def sample_pairs(n: int, k: int, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """k uniform pairs (i, j), i != j, canonicalized to i < j.

    The collision laws are orientation-free (swapping the pair and
    reflecting sigma preserves the update law), so the canonical order
    loses nothing.
    """
    a = rng.integers(0, n, size=k)
    b = rng.integers(0, n - 1, size=k)
    b = b + (b >= a)
    return np.minimum(a, b).astype(np.int64), np.maximum(a, b).astype(np.int64)


def disjoint_batches(pi: np.ndarray, pj: np.ndarray, n: int) -> list[tuple[int, int]]:
    """Cut [0, k) into maximal runs in which no particle index repeats."""
    k = len(pi)
    if k == 0:
        return []
    stamp = np.full(n, -1, dtype=np.int64)
    bounds = [0]
    batch = 0
    il = pi.tolist()
    jl = pj.tolist()
    st = stamp  # local alias; plain python loop is the scan
    for e in range(k):
        a = il[e]
        b = jl[e]
        if st[a] == batch or st[b] == batch:
            bounds.append(e)
            batch += 1
        st[a] = batch
        st[b] = batch
    bounds.append(k)
    return list(zip(bounds[:-1], bounds[1:]))


def _orthonormal_to(uhat: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Unit vectors orthogonal to the rows of uhat, azimuth carried by g."""
    e = g - np.einsum("ij,ij->i", g, uhat)[:, None] * uhat
    norms = np.linalg.norm(e, axis=1)
    bad = norms < 1e-12
    if np.any(bad):
        # g (anti)parallel to uhat: deterministic completion via the axis
        # least aligned with uhat
        for row in np.nonzero(bad)[0]:
            axis = np.zeros(uhat.shape[1])
            axis[int(np.argmin(np.abs(uhat[row])))] = 1.0
            v = axis - (axis @ uhat[row]) * uhat[row]
            e[row] = v
            norms[row] = np.linalg.norm(v)
    return e / norms[:, None]


def deviation_vectors(
    u: np.ndarray, r: np.ndarray, costh: np.ndarray, frames: np.ndarray | None
) -> np.ndarray:
    """Unit vectors sigma with sigma·(u/r) = costh, azimuth uniform via frames.

    Rows with r == 0 return an arbitrary placeholder (the caller must mask
    them; the collision update leaves such pairs unchanged anyway).
    """
    d = u.shape[1]
    safe_r = np.where(r > 0.0, r, 1.0)
    uhat = u / safe_r[:, None]
    if d == 1:
        return costh[:, None] * uhat
    ehat = _orthonormal_to(uhat, frames)
    s = np.sqrt(np.maximum(0.0, 1.0 - costh**2))
    return costh[:, None] * uhat + s[:, None] * ehat


def rotate_between(p: np.ndarray, q: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply, rowwise, the rotation taking unit p onto unit q to x.

    The minimal rotation in span(p, q); for antipodal rows (measure zero)
    the deterministic fallback is the reflection across the plane normal
    to p, which also maps p to q = -p and preserves angles to the axis.
    """
    pq = np.einsum("ij,ij->i", p, q)
    out = np.empty_like(x)
    same = np.all(p == q, axis=1)  # identical geometry: exact identity
    ok = (pq > -1.0 + 1e-12) & ~same
    out[same] = x[same]
    if np.any(ok):
        s = p[ok] + q[ok]
        coef = np.einsum("ij,ij->i", s, x[ok]) / (1.0 + pq[ok])
        px = np.einsum("ij,ij->i", p[ok], x[ok])
        out[ok] = x[ok] - coef[:, None] * s + 2.0 * px[:, None] * q[ok]
    rows = ~ok & ~same
    if np.any(rows):
        px = np.einsum("ij,ij->i", p[rows], x[rows])
        out[rows] = x[rows] - 2.0 * px[:, None] * p[rows]
    return out


def apply_pair_collisions(
    coords: np.ndarray,
    pi: np.ndarray,
    pj: np.ndarray,
    costh: np.ndarray,
    frames: np.ndarray | None,
    restitution: float | None,
    batches: list[tuple[int, int]],
    pre_batch_hook=None,
) -> None:
    """Apply the collision sequence to coords in place.

    restitution None means the elastic rule (relative speed preserved);
    otherwise the inelastic rule with that coefficient.  pre_batch_hook,
    when given, is called as hook(lo, hi, idx_i, idx_j) before each batch
    (the thermostat uses it to bring colliding particles up to date with
    their diffusion).
    """
    for lo, hi in batches:
        ii = pi[lo:hi]
        jj = pj[lo:hi]
        if pre_batch_hook is not None:
            pre_batch_hook(lo, hi, ii, jj)
        vi = coords[ii]
        vj = coords[jj]
        w = vi + vj
        u = vi - vj
        r = np.linalg.norm(u, axis=1)
        sigma = deviation_vectors(u, r, costh[lo:hi], None if frames is None else frames[lo:hi])
        if restitution is None:
            u_star = r[:, None] * sigma
        else:
            u_star = 0.5 * (1.0 - restitution) * u + 0.5 * (1.0 + restitution) * r[:, None] * sigma
        moving = r > 0.0
        vi_new = 0.5 * (w + u_star)
        vj_new = 0.5 * (w - u_star)
        coords[ii[moving]] = vi_new[moving]
        coords[jj[moving]] = vj_new[moving]
