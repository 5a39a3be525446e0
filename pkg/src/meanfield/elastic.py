"""Event-driven elastic collision gas for Maxwell molecules with cutoff.

Binary collisions at pair-independent rate: the N-particle generator sums
over unordered pairs with weight 1/N, so the total jump rate is (N-1)/2
and each event rotates the relative velocity of a uniformly chosen pair
onto a fresh direction sigma drawn from the angular kernel.  Momentum and
kinetic energy are conserved collision by collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from . import _events
from .core import ParticleState, RngStream, SimulationError

__all__ = [
    "AngularKernel",
    "CollisionEvent",
    "EventRecord",
    "sample_sigma",
    "collide_elastic",
    "next_collision",
    "simulate_kac",
    "replay_collisions",
    "simulate_kac_coupled",
]

_TABLE_NODES = 4096


def sphere_area(k: int) -> float:
    """Surface measure of the unit k-sphere in R^{k+1}."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.exp(gammaln((k + 1) / 2.0))


@dataclass
class AngularKernel:
    """Collision kernel b on the deviation-angle cosine, normalized on S^{d-1}.

    The cosine marginal carries the surface-measure factor
    (1 - c^2)^{(d-3)/2}; sampling runs through an inverse-CDF table built
    in angle space (where that factor is smooth for every d >= 2), with
    exact transforms for the isotropic kernel in d = 2, 3.  For d = 1 the
    sphere degenerates to {-1, +1} and the kernel reduces to two weights.
    """

    dim: int
    density: Callable[[np.ndarray], np.ndarray] | None = None
    weights: tuple[float, float] | None = None  # d=1: (mass at +1, mass at -1)
    name: str = "custom"
    table_nodes: int = _TABLE_NODES
    normalization: float = field(init=False, default=1.0)
    raw_norm: float = field(init=False, default=1.0)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.dim == 1:
            if self.weights is None:
                raise ValueError("d=1 kernels are two point masses; pass weights")
            wp, wm = self.weights
            if wp < 0 or wm < 0 or wp + wm <= 0:
                raise ValueError("weights must be nonnegative with positive sum")
            self.raw_norm = wp + wm
            self.weights = (wp / self.raw_norm, wm / self.raw_norm)
            self.normalization = sum(self.weights)
            self._exact = "two-point"
            return
        if self.density is None:
            raise ValueError("d>=2 kernels need a density on [-1, 1]")
        # fine angle grid; trapezoid CDF of b(cos t) sin^{d-2}(t) * |S^{d-2}|
        t = np.linspace(0.0, math.pi, 8 * self.table_nodes + 1)
        c = np.cos(t)
        vals = np.asarray(self.density(c), dtype=np.float64) * np.sin(t) ** (self.dim - 2)
        if np.any(vals < -1e-14):
            raise ValueError("kernel density must be nonnegative on [-1, 1]")
        vals = np.maximum(vals, 0.0) * sphere_area(self.dim - 2)
        cdf = np.concatenate(([0.0], np.cumsum((vals[1:] + vals[:-1]) * 0.5 * np.diff(t))))
        self.raw_norm = float(cdf[-1])
        if self.raw_norm <= 0:
            raise ValueError("kernel density integrates to zero")
        cdf /= self.raw_norm
        self.normalization = float(cdf[-1])
        # decimate the fine CDF to the published table resolution
        u_nodes = np.linspace(0.0, 1.0, self.table_nodes)
        self._theta_of_u = np.interp(u_nodes, cdf, t)
        self._u_nodes = u_nodes
        self._exact = None
        if self.name == "isotropic" and self.dim in (2, 3):
            self._exact = f"isotropic-{self.dim}d"

    @classmethod
    def isotropic(cls, dim: int) -> "AngularKernel":
        """Uniform scattering direction on S^{d-1} (constant b = 1/|S^{d-1}|)."""
        if dim == 1:
            return cls(dim=1, weights=(0.5, 0.5), name="isotropic")
        area = sphere_area(dim - 1)
        return cls(dim=dim, density=lambda c: np.full_like(np.asarray(c, float), 1.0 / area),
                   name="isotropic")

    @classmethod
    def two_point(cls, w_plus: float, w_minus: float) -> "AngularKernel":
        return cls(dim=1, weights=(w_plus, w_minus), name="two-point")

    def b1(self) -> float:
        """Mean deviation cosine ∫ (sigma·uhat) b dsigma under the kernel."""
        if self.dim == 1:
            wp, wm = self.weights
            return wp - wm
        t = np.linspace(0.0, math.pi, 8 * self.table_nodes + 1)
        c = np.cos(t)
        vals = (
            np.asarray(self.density(c), dtype=np.float64)
            * np.sin(t) ** (self.dim - 2)
            * c
            * sphere_area(self.dim - 2)
        )
        return float(np.trapezoid(vals, t) / self.raw_norm)

    def sample_costheta(self, k: int, rng: RngStream) -> np.ndarray:
        u = np.atleast_1d(rng.uniform(size=k))
        if self.dim == 1:
            wp, _ = self.weights
            return np.where(u < wp, 1.0, -1.0)
        if self._exact == "isotropic-3d":
            return 1.0 - 2.0 * u
        if self._exact == "isotropic-2d":
            return np.cos(math.pi * u)
        return np.cos(np.interp(u, self._u_nodes, self._theta_of_u))


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    pair: tuple[int, int]
    sigma: np.ndarray

    def __post_init__(self) -> None:
        if abs(float(np.linalg.norm(self.sigma)) - 1.0) > 1e-12:
            raise ValueError("sigma must be a unit vector")
        if self.pair[0] == self.pair[1]:
            raise ValueError("pair indices must differ")


@dataclass
class EventRecord:
    """Realized event stream: enough to replay the same collisions elsewhere."""

    times: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    costh: np.ndarray
    frames: np.ndarray | None

    def __len__(self) -> int:
        return len(self.times)


def sample_sigma(kernel: AngularKernel, u_hat: np.ndarray, rng: RngStream) -> np.ndarray:
    """One deviation direction with cos(theta) = sigma·u_hat drawn from b."""
    u_hat = np.asarray(u_hat, dtype=np.float64)
    if abs(float(np.linalg.norm(u_hat)) - 1.0) > 1e-6:
        raise ValueError("u_hat must be a unit vector (|u_hat| within 1e-6 of 1)")
    c = kernel.sample_costheta(1, rng)
    if kernel.dim == 1:
        return c * u_hat
    g = np.atleast_2d(rng.normal(size=(1, kernel.dim)))
    sigma = _events.deviation_vectors(u_hat[None, :], np.array([1.0]), c, g)[0]
    return sigma / np.linalg.norm(sigma)


def collide_elastic(v_i: np.ndarray, v_j: np.ndarray, sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elastic pair update: w/2 ± u*/2 with u* = |u| sigma.

    The u = 0 pair is returned unchanged (u* = 0 regardless of sigma; the
    degenerate direction is fixed by this convention).
    """
    v_i = np.asarray(v_i, dtype=np.float64)
    v_j = np.asarray(v_j, dtype=np.float64)
    u = v_i - v_j
    r = float(np.linalg.norm(u))
    if r == 0.0:
        return v_i.copy(), v_j.copy()
    w = v_i + v_j
    u_star = r * np.asarray(sigma, dtype=np.float64)
    return 0.5 * (w + u_star), 0.5 * (w - u_star)


def next_collision(state: ParticleState, kernel: AngularKernel, rng: RngStream) -> CollisionEvent:
    """Draw the next event: Exp((N-1)/2) wait, uniform pair, sigma from b."""
    n = state.n_particles
    if n < 2:
        raise SimulationError("collisions need at least 2 particles")
    rate = (n - 1) / 2.0
    wait = float(rng.exponential(scale=1.0 / rate))
    i, j = _events.sample_pairs(n, 1, rng)
    i, j = int(i[0]), int(j[0])
    u = state.coords[i] - state.coords[j]
    r = float(np.linalg.norm(u))
    if r > 0.0:
        sigma = sample_sigma(kernel, u / r, rng)
    else:
        # degenerate pair: any direction; consume the same draws
        axis = np.zeros(state.dim)
        axis[0] = 1.0
        sigma = sample_sigma(kernel, axis, rng)
    return CollisionEvent(time=state.time + wait, pair=(i, j), sigma=sigma)


def _validate_snapshots(snapshot_times: Sequence[float], t0: float, t_end: float) -> np.ndarray:
    snaps = np.asarray(snapshot_times, dtype=np.float64)
    if snaps.size and np.any(np.diff(snaps) < 0):
        raise ValueError("snapshot times must be sorted ascending")
    if snaps.size and (snaps[0] < t0 - 1e-12 or snaps[-1] > t_end + 1e-12):
        raise ValueError("snapshot times must lie in [start, t_end]")
    return snaps


def _generate_events(
    n: int,
    dim: int,
    rate: float,
    kernel: AngularKernel,
    t0: float,
    t_end: float,
    rng: RngStream,
) -> EventRecord:
    times = _events.sample_event_times(rate, t0, t_end, rng)
    k = len(times)
    pi, pj = _events.sample_pairs(n, k, rng) if k else (np.empty(0, np.int64),) * 2
    costh = kernel.sample_costheta(k, rng) if k else np.empty(0)
    frames = None
    if dim >= 2 and k:
        frames = np.atleast_2d(rng.normal(size=(k, dim)))
    return EventRecord(times=times, pair_i=pi, pair_j=pj, costh=costh, frames=frames)


def _play_events(
    coords: np.ndarray,
    record: EventRecord,
    snaps: np.ndarray,
    t_end: float,
    restitution: float | None,
    pre_batch_hook=None,
) -> list[tuple[float, np.ndarray]]:
    """Apply the event stream, capturing copies of the state at snapshot times."""
    n = coords.shape[0]
    out: list[tuple[float, np.ndarray]] = []
    cursor = 0
    for s in snaps:
        upto = int(np.searchsorted(record.times, s, side="right"))
        if upto > cursor:
            sl = slice(cursor, upto)
            batches = _events.disjoint_batches(record.pair_i[sl], record.pair_j[sl], n)
            batches = [(lo + cursor, hi + cursor) for lo, hi in batches]
            _events.apply_pair_collisions(
                coords, record.pair_i, record.pair_j, record.costh, record.frames,
                restitution, batches, pre_batch_hook,
            )
            cursor = upto
        out.append((float(s), coords.copy()))
    if cursor < len(record.times):
        sl = slice(cursor, len(record.times))
        batches = _events.disjoint_batches(record.pair_i[sl], record.pair_j[sl], n)
        batches = [(lo + cursor, hi + cursor) for lo, hi in batches]
        _events.apply_pair_collisions(
            coords, record.pair_i, record.pair_j, record.costh, record.frames,
            restitution, batches, pre_batch_hook,
        )
    return out


def simulate_kac(
    initial: ParticleState,
    kernel: AngularKernel,
    t_end: float,
    snapshot_times: Sequence[float],
    rng: RngStream,
    record_events: bool = False,
):
    """Exact event-driven trajectory; returns states at the snapshot times.

    With ``record_events`` the realized event stream is returned as well,
    so a second initial condition can be driven by identical randomness
    (common-random-number coupling).
    """
    n, d = initial.n_particles, initial.dim
    if n < 2:
        raise SimulationError("need N >= 2")
    if kernel.dim != d:
        raise ValueError("kernel dimension must match the state")
    snaps = _validate_snapshots(snapshot_times, initial.time, t_end)
    record = _generate_events(n, d, (n - 1) / 2.0, kernel, initial.time, t_end, rng)
    coords = initial.coords.copy()
    captured = _play_events(coords, record, snaps, t_end, restitution=None)
    states = [ParticleState(c, time=t) for t, c in captured]
    if record_events:
        return states, record
    return states


def replay_collisions(
    initial: ParticleState,
    record: EventRecord,
    snapshot_times: Sequence[float],
    t_end: float,
    restitution: float | None = None,
) -> list[ParticleState]:
    """Drive a state through a previously recorded event stream."""
    snaps = _validate_snapshots(snapshot_times, initial.time, t_end)
    coords = initial.coords.copy()
    captured = _play_events(coords, record, snaps, t_end, restitution)
    return [ParticleState(c, time=t) for t, c in captured]


def simulate_kac_coupled(
    initial_a: ParticleState,
    initial_b: ParticleState,
    kernel: AngularKernel,
    t_end: float,
    snapshot_times: Sequence[float],
    rng: RngStream,
) -> tuple[list[ParticleState], list[ParticleState]]:
    """Two elastic systems under one event stream, directions coupled.

    Both systems share the collision times and pairs.  The scattering
    direction of the second system is the first system's direction
    parallel-transported by the rotation taking the first relative
    direction onto the second, so both draw from the same angular law
    relative to their own geometry.  Under this quadratic coupling every
    collision contracts the expected matched-atom cost: with gamma the
    angle between the two relative directions, the coupled cross term
    gains (1 - cos gamma) (1 - cos^2 theta) / 2 >= 0 for every deviation
    angle theta, whatever the kernel.
    """
    n, d = initial_a.n_particles, initial_a.dim
    if initial_b.n_particles != n or initial_b.dim != d:
        raise ValueError("coupled systems need matching shapes")
    if n < 2:
        raise SimulationError("need N >= 2")
    snaps = _validate_snapshots(snapshot_times, initial_a.time, t_end)
    record = _generate_events(n, d, (n - 1) / 2.0, kernel, initial_a.time, t_end, rng)
    va = initial_a.coords.copy()
    vb = initial_b.coords.copy()
    out_a: list[ParticleState] = []
    out_b: list[ParticleState] = []
    cursor = 0

    def apply_span(lo: int, hi: int) -> None:
        sl = slice(lo, hi)
        batches = _events.disjoint_batches(record.pair_i[sl], record.pair_j[sl], n)
        for b0, b1 in batches:
            bsl = slice(lo + b0, lo + b1)
            ii = record.pair_i[bsl]
            jj = record.pair_j[bsl]
            ua = va[ii] - va[jj]
            ub = vb[ii] - vb[jj]
            ra = np.linalg.norm(ua, axis=1)
            rb = np.linalg.norm(ub, axis=1)
            frames = None if record.frames is None else record.frames[bsl]
            sigma_a = _events.deviation_vectors(ua, ra, record.costh[bsl], frames)
            # transport onto the second geometry where both are defined;
            # a degenerate first pair falls back to the direct construction
            safe_a = np.where(ra > 0.0, ra, 1.0)[:, None]
            safe_b = np.where(rb > 0.0, rb, 1.0)[:, None]
            sigma_b = _events.rotate_between(ua / safe_a, ub / safe_b, sigma_a)
            direct_b = _events.deviation_vectors(ub, rb, record.costh[bsl], frames)
            sigma_b = np.where((ra > 0.0)[:, None], sigma_b, direct_b)
            for coords, u, r, sigma in ((va, ua, ra, sigma_a), (vb, ub, rb, sigma_b)):
                moving = r > 0.0
                w = coords[ii] + coords[jj]
                u_star = r[:, None] * sigma
                coords[ii[moving]] = 0.5 * (w + u_star)[moving]
                coords[jj[moving]] = 0.5 * (w - u_star)[moving]

    for s in snaps:
        upto = int(np.searchsorted(record.times, s, side="right"))
        if upto > cursor:
            apply_span(cursor, upto)
            cursor = upto
        out_a.append(ParticleState(va.copy(), time=float(s)))
        out_b.append(ParticleState(vb.copy(), time=float(s)))
    if cursor < len(record.times):
        apply_span(cursor, len(record.times))
    return out_a, out_b
