"""Scalar measurements, delay embeddings, and neighbor queries.

A delay embedding stacks lagged copies of a scalar measurement series into
row vectors, current value first: row t is

    [s(t), s(t - tau), ..., s(t - (m-1) tau)]

so the first embedded time is ``base_offset = (m-1) * tau`` and the
embedding has ``T' = T - (m-1) tau`` rows.  Much published software uses the
reverse (oldest-first) orientation; distances are unaffected but row/column
bookkeeping is not, so the orientation here is load-bearing for alignment.

Neighbor queries are exact (kd-tree with a brute-force fallback, never
approximate) because the downstream statistics are sensitive to distance
ratios.  A Theiler window W excludes temporally adjacent rows, and distance
ties break toward the lower time index so results are deterministic.
"""
from __future__ import annotations

import dataclasses
import enum
import pathlib

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError

_PAD = 8  # extra neighbors fetched per query to absorb Theiler exclusions


class MeasurementDomain(enum.Enum):
    X_ONLY = "x"
    Y_ONLY = "y"
    JOINT = "joint"


@dataclasses.dataclass(frozen=True, eq=False)
class Measurement:
    """A scalar observation function on one state domain.

    Exactly one of ``index`` (coordinate projection) or ``h`` (linear
    functional, s(t) = <h, state slice>) must be given.
    """

    domain: MeasurementDomain
    index: int | None = None
    h: np.ndarray | None = None

    def __post_init__(self):
        if (self.index is None) == (self.h is None):
            raise ValidationError("specify exactly one of index or h")
        if self.h is not None:
            object.__setattr__(self, "h", np.asarray(self.h, dtype=float))
            if self.h.ndim != 1:
                raise ValidationError("h must be a vector")
        elif self.index < 0:
            raise ValidationError("index must be >= 0")


def coordinate(domain, index):
    return Measurement(domain=domain, index=index)


def functional(domain, h):
    return Measurement(domain=domain, h=h)


def _domain_slice(traj, domain):
    if domain is MeasurementDomain.X_ONLY:
        return traj.x
    if domain is MeasurementDomain.Y_ONLY:
        return traj.y
    return traj.samples


def measure(traj, meas):
    """Apply a measurement to a trajectory, returning a length-T series."""
    block = _domain_slice(traj, meas.domain)
    dim = block.shape[1]
    if meas.index is not None:
        if meas.index >= dim:
            raise ValidationError(
                f"coordinate index {meas.index} out of range for dimension {dim}"
            )
        return block[:, meas.index].copy()
    if meas.h.size != dim:
        raise ValidationError(
            f"functional has size {meas.h.size}, domain has dimension {dim}"
        )
    return block @ meas.h


@dataclasses.dataclass(frozen=True, eq=False)
class DelayEmbedding:
    """Matrix of delay vectors with its lag bookkeeping.

    ``points[i]`` corresponds to source time ``base_offset + i``.
    """

    points: np.ndarray
    m: int
    tau: int
    base_offset: int
    source: Measurement | None = None

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != self.m:
            raise ValidationError("points must have m columns")
        if self.points.shape[0] < 1:
            raise ValidationError("embedding must contain at least one row")
        if self.base_offset != (self.m - 1) * self.tau:
            raise ValidationError("base_offset must equal (m-1)*tau")

    @property
    def t_prime(self):
        return self.points.shape[0]

    @property
    def times(self):
        """Source time index of each row."""
        return np.arange(self.t_prime) + self.base_offset


def delay_embed(series, m, tau, source=None):
    """Build the delay embedding of a scalar series (current value first)."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise ValidationError("series must be one-dimensional")
    if m < 1 or tau < 1:
        raise ValidationError("need m >= 1 and tau >= 1")
    base = (m - 1) * tau
    n = series.size
    if n <= base:
        raise ValidationError(
            f"series of length {n} too short for m={m}, tau={tau}"
        )
    cols = [series[base - k * tau: n - k * tau] for k in range(m)]
    points = np.stack(cols, axis=1)
    return DelayEmbedding(points=points, m=m, tau=tau, base_offset=base,
                          source=source)


@dataclasses.dataclass(frozen=True)
class AlignedRange:
    """Common time range of two embeddings of the same trajectory."""

    t_start: int
    t_stop: int          # exclusive
    a_rows: slice
    b_rows: slice

    @property
    def length(self):
        return self.t_stop - self.t_start


def align(a, b):
    """Pair rows of two embeddings that refer to the same source time.

    Both embeddings must come from the same trajectory's time axis; the
    result is symmetric (swapping a and b pairs the same timestamps).
    """
    t_start = max(a.base_offset, b.base_offset)
    t_stop = min(a.base_offset + a.t_prime, b.base_offset + b.t_prime)
    if t_stop <= t_start:
        raise ValidationError("embeddings cover disjoint time ranges")
    return AlignedRange(
        t_start=t_start,
        t_stop=t_stop,
        a_rows=slice(t_start - a.base_offset, t_stop - a.base_offset),
        b_rows=slice(t_start - b.base_offset, t_stop - b.base_offset),
    )


@dataclasses.dataclass(frozen=True)
class NeighborQuery:
    """Parameters of a nearest-neighbor search (squared Euclidean metric)."""

    k: int
    theiler_window: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.theiler_window < 0:
            raise ValidationError("theiler_window must be >= 0")

    def validate_for(self, t_prime):
        if self.k + 2 * self.theiler_window >= t_prime:
            raise ValidationError(
                f"k={self.k} with W={self.theiler_window} needs more than "
                f"{self.k + 2 * self.theiler_window} points, have {t_prime}"
            )


def _squared_dists(points, idx, candidates):
    diff = points[candidates] - points[idx]
    return np.einsum("ij,ij->i", diff, diff)


def _knn_single(points, tree, idx, q):
    """Exact k nearest admissible neighbors of one row, ties to lower index.

    Fetches a few extra candidates from the spatial index, drops rows inside
    the Theiler window, and orders survivors by (squared distance, index).
    Widens the candidate set whenever the k-th admissible distance reaches
    the fetch horizon, so boundary ties can never hide a closer point; in
    the worst case this degrades to the exhaustive scan.
    """
    n = points.shape[0]
    kq = min(n, q.k + 2 * q.theiler_window + 1 + _PAD)
    while True:
        dist, cand = tree.query(points[idx], k=kq)
        cand = np.atleast_1d(cand)
        keep = np.abs(cand - idx) > q.theiler_window
        admissible = cand[keep]
        if admissible.size >= q.k:
            d2 = _squared_dists(points, idx, admissible)
            order = np.lexsort((admissible, d2))
            admissible = admissible[order]
            d2 = d2[order]
            horizon = np.atleast_1d(dist)[-1] ** 2
            if kq == n or d2[q.k - 1] < horizon * (1.0 - 1e-9):
                return admissible[: q.k]
        if kq == n:
            if admissible.size < q.k:
                raise ValidationError(
                    f"only {admissible.size} admissible points for k={q.k}"
                )
            return admissible[: q.k]
        kq = min(n, 2 * kq)


def knn(emb, query_index, q):
    """Indices of the k nearest rows to ``query_index``, by squared distance.

    Rows within the Theiler window (|j - query_index| <= W) are excluded;
    ties break toward the lower index.  Matches an exhaustive scan exactly.
    """
    points = emb.points if isinstance(emb, DelayEmbedding) else np.asarray(emb)
    n = points.shape[0]
    q.validate_for(n)
    if not 0 <= query_index < n:
        raise ValidationError(f"query index {query_index} out of range")
    tree = cKDTree(points)
    return _knn_single(points, tree, query_index, q)


class NeighborIndex:
    """Reusable exact neighbor index over a fixed point set.

    Builds the spatial index once; safe for concurrent queries afterwards.
    """

    def __init__(self, points):
        if isinstance(points, DelayEmbedding):
            points = points.points
        self.points = np.asarray(points, dtype=float)
        self.tree = cKDTree(self.points)

    @property
    def n(self):
        return self.points.shape[0]

    def query(self, idx, q):
        q.validate_for(self.n)
        return _knn_single(self.points, self.tree, idx, q)

    def query_all(self, q, chunk=1024):
        """Neighbor indices for every row, shape (n, k)."""
        q.validate_for(self.n)
        n = self.n
        kq = min(n, q.k + 2 * q.theiler_window + 1 + _PAD)
        dist, cand = self.tree.query(self.points, k=kq)
        out = np.empty((n, q.k), dtype=np.intp)
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            rows = np.arange(start, stop)
            c = cand[start:stop]
            diff = self.points[c] - self.points[rows, None, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            inadmissible = np.abs(c - rows[:, None]) <= q.theiler_window
            d2 = np.where(inadmissible, np.inf, d2)
            order = np.lexsort((c, d2), axis=-1)
            top = order[:, : q.k]
            out[start:stop] = np.take_along_axis(c, top, axis=1)
            kth = np.take_along_axis(d2, top[:, -1:], axis=1)[:, 0]
            horizon = dist[start:stop, -1] ** 2 * (1.0 - 1e-9)
            needs_fallback = rows[(kth >= horizon) & (kq < n)]
            for i in needs_fallback:
                out[i] = _knn_single(self.points, self.tree, int(i), q)
        return out
