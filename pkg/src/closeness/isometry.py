"""How well maps between attractors and embeddings preserve distances.

For a map F given empirically as contemporaneous point pairs (domain point
at time t, image point at time t), the squared-distance ratio of a pair of
times (i, j) is

    ||F(p_i) - F(p_j)||^2 / ||p_i - p_j||^2.

The extreme ratios over sampled pairs are empirical isometry constants: a
map is a stable embedding exactly when all its ratios are confined to a band
[C(1-delta), C(1+delta)].  This module estimates those profiles, computes
the analytic band for oscillatory linear systems, and builds the linear
embedding operator whose rank decides whether a response-only measurement
can see the driver at all.
"""
from __future__ import annotations

import dataclasses
import enum
import warnings

import numpy as np
from scipy.linalg import expm

from .embedding import align
from .errors import (
    ConditioningError,
    DegenerateInputError,
    HypothesisViolation,
    ResonanceError,
    ValidationError,
)
from .linear import LinearSystemAd

#: domain pairs closer than this (squared) are resampled, not ratioed
COINCIDENCE_CUTOFF = 1e-12

#: default pair budgets: quick sweeps vs full verification runs
N_PAIRS_SWEEP = 5_000
N_PAIRS_VERIFY = 50_000


class MapKind(enum.Enum):
    PhiGammaX = "phi_gamma_x"    # driver attractor -> driver embedding
    PhiGammaY = "phi_gamma_y"    # response attractor -> response embedding
    PhiPhiX = "phi_phi_x"        # joint attractor -> driver embedding
    PhiPhiY = "phi_phi_y"        # joint attractor -> response embedding
    PiX = "pi_x"                 # joint attractor -> driver block
    PiY = "pi_y"                 # joint attractor -> response block
    IotaX = "iota_x"             # response attractor -> joint attractor
    IotaY = "iota_y"             # driver attractor -> joint attractor
    PsiYtoX = "psi_y_to_x"       # response embedding -> driver embedding
    PsiXtoY = "psi_x_to_y"       # driver embedding -> response embedding
    PhiPhiXY = "phi_phi_xy"      # joint attractor -> joint-functional embedding


@dataclasses.dataclass(frozen=True, eq=False)
class MapUnderTest:
    """A map given by contemporaneously paired domain and image point sets."""

    kind: MapKind
    domain_points: np.ndarray
    image_points: np.ndarray

    def __post_init__(self):
        if self.domain_points.shape[0] != self.image_points.shape[0]:
            raise ValidationError(
                "domain and image must pair the same number of times"
            )

    @property
    def n_points(self):
        return self.domain_points.shape[0]


@dataclasses.dataclass(frozen=True)
class IsometryEstimate:
    """Empirical squared-distance-ratio profile of one map."""

    lower: float
    upper: float
    percentiles: dict
    n_pairs: int
    rng_seed: int

    def __post_init__(self):
        p = self.percentiles
        chain = [self.lower, p[5], p[50], p[95], self.upper]
        if any(a > b * (1 + 1e-12) + 1e-300 for a, b in zip(chain, chain[1:])):
            raise ValidationError("ratio profile is not ordered")
        if self.lower < 0:
            raise ValidationError("squared-distance ratios cannot be negative")


@dataclasses.dataclass(frozen=True)
class TheoremBound:
    """Analytic stable-embedding band for an oscillatory linear system.

    The embedding of a d-oscillator system with measurement vector h
    satisfies ratio in [scale*(1-delta), scale*(1+delta)] with
    delta = delta0 + delta1_of_m, provided the hypotheses hold:
    (a) m exceeds m_min, (b) frequencies distinct and nonzero, (c) every
    oscillatory eigenvector has nonzero alignment with h.
    """

    scale: float
    delta0: float
    delta1_of_m: float
    nu: float
    kappa1: float
    kappa2: float
    A1: float
    A2: float
    m: int
    T_s: float
    m_min: float

    def __post_init__(self):
        if not (0 <= self.delta0 < 1):
            raise ValidationError("delta0 must lie in [0, 1)")
        if self.kappa1 > self.kappa2 or self.A1 > self.A2:
            raise ValidationError("extreme constants out of order")
        if self.nu < 1:
            raise ValidationError("resonance factor cannot be below 1")

    @property
    def hypothesis_a_holds(self):
        return self.m > self.m_min

    @property
    def delta(self):
        return self.delta0 + self.delta1_of_m

    @property
    def lower(self):
        return self.scale * (1.0 - self.delta)

    @property
    def upper(self):
        return self.scale * (1.0 + self.delta)


def sample_pair_indices(point_sets, n_points, n_pairs, seed,
                        max_batches=64, chunk=8192):
    """Draw index pairs (i != j) rejecting near-coincident domain points.

    ``point_sets`` lists every array whose rows act as a ratio denominator
    for these pairs; a pair is rejected if it is closer than the coincidence
    cutoff in any of them, so all ratios built on the sample are defined.
    """
    if n_points < 2:
        raise ValidationError("need at least two points to sample pairs")
    if n_pairs < 1:
        raise ValidationError("n_pairs must be >= 1")
    if any(np.ptp(p, axis=0).max() == 0 for p in point_sets):
        raise DegenerateInputError("a domain's points all coincide; no usable pairs")

    rng = np.random.default_rng(seed)
    out_i = np.empty(n_pairs, dtype=np.intp)
    out_j = np.empty(n_pairs, dtype=np.intp)
    filled = 0
    for _ in range(max_batches):
        want = n_pairs - filled
        batch = min(chunk, max(256, 2 * want))
        a = rng.integers(0, n_points, size=batch)
        b = rng.integers(0, n_points, size=batch)
        ok = a != b
        for pts in point_sets:
            diff = pts[a] - pts[b]
            ok &= np.einsum("ij,ij->i", diff, diff) >= COINCIDENCE_CUTOFF
        take = min(int(ok.sum()), want)
        if take:
            out_i[filled:filled + take] = a[ok][:take]
            out_j[filled:filled + take] = b[ok][:take]
            filled += take
        if filled == n_pairs:
            return out_i, out_j
    raise DegenerateInputError(
        f"could not draw {n_pairs} admissible pairs; points are degenerate"
    )


def ratios_on_pairs(mut, ii, jj):
    """Squared-distance ratios of one map on a fixed pair sample."""
    dd = mut.domain_points[ii] - mut.domain_points[jj]
    di = mut.image_points[ii] - mut.image_points[jj]
    dom = np.einsum("ij,ij->i", dd, dd)
    img = np.einsum("ij,ij->i", di, di)
    if np.any(dom < COINCIDENCE_CUTOFF):
        raise ValidationError("pair sample contains coincident domain points")
    return img / dom


def empirical_isometry(mut, n_pairs=N_PAIRS_VERIFY, seed=0):
    """Estimate the ratio profile of a map over seeded random pairs."""
    ii, jj = sample_pair_indices(
        [mut.domain_points], mut.n_points, n_pairs, seed
    )
    ratios = ratios_on_pairs(mut, ii, jj)
    p5, p50, p95 = np.percentile(ratios, [5, 50, 95], method="linear")
    return IsometryEstimate(
        lower=float(ratios.min()),
        upper=float(ratios.max()),
        percentiles={5: float(p5), 50: float(p50), 95: float(p95)},
        n_pairs=n_pairs,
        rng_seed=seed,
    )


def resonance_factor(thetas, T_s):
    """Worst inverse sine over the sampling-resonance terms.

    Covers every frequency alone plus the half sum and half difference of
    every pair; a vanishing sine means the sampling aliases the oscillation
    and no finite band exists.
    """
    thetas = np.asarray(thetas, dtype=float)
    args = [t * T_s for t in thetas]
    d = thetas.size
    for i in range(d):
        for j in range(i + 1, d):
            args.append((thetas[i] - thetas[j]) * T_s / 2.0)
            args.append((thetas[i] + thetas[j]) * T_s / 2.0)
    sines = np.abs(np.sin(args))
    if np.any(sines < 1e-12):
        raise ResonanceError(
            "a resonance sine term vanishes for this sampling interval"
        )
    return float(1.0 / sines.min())


def analytic_linear_bounds(sys, h, m, T_s):
    """Analytic stable-embedding band of a linear system's delay map.

    Parameters
    ----------
    sys : LinearSystemAd
    h : real vector, length sys.n
        Measurement vector; its squared norm should equal 2d/m and is
        rescaled (with a warning) when it does not.
    m : int
        Embedding length.
    T_s : float
        Sampling interval.

    Raises
    ------
    HypothesisViolation
        Some oscillatory eigenvector is orthogonal to h (condition (c));
        the embedding then cannot see that mode at all.
    ResonanceError
        A resonance sine term vanishes.
    """
    if m < 1 or T_s <= 0:
        raise ValidationError("need m >= 1 and T_s > 0")
    h = np.asarray(h, dtype=float)
    if h.shape != (sys.n,):
        raise ValidationError(f"h must have shape ({sys.n},)")
    h_norm2 = float(h @ h)
    if h_norm2 == 0:
        raise ValidationError("h must be nonzero")
    d = sys.d
    target = 2.0 * d / m
    if abs(h_norm2 - target) > 1e-12 * target:
        warnings.warn(
            f"|h|^2 = {h_norm2:.6g} rescaled to 2d/m = {target:.6g}",
            stacklevel=2,
        )
        h = h * np.sqrt(target / h_norm2)

    gram = sys.V.conj().T @ sys.V
    eigs = np.linalg.eigvalsh(gram)
    A1, A2 = float(eigs[0]), float(eigs[-1])
    if A1 <= 0:
        raise ConditioningError("oscillatory eigenvectors are dependent")

    h_norm = np.linalg.norm(h)
    kappas = np.empty(d)
    for i in range(d):
        v = sys.V[:, 2 * i]
        alignment = abs(np.vdot(v, h))
        if alignment <= 1e-12 * np.linalg.norm(v) * h_norm:
            raise HypothesisViolation(
                "c", f"eigenvector for theta={sys.thetas[i]} is orthogonal to h"
            )
        kappas[i] = alignment / h_norm
    kappa1, kappa2 = float(kappas.min()), float(kappas.max())

    nu = resonance_factor(sys.thetas, T_s)

    heavy = A2 * kappa2 ** 2
    light = A1 * kappa1 ** 2
    scale = d * (kappa1 ** 2 / A2 + kappa2 ** 2 / A1)
    delta0 = (heavy - light) / (heavy + light)
    delta1 = ((2 * d - 1) * nu / m) * (2 * heavy / (heavy + light))
    m_min = (2 * d - 1) * (heavy / light) * nu

    return TheoremBound(
        scale=scale, delta0=delta0, delta1_of_m=delta1, nu=nu,
        kappa1=kappa1, kappa2=kappa2, A1=A1, A2=A2, m=m, T_s=T_s,
        m_min=m_min,
    )


def phi_matrix(sys, h_full, m, tau, block_dims=None):
    """The delay embedding of a linear system as an explicit matrix.

    Row k is ``h_full^T expm(-k A tau)``, so the embedding of a state
    difference w is simply (matrix @ w).  Returns the matrix, its singular
    values, and the numerical rank at threshold sigma_max * 1e-10.

    When the lower-left coupling block of A is exactly zero the matrix is
    computed blockwise, which keeps the structurally zero driver columns
    exactly zero instead of accumulating round-off there.
    """
    if isinstance(sys, LinearSystemAd):
        A = sys.A
        if block_dims is None:
            block_dims = (sys.n_x, sys.n_y)
    else:
        A = np.asarray(sys, dtype=float)
    n = A.shape[0]
    h_full = np.asarray(h_full, dtype=float)
    if h_full.shape != (n,):
        raise ValidationError(f"h_full must have shape ({n},)")
    if m < 1:
        raise ValidationError("m must be >= 1")

    rows = np.empty((m, n))
    if (block_dims is not None and block_dims[1]
            and not np.any(A[block_dims[0]:, : block_dims[0]])):
        n_x = block_dims[0]
        E_xx = expm(-A[:n_x, :n_x] * tau)
        E_xy = expm(-A * tau)[:n_x, n_x:]
        E_yy = expm(-A[n_x:, n_x:] * tau)
        r_x, r_y = h_full[:n_x].copy(), h_full[n_x:].copy()
        for k in range(m):
            rows[k, :n_x] = r_x
            rows[k, n_x:] = r_y
            r_x, r_y = r_x @ E_xx, r_x @ E_xy + r_y @ E_yy
    else:
        E = expm(-A * tau)
        r = h_full.copy()
        for k in range(m):
            rows[k] = r
            r = r @ E
    s = np.linalg.svd(rows, compute_uv=False)
    rank = int(np.sum(s > s[0] * 1e-10)) if s.size and s[0] > 0 else 0
    return rows, s, rank


def build_maps(traj, emb_x, emb_y, kinds=None):
    """Assemble the named maps as contemporaneous point-set pairs.

    ``emb_x`` and ``emb_y`` must be embeddings of measurements of ``traj``;
    every map is restricted to the time range where both embeddings and the
    trajectory are defined, so all ten maps share one time indexing (a pair
    of times means the same states in every map).
    """
    rng = align(emb_x, emb_y)
    n_x_pts = emb_x.points[rng.a_rows]
    n_y_pts = emb_y.points[rng.b_rows]
    m_x = traj.x[rng.t_start:rng.t_stop]
    m_y = traj.y[rng.t_start:rng.t_stop]
    m_xy = traj.samples[rng.t_start:rng.t_stop]

    pairs = {
        MapKind.PhiGammaX: (m_x, n_x_pts),
        MapKind.PhiGammaY: (m_y, n_y_pts),
        MapKind.PhiPhiX: (m_xy, n_x_pts),
        MapKind.PhiPhiY: (m_xy, n_y_pts),
        MapKind.PiX: (m_xy, m_x),
        MapKind.PiY: (m_xy, m_y),
        MapKind.IotaX: (m_y, m_xy),
        MapKind.IotaY: (m_x, m_xy),
        MapKind.PsiYtoX: (n_y_pts, n_x_pts),
        MapKind.PsiXtoY: (n_x_pts, n_y_pts),
    }
    if kinds is None:
        kinds = list(pairs)
    missing = [k for k in kinds if k not in pairs]
    if missing:
        raise ValidationError(
            f"maps {[k.value for k in missing]} need a joint measurement "
            f"functional and cannot be built from two scalar embeddings"
        )
    return {
        kind: MapUnderTest(kind=kind, domain_points=pairs[kind][0],
                           image_points=pairs[kind][1])
        for kind in kinds
    }


def chain_ratios(maps, n_pairs, seed):
    """Ratios of the composition factors of the cross-embedding map.

    The map from response embedding to driver embedding factors through the
    attractors: embed-the-driver after project-to-x after invert the
    response embedding.  On any shared pair sample the factor ratios fulfil

        ratio(PsiYtoX) = ratio(PhiGammaX) * ratio(PiX) / ratio(PhiPhiY)

    pairwise, so the max of the left is bounded by the product of the
    factor extremes.  Pairs degenerate in any factor domain are rejected
    during sampling, keeping every ratio defined on the same pairs.
    """
    needed = [MapKind.PsiYtoX, MapKind.PhiGammaX, MapKind.PiX,
              MapKind.PhiPhiY]
    missing = [k for k in needed if k not in maps]
    if missing:
        raise ValidationError(f"chain check needs maps {missing}")
    domains = [maps[k].domain_points for k in needed]
    n_points = maps[MapKind.PsiYtoX].n_points
    ii, jj = sample_pair_indices(domains, n_points, n_pairs, seed)
    return {k: ratios_on_pairs(maps[k], ii, jj) for k in needed}


def subseed(master, *path):
    """Deterministic child seed for a grid cell, derived from its position."""
    return np.random.SeedSequence([int(master), *map(int, path)])


def distance_ratio_sweep(simulate_fn, coupling_grid, map_kinds,
                         n_pairs=N_PAIRS_SWEEP, seed=0):
    """Empirical ratio profiles of selected maps across a coupling grid.

    Parameters
    ----------
    simulate_fn : callable C -> (Trajectory, DelayEmbedding, DelayEmbedding)
        Encodes the system family plus simulation and embedding settings.
    coupling_grid : sequence of float
    map_kinds : sequence of MapKind
    n_pairs : int
        Pair budget per (C, map) cell.
    seed : int
        Master seed; each cell derives its own seed from (seed, C index,
        map kind index) so cells can run in any order or in parallel.

    Returns
    -------
    list of dict
        Long-form records with keys C, map, lower, p5, p50, p95, upper.
    """
    if len(coupling_grid) == 0:
        raise ValidationError("coupling grid must not be empty")
    kind_order = {kind: pos for pos, kind in enumerate(MapKind)}
    records = []
    for c_index, coupling in enumerate(coupling_grid):
        traj, emb_x, emb_y = simulate_fn(coupling)
        maps = build_maps(traj, emb_x, emb_y, kinds=map_kinds)
        for kind in map_kinds:
            cell_seed = subseed(seed, c_index, kind_order[kind])
            est = empirical_isometry(maps[kind], n_pairs=n_pairs,
                                     seed=cell_seed)
            records.append({
                "C": float(coupling),
                "map": kind.value,
                "lower": est.lower,
                "p5": est.percentiles[5],
                "p50": est.percentiles[50],
                "p95": est.percentiles[95],
                "upper": est.upper,
            })
    return records
