"""Published closeness-based heuristics for directional coupling.

All four families score the same intuition: if the driver influences the
response, then times that look similar on the response embedding should
also look similar on the driver embedding.

* Mutual-neighbor distance score M: compares the mean squared distance to
  mutual neighbors (indices found on the other embedding) against the same
  point's nearest-neighbor and global baselines.
* Mutual-neighbor rank score L: the same comparison in rank space, which is
  insensitive to distance scaling; per-point paired rank scores feed a
  one-sided Wilcoxon signed-rank test.
* Convergent cross-mapping: predicts the driver measurement from simplex
  neighbors on the response embedding and asks whether prediction skill
  grows as the library of candidate neighbors grows.
* Continuity statistic: direct epsilon-delta evidence that the map from one
  embedding to the other is continuous, with a binomial null model.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import rankdata

from .embedding import DelayEmbedding, NeighborIndex, align
from .errors import DegenerateInputError, ValidationError

#: floor used in place of a zero nearest-neighbor distance in CCM weights
CCM_DISTANCE_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# shared geometry helpers


def _aligned_points(nx, ny):
    rng = align(nx, ny)
    return nx.points[rng.a_rows], ny.points[rng.b_rows]


def _mean_square_distance_to_all(points):
    """D_i = mean over j != i of ||p_i - p_j||^2, in closed form."""
    t_prime = points.shape[0]
    norms = np.einsum("ij,ij->i", points, points)
    total = norms.sum()
    centroid_dot = points @ points.sum(axis=0)
    return (t_prime * norms + total - 2.0 * centroid_dot) / (t_prime - 1)


def _mean_square_distance_to(points, neighbor_idx):
    diff = points[neighbor_idx] - points[:, None, :]
    return np.einsum("ijk,ijk->ij", diff, diff).mean(axis=1)


# ---------------------------------------------------------------------------
# mutual-neighbor distance score


@dataclasses.dataclass(frozen=True, eq=False)
class NeighborStats:
    """Per-point distance baselines on one embedding.

    D_mean is the mean squared distance to all other points, D_knn to the k
    nearest admissible points, D_mutual to the k points indexed by the other
    embedding's nearest neighbors.  Nearest-k minimality gives
    D_knn <= D_mutual and D_knn <= D_mean pointwise.
    """

    D_mean: np.ndarray
    D_knn: np.ndarray
    D_mutual: np.ndarray
    k: int
    T_prime: int


@dataclasses.dataclass(frozen=True)
class MResult:
    m_x_given_y: float
    m_y_given_x: float
    delta_m: float
    m_s: float
    stats_x: NeighborStats
    stats_y: NeighborStats


def _neighbor_stats(points, own_idx, other_idx, k):
    t_prime = points.shape[0]
    return NeighborStats(
        D_mean=_mean_square_distance_to_all(points),
        D_knn=_mean_square_distance_to(points, own_idx),
        D_mutual=_mean_square_distance_to(points, other_idx),
        k=k,
        T_prime=t_prime,
    )


def _m_score(stats):
    denom = stats.D_mean - stats.D_knn
    if np.any(denom <= 0):
        raise DegenerateInputError(
            "an embedding has no distance contrast (D_mean equals D_knn)"
        )
    terms = (stats.D_mean - stats.D_mutual) / denom
    return max(float(terms.mean()), 0.0)


def andrzejak_M(nx, ny, q):
    """Mutual-neighbor distance scores in both directions.

    Returns an :class:`MResult` with M(X|Y), M(Y|X), their difference
    delta_m = M(X|Y) - M(Y|X) and mean m_s.  M(X|Y) near 1 means the
    response embedding's neighbors are also close on the driver embedding
    (evidence that the response contains driver information, i.e. that the
    driver influences the response); near 0 means independence.
    """
    points_x, points_y = _aligned_points(nx, ny)
    q.validate_for(points_x.shape[0])
    idx_x = NeighborIndex(points_x).query_all(q)
    idx_y = NeighborIndex(points_y).query_all(q)
    stats_x = _neighbor_stats(points_x, idx_x, idx_y, q.k)
    stats_y = _neighbor_stats(points_y, idx_y, idx_x, q.k)
    m_xy = _m_score(stats_x)
    m_yx = _m_score(stats_y)
    return MResult(
        m_x_given_y=m_xy,
        m_y_given_x=m_yx,
        delta_m=m_xy - m_yx,
        m_s=0.5 * (m_xy + m_yx),
        stats_x=stats_x,
        stats_y=stats_y,
    )


# ---------------------------------------------------------------------------
# mutual-neighbor rank score


@dataclasses.dataclass(frozen=True, eq=False)
class RankStats:
    """Rank-space analog of :class:`NeighborStats`.

    g_ij is the rank of the distance from point i to point j among all of
    point i's distances (ranks 1..T'-1, ties averaged), so the global mean
    G_mean is exactly T'/2 and the nearest-k mean G_knn is (k+1)/2.
    """

    G_mean: float
    G_knn: float
    G_mutual: np.ndarray
    k: int
    T_prime: int


@dataclasses.dataclass(frozen=True)
class LResult:
    l_x_given_y: float
    l_y_given_x: float
    delta_l: float
    wilcoxon_p: float
    per_point_delta: np.ndarray
    stats_x: RankStats
    stats_y: RankStats


def _mutual_ranks(points, other_idx, chunk=256):
    """Mean rank of each point's mutual neighbors, ties averaged."""
    t_prime, k = other_idx.shape
    norms = np.einsum("ij,ij->i", points, points)
    out = np.empty(t_prime)
    for start in range(0, t_prime, chunk):
        stop = min(start + chunk, t_prime)
        rows = np.arange(start, stop)
        d2 = (norms[rows, None] + norms[None, :]
              - 2.0 * points[rows] @ points.T)
        d2[np.arange(stop - start), rows] = 0.0
        thresholds = np.take_along_axis(d2, other_idx[rows], axis=1)
        less = (d2[:, :, None] < thresholds[:, None, :]).sum(axis=1)
        equal = (d2[:, :, None] == thresholds[:, None, :]).sum(axis=1)
        # remove the self column (distance 0) from both counts
        less -= (thresholds > 0)
        equal -= (thresholds == 0)
        ranks = less + (equal + 1) / 2.0
        out[start:stop] = ranks.mean(axis=1)
    return out


def chicharro_L(nx, ny, q):
    """Mutual-neighbor rank scores, their difference, and its sign test.

    L(X|Y) compares the mean rank of mutual neighbors against the constants
    G_mean = T'/2 and G_knn = (k+1)/2; 1 means mutual neighbors are exactly
    the nearest neighbors, 0 means they rank no better than chance.  The
    p-value is a one-sided Wilcoxon signed-rank test of the per-point
    paired differences L_i(X|Y) - L_i(Y|X) being positive.
    """
    points_x, points_y = _aligned_points(nx, ny)
    t_prime = points_x.shape[0]
    q.validate_for(t_prime)
    idx_x = NeighborIndex(points_x).query_all(q)
    idx_y = NeighborIndex(points_y).query_all(q)

    g_mean = t_prime / 2.0
    g_knn = (q.k + 1) / 2.0
    denom = g_mean - g_knn
    if denom <= 0:
        raise DegenerateInputError("too few points for rank contrast")

    mutual_x = _mutual_ranks(points_x, idx_y)
    mutual_y = _mutual_ranks(points_y, idx_x)
    per_point_x = (g_mean - mutual_x) / denom
    per_point_y = (g_mean - mutual_y) / denom
    l_xy = float(per_point_x.mean())
    l_yx = float(per_point_y.mean())
    delta = per_point_x - per_point_y
    nonzero = np.count_nonzero(delta)
    if nonzero >= 5:
        _, p = wilcoxon_signed_rank(delta)
    else:
        p = 1.0  # too few informative points to reject anything

    stats_x = RankStats(G_mean=g_mean, G_knn=g_knn, G_mutual=mutual_x,
                        k=q.k, T_prime=t_prime)
    stats_y = RankStats(G_mean=g_mean, G_knn=g_knn, G_mutual=mutual_y,
                        k=q.k, T_prime=t_prime)
    return LResult(
        l_x_given_y=l_xy,
        l_y_given_x=l_yx,
        delta_l=l_xy - l_yx,
        wilcoxon_p=float(p),
        per_point_delta=delta,
        stats_x=stats_x,
        stats_y=stats_y,
    )


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test


def _exact_tail_probability(double_ranks, double_w):
    """P(W+ >= w) by dynamic programming over all 2^n sign assignments.

    Ranks are doubled so tie-averaged half-integer ranks become integers;
    the counts polynomial is the product of (1 + z^(2 r_i)).
    """
    total = int(double_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in double_ranks:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts += shifted
    threshold = int(math.ceil(double_w - 1e-9))
    return counts[threshold:].sum() / counts.sum()


def wilcoxon_signed_rank(differences):
    """One-sided Wilcoxon signed-rank test for positive location shift.

    Zero differences are dropped, tied absolute values get average ranks,
    and W+ is the rank sum of the positive differences.  The null tail
    P(W+ >= observed) is exact (full enumeration via its generating
    polynomial) up to n = 20 and a continuity-corrected normal
    approximation with tie correction beyond.

    Returns
    -------
    (W_plus, p_one_sided)
    """
    d = np.asarray(differences, dtype=float)
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise DegenerateInputError("all differences are zero")
    if n < 5:
        raise ValidationError("need at least 5 nonzero differences")

    ranks = rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0].sum())

    if n <= 20:
        double_ranks = np.round(ranks * 2).astype(np.int64)
        p = _exact_tail_probability(double_ranks, 2.0 * w_plus)
        return w_plus, float(p)

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= (tie_counts ** 3 - tie_counts).sum() / 48.0
    if var <= 0:
        raise DegenerateInputError("zero variance in the rank statistic")
    z = (w_plus - mean - 0.5) / math.sqrt(var)
    p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return w_plus, float(p)


# ---------------------------------------------------------------------------
# convergent cross-mapping


@dataclasses.dataclass(frozen=True, eq=False)
class CcmResult:
    library_sizes: np.ndarray
    skill: np.ndarray
    n_neighbors: int
    n_replicates: int
    rng_seed: int

    @property
    def final_skill(self):
        return float(self.skill[-1])


def simplex_weights(distances):
    """Exponential simplex weights for sorted neighbor distances.

    The nearest distance scales the exponent; a zero nearest distance falls
    back to a small floor so the weights stay defined.  Weights are
    positive and sum to one, with the nearest neighbor weighted heaviest.
    """
    distances = np.asarray(distances, dtype=float)
    denom = np.maximum(distances[..., :1], CCM_DISTANCE_FLOOR)
    u = np.exp(-distances / denom)
    return u / u.sum(axis=-1, keepdims=True)


def _pearson(a, b):
    sa, sb = a.std(), b.std()
    if sa < 1e-15 or sb < 1e-15:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def ccm(source_embedding, target_series, library_sizes, q, seed=0,
        n_replicates=5):
    """Cross-map prediction skill as a function of library size.

    Every aligned point of ``source_embedding`` is estimated as the simplex
    weighted sum of the target values at its m+1 nearest neighbors, where
    neighbors are restricted to a contiguous random-offset library block of
    the requested size (one block per replicate, seed-controlled).  Skill
    is the Pearson correlation between estimates and the true target,
    averaged over replicates; for vector targets the per-column skills are
    averaged.

    ``target_series`` may cover the full trajectory (length T, indexed by
    the embedding's times) or be pre-aligned (length T').
    """
    if not isinstance(source_embedding, DelayEmbedding):
        raise ValidationError("source_embedding must be a DelayEmbedding")
    points = source_embedding.points
    t_prime = points.shape[0]
    target = np.asarray(target_series, dtype=float)
    if target.ndim == 1:
        target = target[:, None]
    if target.shape[0] == t_prime:
        aligned_target = target
    elif target.shape[0] >= source_embedding.base_offset + t_prime:
        aligned_target = target[source_embedding.times]
    else:
        raise ValidationError(
            "target series shorter than the embedding's time range"
        )

    n_neighbors = source_embedding.m + 1
    library_sizes = np.asarray(sorted(int(s) for s in library_sizes))
    if library_sizes.size == 0:
        raise ValidationError("need at least one library size")
    if library_sizes[-1] > t_prime:
        raise ValidationError(
            f"library size {library_sizes[-1]} exceeds {t_prime} points"
        )
    min_needed = n_neighbors + 2 * q.theiler_window + 1
    if library_sizes[0] < min_needed:
        raise ValidationError(
            f"library size {library_sizes[0]} cannot supply {n_neighbors} "
            f"neighbors under the Theiler window"
        )

    rng = np.random.default_rng(seed)
    skills = np.empty(library_sizes.size)
    for li, lib_size in enumerate(library_sizes):
        replicate_skills = np.empty(n_replicates)
        for rep in range(n_replicates):
            offset = int(rng.integers(0, t_prime - lib_size + 1))
            estimates = _cross_map_estimate(
                points, aligned_target, offset, int(lib_size),
                n_neighbors, q.theiler_window,
            )
            cols = [
                _pearson(estimates[:, c], aligned_target[:, c])
                for c in range(aligned_target.shape[1])
            ]
            replicate_skills[rep] = float(np.mean(cols))
        skills[li] = replicate_skills.mean()
    return CcmResult(
        library_sizes=library_sizes,
        skill=skills,
        n_neighbors=n_neighbors,
        n_replicates=n_replicates,
        rng_seed=seed,
    )


def _cross_map_estimate(points, target, offset, lib_size, n_neighbors,
                        theiler_window):
    """Simplex estimates of the target at every point from one library."""
    library = points[offset:offset + lib_size]
    tree = cKDTree(library)
    kq = min(lib_size, n_neighbors + 2 * theiler_window + 1 + 8)
    dist, local = tree.query(points, k=kq)
    global_idx = local + offset
    t_all = np.arange(points.shape[0])[:, None]
    admissible = np.abs(global_idx - t_all) > theiler_window
    # order admissible candidates per row by (distance, index)
    masked = np.where(admissible, dist, np.inf)
    order = np.lexsort((global_idx, masked), axis=-1)
    top = order[:, :n_neighbors]
    nbr_dist = np.take_along_axis(masked, top, axis=1)
    nbr_idx = np.take_along_axis(global_idx, top, axis=1)
    if np.isinf(nbr_dist).any():
        raise ValidationError(
            "library too small for the neighbor count under the "
            "Theiler window"
        )
    w = simplex_weights(nbr_dist)
    return np.einsum("ij,ijk->ik", w, target[nbr_idx])


# ---------------------------------------------------------------------------
# continuity statistic


@dataclasses.dataclass(frozen=True, eq=False)
class ContinuityStat:
    """Epsilon-delta continuity evidence for a map and its inverse."""

    epsilons: np.ndarray
    theta: np.ndarray
    theta_inverse: np.ndarray
    theta_product: np.ndarray
    coverage: np.ndarray
    coverage_inverse: np.ndarray
    n_probes: int


def _continuity_curve(domain_pts, image_pts, epsilons, probes):
    """Theta(eps) for one direction, plus the probe coverage per eps."""
    t_prime = domain_pts.shape[0]
    n_eps = epsilons.size
    null_sum = np.zeros(n_eps)
    used = np.zeros(n_eps, dtype=np.int64)
    for probe in probes:
        d_dom = np.linalg.norm(domain_pts - domain_pts[probe], axis=1)
        d_img = np.linalg.norm(image_pts - image_pts[probe], axis=1)
        d_dom[probe] = np.inf  # exclude the probe itself
        order = np.lexsort((np.arange(t_prime), d_dom))[:-1]
        img_sorted = d_img[order]
        img_rest = d_img[np.arange(t_prime) != probe]
        for ei, eps in enumerate(epsilons):
            inside = img_sorted <= eps
            n_run = int(np.argmin(inside)) if not inside.all() else inside.size
            if n_run == 0:
                # even the nearest neighbor leaves the ball: no evidence,
                # the null probability stays at mass**0 = 1
                null_sum[ei] += 1.0
                continue
            ball_mass = np.count_nonzero(img_rest <= eps) / (t_prime - 1)
            null_sum[ei] += ball_mass ** n_run
            used[ei] += 1
    theta = 1.0 - null_sum / len(probes)
    coverage = used / len(probes)
    return theta, coverage


def pecora_continuity(domain_emb, image_emb, epsilon_grid, n_probe_points,
                      seed=0):
    """Continuity evidence curves for the cross-embedding map.

    For each probe point and tolerance eps, the domain neighborhood is
    shrunk (by walking the neighbors in domain order) until every member
    maps within eps of the probe's image; the chance of n points doing so
    under the null is (ball mass)^n, and theta(eps) is one minus the mean
    null probability.  A probe whose nearest domain neighbor already leaves
    the ball offers no evidence and keeps its null probability at one; the
    coverage fields report the share of probes with at least one conforming
    neighbor.  The same epsilon grid is applied to the forward and inverse
    directions, so the two state spaces should be on comparable scales.
    """
    domain_pts, image_pts = _aligned_points(domain_emb, image_emb)
    epsilons = np.asarray(sorted(float(e) for e in epsilon_grid))
    if epsilons.size == 0 or np.any(epsilons <= 0):
        raise ValidationError("epsilon grid must be positive")
    t_prime = domain_pts.shape[0]
    if t_prime < 3:
        raise ValidationError("need at least three aligned points")
    rng = np.random.default_rng(seed)
    n_probes = min(int(n_probe_points), t_prime)
    if n_probes < 1:
        raise ValidationError("need at least one probe point")
    probes = np.sort(rng.choice(t_prime, size=n_probes, replace=False))

    theta, coverage = _continuity_curve(domain_pts, image_pts, epsilons,
                                        probes)
    theta_inv, coverage_inv = _continuity_curve(image_pts, domain_pts,
                                                epsilons, probes)
    return ContinuityStat(
        epsilons=epsilons,
        theta=theta,
        theta_inverse=theta_inv,
        theta_product=theta * theta_inv,
        coverage=coverage,
        coverage_inverse=coverage_inv,
        n_probes=n_probes,
    )
