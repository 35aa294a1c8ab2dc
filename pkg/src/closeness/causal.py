"""Distance-ratio certificates and verdict logic for directional coupling.

The spine of the package: if the driver truly influences the response, the
contemporaneous map from response embedding to driver embedding inherits a
provable expansiveness budget u_gamma_x / l_phi_y.  A single point pair
whose squared-distance ratio exceeds that budget is therefore a certificate
that the influence is absent.  The converse direction (no certificate means
influence) additionally needs two declared assumptions, which is what the
verdict logic encodes.
"""
from __future__ import annotations

import dataclasses
import enum

import numpy as np

from .errors import (
    DegenerateInputError,
    ThresholdUndefined,
    ValidationError,
)
from .isometry import COINCIDENCE_CUTOFF, MapUnderTest, sample_pair_indices

#: below this point count, pair searches are exhaustive instead of sampled
EXHAUSTIVE_LIMIT = 2000


class ThresholdProvenance(enum.Enum):
    EMPIRICAL = "empirical"
    ANALYTIC = "analytic"


@dataclasses.dataclass(frozen=True)
class CertificateThreshold:
    """Expansiveness budget u_gamma_x / l_phi_y with provenance.

    Empirical thresholds come from ratio profiles measured on the same data
    (which makes the certificate self-referential, a documented caveat);
    analytic thresholds come from the linear embedding bounds.
    """

    u_gamma_x: float
    l_phi_y: float
    provenance: ThresholdProvenance

    def __post_init__(self):
        if self.l_phi_y <= 0:
            raise ThresholdUndefined(
                "lower embedding constant is not positive; the response "
                "embedding is empirically non-injective and no finite "
                "expansiveness budget exists"
            )
        if self.u_gamma_x <= 0:
            raise ValidationError("u_gamma_x must be positive")

    @property
    def threshold(self):
        return self.u_gamma_x / self.l_phi_y


@dataclasses.dataclass(frozen=True)
class PairWitness:
    """A concrete pair of time indices certifying a ratio violation."""

    i: int
    j: int
    ratio: float


class Direction(enum.Enum):
    X_TO_Y = "x_to_y"
    Y_TO_X = "y_to_x"


class Outcome(enum.Enum):
    RULED_OUT = "ruled_out"
    CONSISTENT_WITH_COUPLING = "consistent_with_coupling"
    ESTABLISHED = "established"
    INCONCLUSIVE = "inconclusive"


@dataclasses.dataclass(frozen=True)
class CausalVerdict:
    direction_tested: Direction
    outcome: Outcome
    witness: PairWitness | None
    assumption1_checked: bool
    assumption2_declared: bool
    threshold: float | None = None

    def __post_init__(self):
        if self.outcome is Outcome.ESTABLISHED and not (
            self.assumption1_checked and self.assumption2_declared
        ):
            raise ValidationError(
                "a positive causal verdict requires both assumptions"
            )

    def to_json_dict(self):
        return {
            "direction": self.direction_tested.value,
            "outcome": self.outcome.value,
            "threshold": self.threshold,
            "witness": None if self.witness is None else {
                "i": int(self.witness.i),
                "j": int(self.witness.j),
                "ratio": self.witness.ratio,
            },
            "assumptions": {
                "assumption1_checked": self.assumption1_checked,
                "assumption2_declared": self.assumption2_declared,
            },
        }


def _max_ratio_exhaustive(domain, image, chunk=256):
    """Max squared-distance ratio over all admissible pairs (i < j)."""
    n = domain.shape[0]
    best_ratio = -np.inf
    best_pair = None
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        dd = domain[start:stop, None, :] - domain[None, :, :]
        dom = np.einsum("ijk,ijk->ij", dd, dd)
        di = image[start:stop, None, :] - image[None, :, :]
        img = np.einsum("ijk,ijk->ij", di, di)
        rows = np.arange(start, stop)[:, None]
        cols = np.arange(n)[None, :]
        admissible = (cols > rows) & (dom >= COINCIDENCE_CUTOFF)
        if not admissible.any():
            continue
        ratio = np.where(admissible, img / np.where(admissible, dom, 1.0),
                         -np.inf)
        flat = int(np.argmax(ratio))
        r = float(ratio.flat[flat])
        if r > best_ratio:
            best_ratio = r
            best_pair = (start + flat // n, flat % n)
    if best_pair is None:
        raise DegenerateInputError("all domain pairs coincide")
    return best_pair[0], best_pair[1], best_ratio


def _max_ratio_sampled(domain, image, n_pairs, seed):
    ii, jj = sample_pair_indices([domain], domain.shape[0], n_pairs, seed)
    dd = domain[ii] - domain[jj]
    di = image[ii] - image[jj]
    dom = np.einsum("ij,ij->i", dd, dd)
    img = np.einsum("ij,ij->i", di, di)
    ratios = img / dom
    best = int(np.argmax(ratios))
    return int(ii[best]), int(jj[best]), float(ratios[best])


def expansivity_certificate(psi_pairs, thr, n_pairs=50_000, seed=0):
    """Search for a pair whose ratio exceeds the expansiveness budget.

    ``psi_pairs`` is the contemporaneous (response embedding, driver
    embedding) pairing, as a MapUnderTest or a (domain, image) array tuple.
    All pairs are checked exhaustively when the point count is at most
    ``EXHAUSTIVE_LIMIT``; otherwise ``n_pairs`` seeded samples are used.
    Returns the maximal-ratio pair as a witness if it crosses the
    threshold, else None.
    """
    if isinstance(psi_pairs, MapUnderTest):
        domain, image = psi_pairs.domain_points, psi_pairs.image_points
    else:
        domain, image = psi_pairs
        if domain.shape[0] != image.shape[0]:
            raise ValidationError("domain and image must pair equal counts")
    if domain.shape[0] < 2:
        raise ValidationError("need at least two paired points")

    if domain.shape[0] <= EXHAUSTIVE_LIMIT:
        i, j, ratio = _max_ratio_exhaustive(domain, image)
    else:
        i, j, ratio = _max_ratio_sampled(domain, image, n_pairs, seed)
    if ratio > thr.threshold:
        return PairWitness(i=i, j=j, ratio=ratio)
    return None


def check_assumption1(traj, bound, n_pairs=50_000, seed=0):
    """Look for a state pair where the driver moves more than the budget.

    The reverse-direction expansivity hypothesis states that, whenever the
    response influences the driver, some pair of times satisfies

        ||x_t - x_s||^2 > (bound - 1) * ||y_t - y_s||^2

    with bound = u_gamma_x * u_gamma_y / (l_phi_x * l_phi_y).  Finding such
    a pair confirms the hypothesis's premise on this data set; the returned
    witness carries the (possibly infinite) observed ratio.
    """
    if bound < 1:
        raise ValidationError("bound must be >= 1")
    x, y = traj.x, traj.y
    n = x.shape[0]
    if n < 2:
        raise ValidationError("need at least two samples")

    if n <= EXHAUSTIVE_LIMIT:
        ii, jj = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        ii = rng.integers(0, n, size=n_pairs)
        jj = rng.integers(0, n, size=n_pairs)
        keep = ii != jj
        ii, jj = ii[keep], jj[keep]
        if ii.size == 0:
            return None
    dx = x[ii] - x[jj]
    dy = y[ii] - y[jj]
    lhs = np.einsum("ij,ij->i", dx, dx)
    rhs = np.einsum("ij,ij->i", dy, dy)
    margin = lhs - (bound - 1.0) * rhs
    best = int(np.argmax(margin))
    if margin[best] <= 0:
        return None
    with np.errstate(divide="ignore"):
        ratio = float(lhs[best] / rhs[best]) if rhs[best] > 0 else np.inf
    return PairWitness(i=int(ii[best]), j=int(jj[best]), ratio=ratio)


def iff_test(psi_pairs, thresholds, assumption2_declared,
             assumption1_result=None, direction=Direction.X_TO_Y,
             n_pairs=50_000, seed=0):
    """Combine certificate search and assumption flags into a verdict.

    A witness refutes the tested direction outright (no assumptions
    needed).  Absence of a witness upgrades to Established only when the
    causal-sufficiency flag is declared by the user and the expansivity
    hypothesis has been checked; otherwise the data are merely consistent
    with coupling.  Degenerate inputs produce Inconclusive.
    """
    assumption1_checked = bool(
        assumption1_result is True
        or isinstance(assumption1_result, PairWitness)
    )
    try:
        witness = expansivity_certificate(
            psi_pairs, thresholds, n_pairs=n_pairs, seed=seed
        )
    except (DegenerateInputError, ValidationError):
        return CausalVerdict(
            direction_tested=direction,
            outcome=Outcome.INCONCLUSIVE,
            witness=None,
            assumption1_checked=assumption1_checked,
            assumption2_declared=bool(assumption2_declared),
            threshold=thresholds.threshold,
        )
    if witness is not None:
        outcome = Outcome.RULED_OUT
    elif assumption2_declared and assumption1_checked:
        outcome = Outcome.ESTABLISHED
    else:
        outcome = Outcome.CONSISTENT_WITH_COUPLING
    return CausalVerdict(
        direction_tested=direction,
        outcome=outcome,
        witness=witness,
        assumption1_checked=assumption1_checked,
        assumption2_declared=bool(assumption2_declared),
        threshold=thresholds.threshold,
    )
