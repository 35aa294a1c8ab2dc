"""Linear systems whose persistent dynamics are undamped oscillations.

The systems handled here have a real system matrix with d strictly imaginary
conjugate eigenvalue pairs {+-j*theta_i} (all other eigenvalues strictly
stable), so trajectories on the attractor are quasi-periodic and can be
propagated exactly through the eigendecomposition.  The worked four-state
example couples a single driver oscillator into a two-oscillator response,
giving a ground-truth one-way interaction for the rest of the package.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConditioningError, ValidationError
from .trajectory import Trajectory

#: eigenvalues within this of the imaginary axis count as purely imaginary
_REAL_PART_TOL = 1e-12

#: worked-example oscillator frequencies (radians per time unit)
EXAMPLE_THETA_1 = 2.3129
EXAMPLE_THETA_2 = 0.1765


@dataclasses.dataclass(frozen=True)
class LinearSystemAd:
    """Eigendecomposition-backed oscillatory linear system.

    Attributes
    ----------
    A : ndarray, shape (n, n)
        Real system matrix, block form [[A_xx, 0], [A_yx, A_yy]] when the
        system represents a one-way forced pair.
    V : ndarray, shape (n, 2d), complex
        Eigenvectors of the imaginary pairs, conjugate columns adjacent with
        the +j*theta member first.
    thetas : ndarray, shape (d,)
        Positive, pairwise distinct oscillation frequencies.
    V_full, eigenvalues_full : ndarray
        Complete eigendecomposition (oscillatory columns first) used for
        exact propagation.
    n_x, n_y : int
        Block dimensions; ``n_y = 0`` marks an autonomous (unforced) system.
    """

    A: np.ndarray
    V: np.ndarray
    thetas: np.ndarray
    V_full: np.ndarray
    eigenvalues_full: np.ndarray
    n_x: int
    n_y: int

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def d(self):
        return len(self.thetas)

    @property
    def Lambda(self):
        """Oscillatory eigenvalues, ordered to match the columns of V."""
        return self.eigenvalues_full[: 2 * self.d]

    @property
    def A_xx(self):
        return self.A[: self.n_x, : self.n_x]

    @property
    def A_yx(self):
        return self.A[self.n_x:, : self.n_x]

    @property
    def A_yy(self):
        return self.A[self.n_x:, self.n_x:]


@dataclasses.dataclass(frozen=True)
class MeasurementSet:
    """Normalized measurement vectors for a forced linear system.

    Each vector reads a different view of the state: the full joint state,
    the joint state restricted to one block, or a block directly.  Vectors
    are scaled so their squared norm is 2d/m for the embedding length m they
    were built for, which makes the analytic embedding scale m-independent.
    """

    joint: np.ndarray      # length n, supported on both blocks
    joint_x: np.ndarray    # length n, reads only the x block
    joint_y: np.ndarray    # length n, reads only the y block
    x_block: np.ndarray    # length n_x, applied to the x slice
    y_block: np.ndarray    # length n_y, applied to the y slice
    m: int                 # embedding length the normalization targets


def build_class_Ad(V, thetas, extra_eigs=None, block_dims=None):
    """Assemble a validated oscillatory system from its eigenstructure.

    Parameters
    ----------
    V : complex ndarray, shape (n, 2d)
        Oscillatory eigenvectors in adjacent conjugate pairs (+j first).
    thetas : sequence of float
        Oscillation frequencies; must be positive and pairwise distinct.
    extra_eigs : list of (eigenvalue, eigenvector), optional
        Remaining modes.  Every eigenvalue must have strictly negative real
        part; complex ones must appear together with their conjugates.
    block_dims : (int, int), optional
        Forced-pair block dimensions (n_x, n_y); defaults to treating the
        whole state as the driver block (autonomous system).

    Raises
    ------
    ValidationError
        Repeated or nonpositive frequencies, malformed conjugate pairs, an
        extra eigenvalue with nonnegative real part, or a complex A.
    ConditioningError
        Near-singular full eigenvector matrix.
    """
    V = np.asarray(V, dtype=complex)
    thetas = np.asarray(thetas, dtype=float)
    d = thetas.size
    if V.ndim != 2 or V.shape[1] != 2 * d:
        raise ValidationError("V must have one conjugate column pair per theta")
    n = V.shape[0]
    if np.any(thetas <= 0):
        raise ValidationError("all thetas must be positive")
    if len(np.unique(thetas)) != d:
        raise ValidationError("thetas must be pairwise distinct")
    for i in range(d):
        if not np.allclose(V[:, 2 * i + 1], np.conj(V[:, 2 * i])):
            raise ValidationError(
                f"columns {2 * i} and {2 * i + 1} of V are not a conjugate pair"
            )

    extra_eigs = list(extra_eigs or [])
    if 2 * d + len(extra_eigs) != n:
        raise ValidationError(
            f"need {n - 2 * d} extra eigenpairs to complete dimension {n}"
        )
    extra_vals = np.array([lam for lam, _ in extra_eigs], dtype=complex)
    if extra_vals.size and np.any(extra_vals.real >= 0):
        raise ValidationError(
            "extra eigenvalues must have strictly negative real part"
        )
    # complex extras must close under conjugation for A to be real
    for lam in extra_vals:
        if abs(lam.imag) > _REAL_PART_TOL:
            if not np.any(np.isclose(extra_vals, np.conj(lam))):
                raise ValidationError(
                    f"extra eigenvalue {lam} lacks its conjugate"
                )

    lam_osc = np.empty(2 * d, dtype=complex)
    lam_osc[0::2] = 1j * thetas
    lam_osc[1::2] = -1j * thetas
    eigenvalues_full = np.concatenate([lam_osc, extra_vals])
    if len(np.unique(np.round(eigenvalues_full, 12))) != n:
        raise ValidationError("eigenvalues must be pairwise distinct")

    V_full = V
    if extra_eigs:
        V_extra = np.column_stack([vec for _, vec in extra_eigs]).astype(complex)
        V_full = np.column_stack([V, V_extra])

    cond = np.linalg.cond(V_full)
    if not np.isfinite(cond) or cond > 1e12:
        raise ConditioningError(f"eigenvector matrix condition number {cond:.3g}")

    A = V_full @ np.diag(eigenvalues_full) @ np.linalg.inv(V_full)
    scale = max(1.0, np.abs(A).max())
    if np.abs(A.imag).max() > 1e-9 * scale:
        raise ValidationError(
            "eigenstructure does not produce a real system matrix"
        )
    A = A.real

    if block_dims is None:
        block_dims = (n, 0)
    n_x, n_y = block_dims
    if n_x < 1 or n_y < 0 or n_x + n_y != n:
        raise ValidationError(f"block_dims {block_dims} do not sum to {n}")

    return LinearSystemAd(
        A=A, V=V, thetas=thetas, V_full=V_full,
        eigenvalues_full=eigenvalues_full, n_x=n_x, n_y=n_y,
    )


def simulate_linear(sys, z0, T_s, n_samples):
    """Propagate exactly through the eigendecomposition.

    Sample t is ``V_full exp(Lambda_full * t * T_s) V_full^{-1} z0``; there is
    no integration error beyond the linear algebra itself.  The imaginary
    residue of the reconstructed states must stay below 1e-9 or a
    ConditioningError is raised.
    """
    if T_s <= 0:
        raise ValidationError("T_s must be positive")
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    if sys.n_y == 0:
        raise ValidationError(
            "autonomous subsystem has no response block to simulate"
        )
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (sys.n,):
        raise ValidationError(f"z0 must have shape ({sys.n},)")

    amplitudes = np.linalg.solve(sys.V_full, z0.astype(complex))
    t = np.arange(n_samples) * T_s
    modes = np.exp(np.outer(sys.eigenvalues_full, t)) * amplitudes[:, None]
    states = (sys.V_full @ modes).T
    if np.abs(states.imag).max() > 1e-9:
        raise ConditioningError(
            "imaginary residue of the exact propagation exceeds 1e-9"
        )
    return Trajectory(
        samples=states.real,
        dt=T_s,
        transient_discarded=0,
        component_split=(sys.n_x, sys.n_y),
    )


def modal_amplitudes(sys, traj):
    """Per-mode complex amplitudes of each sample, shape (T, n)."""
    return np.linalg.solve(sys.V_full, traj.samples.T.astype(complex)).T


def x_subsystem(sys):
    """Extract the autonomous driver block as its own oscillatory system.

    The driver's oscillatory eigenvectors are the x rows of the system
    eigenvectors that have support on the x block, keeping their relative
    scaling (the modal content the full system actually carries).
    """
    n_x = sys.n_x
    if sys.n_y == 0:
        return sys
    A_xy = sys.A[:n_x, n_x:]
    if np.abs(A_xy).max() > 1e-9 * max(1.0, np.abs(sys.A).max()):
        raise ValidationError("driver block is not autonomous (A_xy != 0)")

    col_norms = np.linalg.norm(sys.V, axis=0)
    keep = []
    for i in range(sys.d):
        x_part = np.linalg.norm(sys.V[:n_x, 2 * i])
        if x_part > 1e-12 * max(1.0, col_norms[2 * i]):
            keep.append(i)
    if not keep:
        raise ValidationError("no oscillatory mode has support on the x block")
    V_x = np.column_stack(
        [sys.V[:n_x, 2 * i + j] for i in keep for j in (0, 1)]
    )
    thetas_x = sys.thetas[keep]

    # remaining driver modes (if any) come from the block's own spectrum
    extra = []
    if 2 * len(keep) < n_x:
        vals, vecs = np.linalg.eig(sys.A_xx)
        osc = np.concatenate([1j * thetas_x, -1j * thetas_x])
        for idx, lam in enumerate(vals):
            if not np.any(np.isclose(lam, osc, atol=1e-9)):
                extra.append((lam, vecs[:, idx]))
    return build_class_Ad(V_x, thetas_x, extra_eigs=extra, block_dims=(n_x, 0))


def _conjugate_pair_matrix(columns, n):
    """Stack (position, vector) specs into adjacent conjugate pairs."""
    V = np.zeros((n, 2 * len(columns)), dtype=complex)
    for i, (rows, vec) in enumerate(columns):
        V[rows, 2 * i] = vec
        V[rows, 2 * i + 1] = np.conj(vec)
    return V


def example1_system(rng_seed, m=250, coupled=True):
    """Construct the worked forced-oscillator example and its measurements.

    The system has four states: a driver oscillator at frequency
    ``EXAMPLE_THETA_1`` whose modes also drive the response block, plus a
    response-only oscillator at ``EXAMPLE_THETA_2``.  With ``coupled=False``
    the driver modes lose their response-block rows, which zeroes A_yx and
    makes the pair independent; frequencies and measurement construction are
    unchanged.

    Measurement vectors are built from one seeded draw r_1..r_4 of
    Normal(0, sigma=0.1) perturbations around the real and imaginary parts
    of the first and third eigenvector columns, then normalized so
    ``|h|^2 = 2d/m`` for the given embedding length m.
    """
    if m < 1:
        raise ValidationError("m must be >= 1")
    s = 1.0 / np.sqrt(2.0)
    v = s * np.array([1.0, 1.0j])  # unit-norm planar rotation eigenvector

    slot_x = np.array([0, 1])
    slot_y = np.array([2, 3])
    if coupled:
        # driver mode spreads over both blocks; response mode is y-only
        V = _conjugate_pair_matrix(
            [(np.arange(4), np.concatenate([v * s, v * s])),
             (slot_y, v)],
            n=4,
        )
    else:
        V = _conjugate_pair_matrix([(slot_x, v), (slot_y, v)], n=4)

    sys = build_class_Ad(
        V, (EXAMPLE_THETA_1, EXAMPLE_THETA_2), block_dims=(2, 2)
    )

    rng = np.random.default_rng(rng_seed)
    r = rng.normal(0.0, 0.1, size=4)
    c_joint = ((1 + r[0]) * V[:, 0].real + (1 + r[1]) * V[:, 0].imag
               + (1 + r[2]) * V[:, 2].real + (1 + r[3]) * V[:, 2].imag)
    c_joint_x = np.concatenate([c_joint[:2], [0.0, 0.0]])
    c_joint_y = np.concatenate([[0.0, 0.0], c_joint[2:]])

    def _unit(c):
        norm = np.linalg.norm(c)
        if norm == 0:
            raise ValidationError("degenerate measurement draw (zero vector)")
        return c / norm

    joint_scale = np.sqrt(4.0 / m)   # 2d/m with d = 2
    block_scale = np.sqrt(2.0 / m)   # 2d/m with d = 1 per block
    measurements = MeasurementSet(
        joint=joint_scale * _unit(c_joint),
        joint_x=joint_scale * _unit(c_joint_x),
        joint_y=joint_scale * _unit(c_joint_y),
        x_block=block_scale * _unit(c_joint[:2]),
        y_block=block_scale * _unit(c_joint[2:]),
        m=m,
    )
    return sys, measurements


def default_initial_condition(sys):
    """The transient-free start V_full . 1 (all modal amplitudes equal)."""
    z0 = sys.V_full @ np.ones(sys.n)
    if np.abs(z0.imag).max() > 1e-9:
        raise ConditioningError("V . 1 is not real for this eigenstructure")
    return z0.real
