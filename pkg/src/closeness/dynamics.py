"""Benchmark coupled systems and their simulation front ends.

Three unidirectionally coupled pairs are built in, each with the coupling
strength C entering the response (y) equations only:

* ``HenonHenon`` -- identical Henon maps, driver state (x1, x2) and response
  state (y1, y2).  The coupling replaces a share C of the response's squared
  term with the product x1*y1.
* ``RosslerLorenz`` -- a time-scaled Rossler circuit driving a Lorenz system
  through the squared second coordinate.
* ``RosslerRossler`` -- two detuned Rossler systems (frequencies omega1,
  omega2) coupled diffusively through the first coordinate.

A fourth kind, ``LinearForced``, is handled by :mod:`closeness.linear` with
exact propagation instead of numerical integration.
"""
from __future__ import annotations

import dataclasses
import enum

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DivergenceError, StiffnessError, ValidationError
from .trajectory import Trajectory

#: any state component beyond this magnitude counts as divergence
OVERFLOW_GUARD = 1e10


class SystemKind(enum.Enum):
    HENON_HENON = "henon_henon"
    ROSSLER_LORENZ = "rossler_lorenz"
    ROSSLER_ROSSLER = "rossler_rossler"
    LINEAR_FORCED = "linear_forced"


#: (n_x, n_y) per kind; LinearForced dims live on the system object itself
_STATE_DIMS = {
    SystemKind.HENON_HENON: (2, 2),
    SystemKind.ROSSLER_LORENZ: (3, 3),
    SystemKind.ROSSLER_ROSSLER: (3, 3),
}

#: initial conditions used in the source experiments
DEFAULT_INITIAL_CONDITIONS = {
    SystemKind.HENON_HENON: np.array([0.7, 0.0, 0.91, 0.7]),
    SystemKind.ROSSLER_LORENZ: np.array([0.0, 0.0, 0.4, 0.3, 0.3, 0.3]),
    SystemKind.ROSSLER_ROSSLER: np.array([0.0, 0.0, 0.4, 0.0, 0.0, 0.4]),
}


@dataclasses.dataclass(frozen=True)
class SystemModel:
    """A benchmark system family member with a fixed coupling strength."""

    kind: SystemKind
    coupling_strength: float
    params: dict = dataclasses.field(default_factory=dict)
    state_dim_x: int = 0
    state_dim_y: int = 0

    def __post_init__(self):
        if self.coupling_strength < 0:
            raise ValidationError("coupling_strength must be >= 0")
        if self.kind in _STATE_DIMS:
            n_x, n_y = _STATE_DIMS[self.kind]
            if self.state_dim_x == 0:
                object.__setattr__(self, "state_dim_x", n_x)
            if self.state_dim_y == 0:
                object.__setattr__(self, "state_dim_y", n_y)
            if (self.state_dim_x, self.state_dim_y) != (n_x, n_y):
                raise ValidationError(
                    f"{self.kind.value} requires state dims {(n_x, n_y)}"
                )
        elif self.state_dim_x < 1 or self.state_dim_y < 1:
            raise ValidationError("state dims must be positive")

    @property
    def is_discrete(self):
        return self.kind is SystemKind.HENON_HENON

    @property
    def n(self):
        return self.state_dim_x + self.state_dim_y

    @property
    def default_initial_condition(self):
        return DEFAULT_INITIAL_CONDITIONS[self.kind].copy()


def henon_henon(coupling):
    return SystemModel(SystemKind.HENON_HENON, coupling)


def rossler_lorenz(coupling):
    return SystemModel(SystemKind.ROSSLER_LORENZ, coupling)


def rossler_rossler(coupling, omega1=1.015, omega2=0.985):
    return SystemModel(
        SystemKind.ROSSLER_ROSSLER,
        coupling,
        params={"omega1": omega1, "omega2": omega2},
    )


def henon_step(state, coupling):
    """One exact application of the coupled Henon equations."""
    x1, x2, y1, y2 = state
    c = coupling
    return np.array([
        1.4 - x1 ** 2 + 0.3 * x2,
        x1,
        1.4 - (c * x1 * y1 + (1.0 - c) * y1 ** 2) + 0.3 * y2,
        y1,
    ])


def _rossler_lorenz_rhs(coupling):
    def rhs(t, z):
        x1, x2, x3, y1, y2, y3 = z
        return [
            -6.0 * (x2 + x3),
            6.0 * (x1 + 0.2 * x2),
            6.0 * (0.2 + x3 * (x1 - 5.7)),
            10.0 * (-y1 + y2),
            28.0 * y1 - y2 - y1 * y3 + coupling * x2 ** 2,
            y1 * y2 - (8.0 / 3.0) * y3,
        ]

    return rhs


def _rossler_rossler_rhs(coupling, omega1, omega2):
    def rhs(t, z):
        x1, x2, x3, y1, y2, y3 = z
        return [
            -omega1 * x2 - x3,
            omega1 * x1 + 0.15 * x2,
            0.2 + x3 * (x1 - 10.0),
            -omega2 * y2 - y3 + coupling * (x1 - y1),
            omega2 * y1 + 0.15 * y2,
            0.2 + y3 * (y1 - 10.0),
        ]

    return rhs


def rhs_for(model):
    """Right-hand side f(t, z) of a continuous benchmark system."""
    if model.kind is SystemKind.ROSSLER_LORENZ:
        return _rossler_lorenz_rhs(model.coupling_strength)
    if model.kind is SystemKind.ROSSLER_ROSSLER:
        omega1 = model.params.get("omega1", 1.015)
        omega2 = model.params.get("omega2", 0.985)
        return _rossler_rossler_rhs(model.coupling_strength, omega1, omega2)
    raise ValidationError(f"{model.kind.value} is not a continuous system")


def iterate_map(model, x0, n_samples, n_transient=0):
    """Iterate a discrete map, discarding leading transient samples.

    Returns a :class:`Trajectory` whose first row is iterate ``n_transient``
    of the initial state (the initial state itself is iterate 0).
    """
    if not model.is_discrete:
        raise ValidationError(f"{model.kind.value} is not a discrete map")
    if n_samples < 1 or n_transient < 0 or n_transient + n_samples < 1:
        raise ValidationError("need n_samples >= 1 and n_transient >= 0")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.n,):
        raise ValidationError(f"initial state must have shape ({model.n},)")

    total = n_transient + n_samples
    out = np.empty((n_samples, model.n))
    state = x0
    for step in range(total):
        if step >= n_transient:
            out[step - n_transient] = state
        if step == total - 1:
            break
        state = henon_step(state, model.coupling_strength)
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > OVERFLOW_GUARD:
            raise DivergenceError(step + 1)
    return Trajectory(
        samples=out,
        dt=1.0,
        transient_discarded=n_transient,
        component_split=(model.state_dim_x, model.state_dim_y),
    )


def _check_grid(samples):
    bad = ~np.isfinite(samples) | (np.abs(samples) > OVERFLOW_GUARD)
    if bad.any():
        raise DivergenceError(int(np.argwhere(bad.any(axis=1))[0, 0]))


def integrate_ode(model, x0, dt, n_samples, n_transient=0,
                  rel_tol=1e-8, abs_tol=1e-10, fixed_step=False,
                  component_split=None):
    """Integrate a continuous benchmark system onto a uniform grid.

    Adaptive mode uses a Dormand-Prince 5(4) embedded pair with dense output
    and resamples the solution at multiples of ``dt``.  ``fixed_step=True``
    switches to a classic fourth-order Runge-Kutta step of exactly ``dt``,
    which is what the convergence-order tests exercise.

    ``model`` may also be a bare right-hand-side callable ``f(t, z)``; in
    that case ``component_split`` must be given explicitly.

    Raises
    ------
    StiffnessError
        If the adaptive solver underflows its step size while the state is
        still within the overflow guard.
    DivergenceError
        If any sampled state exceeds the overflow guard.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValidationError("tolerances must be positive")
    if n_samples < 1 or n_transient < 0:
        raise ValidationError("need n_samples >= 1 and n_transient >= 0")
    if isinstance(model, SystemModel):
        rhs = rhs_for(model)
        if component_split is None:
            component_split = (model.state_dim_x, model.state_dim_y)
    else:
        rhs = model
        if component_split is None:
            raise ValidationError(
                "component_split is required when integrating a bare RHS"
            )
    x0 = np.asarray(x0, dtype=float)

    total = n_transient + n_samples
    t_grid = np.arange(total) * dt

    if fixed_step:
        samples = _rk4_fixed(rhs, x0, dt, total, n_transient)
    else:
        sol = solve_ivp(
            rhs, (0.0, t_grid[-1]) if total > 1 else (0.0, dt), x0,
            method="RK45", t_eval=t_grid, rtol=rel_tol, atol=abs_tol,
            dense_output=False,
        )
        if not sol.success:
            reached = sol.t[-1] if sol.t.size else 0.0
            last = sol.y[:, -1] if sol.y.size else x0
            step = int(reached / dt)
            if not np.all(np.isfinite(last)) or np.max(np.abs(last)) > OVERFLOW_GUARD:
                raise DivergenceError(step)
            raise StiffnessError(
                f"adaptive step failed near t={reached:.6g}: {sol.message}"
            )
        samples = sol.y.T
        _check_grid(samples)

    return Trajectory(
        samples=samples[n_transient:],
        dt=dt,
        transient_discarded=n_transient,
        component_split=component_split,
    )


def _rk4_fixed(rhs, x0, dt, total, n_transient):
    out = np.empty((total, x0.size))
    state = x0.astype(float)
    out[0] = state
    for step in range(1, total):
        t = (step - 1) * dt
        k1 = np.asarray(rhs(t, state))
        k2 = np.asarray(rhs(t + dt / 2, state + dt / 2 * k1))
        k3 = np.asarray(rhs(t + dt / 2, state + dt / 2 * k2))
        k4 = np.asarray(rhs(t + dt, state + dt * k3))
        state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > OVERFLOW_GUARD:
            raise DivergenceError(step)
        out[step] = state
    return out
