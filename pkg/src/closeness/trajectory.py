"""Time-indexed state sequences and their on-disk formats.

A :class:`Trajectory` is the realized sample of a coupled system's attractor.
Its columns split into an x block and a y block so that the projections used
throughout the analysis (x state, y state, joint state) are well defined.
"""
from __future__ import annotations

import dataclasses
import json
import pathlib

import numpy as np

from .errors import ValidationError


def _format_float(v):
    # repr of a Python float is the shortest digit string that round-trips,
    # which keeps repeated runs byte-identical
    return repr(float(v))


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled multivariate state sequence.

    Parameters
    ----------
    samples : ndarray, shape (T, n)
        State vectors, one row per sample time.
    dt : float
        Sampling period in time units (1.0 for maps).
    transient_discarded : int
        Number of leading samples dropped before ``samples[0]``.
    component_split : (int, int)
        Dimensions (n_x, n_y) of the driver and response state blocks.
    """

    samples: np.ndarray
    dt: float
    transient_discarded: int
    component_split: tuple[int, int]

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValidationError("samples must be a nonempty (T, n) array")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("samples contain NaN or Inf")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.transient_discarded < 0:
            raise ValidationError("transient_discarded must be >= 0")
        n_x, n_y = self.component_split
        if n_x < 1 or n_y < 1 or n_x + n_y != samples.shape[1]:
            raise ValidationError(
                f"component_split {self.component_split} does not sum to "
                f"state dimension {samples.shape[1]}"
            )

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_x(self):
        return self.component_split[0]

    @property
    def n_y(self):
        return self.component_split[1]

    @property
    def x(self):
        """Driver block, shape (T, n_x)."""
        return self.samples[:, : self.n_x]

    @property
    def y(self):
        """Response block, shape (T, n_y)."""
        return self.samples[:, self.n_x:]

    @property
    def times(self):
        return np.arange(self.n_samples) * self.dt

    def write_csv(self, path):
        """Write as CSV with header ``t,x1..xn``; byte-stable across runs."""
        path = pathlib.Path(path)
        n = self.samples.shape[1]
        header = "t," + ",".join(f"x{i + 1}" for i in range(n))
        lines = [header]
        for t_idx in range(self.n_samples):
            row = [_format_float(t_idx * self.dt)]
            row.extend(_format_float(v) for v in self.samples[t_idx])
            lines.append(",".join(row))
        path.write_text("\n".join(lines) + "\n")

    def meta(self):
        return {
            "dt": self.dt,
            "n_samples": int(self.n_samples),
            "component_split": list(self.component_split),
            "transient_discarded": int(self.transient_discarded),
        }


def save_cache(traj, path):
    """Binary cache: ``.npy`` array plus a JSON sidecar with the metadata."""
    path = pathlib.Path(path)
    np.save(path.with_suffix(".npy"), traj.samples)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(traj.meta(), sort_keys=True, indent=2) + "\n")


def load_cache(path):
    path = pathlib.Path(path)
    samples = np.load(path.with_suffix(".npy"))
    meta = json.loads(path.with_suffix(".json").read_text())
    return Trajectory(
        samples=samples,
        dt=meta["dt"],
        transient_discarded=meta["transient_discarded"],
        component_split=tuple(meta["component_split"]),
    )


def read_csv(path, component_split, transient_discarded=0):
    """Read a trajectory written by :meth:`Trajectory.write_csv`."""
    path = pathlib.Path(path)
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if raw.shape[0] < 2:
        dt = 1.0
    else:
        dt = float(raw[1, 0] - raw[0, 0])
    return Trajectory(
        samples=raw[:, 1:],
        dt=dt,
        transient_discarded=transient_discarded,
        component_split=tuple(component_split),
    )
