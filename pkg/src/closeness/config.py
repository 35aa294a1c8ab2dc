"""Experiment configuration: YAML schema, defaults, and validation.

One config file describes one experiment end to end: the system and its
coupling, simulation length, embedding parameters, and the analysis budget
(maps to profile, heuristics to run, pair counts, grids).  Validation is
eager and reports the dotted path of the offending field so a bad file
fails before any computation starts.
"""
from __future__ import annotations

import dataclasses

import yaml

from .errors import ConfigError
from .isometry import MapKind

SYSTEM_KINDS = (
    "henon_henon",
    "rossler_lorenz",
    "rossler_rossler",
    "linear_example",
    "linear_example_decoupled",
)
LINEAR_KINDS = ("linear_example", "linear_example_decoupled")
FLOW_KINDS = ("rossler_lorenz", "rossler_rossler")

HEURISTIC_NAMES = ("distance_score", "rank_score", "cross_map", "continuity")
OUTPUT_FORMATS = ("csv", "json")

_STATE_DIM = {
    "henon_henon": 4,
    "rossler_lorenz": 6,
    "rossler_rossler": 6,
    "linear_example": 4,
    "linear_example_decoupled": 4,
}


@dataclasses.dataclass(frozen=True)
class SystemSection:
    kind: str
    coupling: float
    params: dict
    initial_condition: tuple | None


@dataclasses.dataclass(frozen=True)
class SimulationSection:
    n_samples: int
    n_transient: int
    dt: float
    fixed_step: bool


@dataclasses.dataclass(frozen=True)
class EmbeddingSection:
    m: int
    tau: int
    measure_x: int
    measure_y: int
    theiler_window: int


@dataclasses.dataclass(frozen=True)
class AnalysisSection:
    maps: tuple
    heuristics: tuple
    k: int
    coupling_grid: tuple | None
    n_pairs: int
    library_sizes: tuple
    epsilon_quantiles: tuple
    n_probes: int
    ccm_replicates: int


@dataclasses.dataclass(frozen=True)
class OutputSection:
    format: str
    directory: str


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    system: SystemSection
    simulation: SimulationSection
    embedding: EmbeddingSection
    analysis: AnalysisSection
    output: OutputSection

    def with_overrides(self, seed=None, out_dir=None, out_format=None):
        """Copy with CLI-level overrides applied."""
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=int(seed))
        if out_dir is not None or out_format is not None:
            output = dataclasses.replace(
                cfg.output,
                directory=(out_dir if out_dir is not None
                           else cfg.output.directory),
                format=(out_format if out_format is not None
                        else cfg.output.format),
            )
            cfg = dataclasses.replace(cfg, output=output)
        return cfg

    def to_dict(self):
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# field readers (each failure names the dotted path)


def _mapping(data, path):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a mapping")
    return dict(data)


def _take(section, key, path, default=None, required=False):
    if key in section:
        return section.pop(key)
    if required:
        raise ConfigError(f"{path}.{key}", "required field is missing")
    return default


def _no_leftovers(section, path):
    if section:
        name = sorted(section)[0]
        raise ConfigError(f"{path}.{name}", "unknown field")


def _as_int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _as_float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _as_bool(value, path):
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true/false, got {value!r}")
    return value


def _as_str_choice(value, path, choices):
    if value not in choices:
        raise ConfigError(
            path, f"must be one of {', '.join(choices)}; got {value!r}"
        )
    return value


def _as_float_list(value, path, allow_empty=False):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, "expected a list of numbers")
    if not value and not allow_empty:
        raise ConfigError(path, "must not be empty")
    return tuple(_as_float(v, f"{path}[{i}]") for i, v in enumerate(value))


def _as_int_list(value, path, minimum=1):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a nonempty list of integers")
    return tuple(
        _as_int(v, f"{path}[{i}]", minimum=minimum)
        for i, v in enumerate(value)
    )


# ---------------------------------------------------------------------------
# section parsers


def _parse_system(raw):
    sec = _mapping(raw, "system")
    kind = _as_str_choice(_take(sec, "kind", "system", required=True),
                          "system.kind", SYSTEM_KINDS)
    coupling = _as_float(_take(sec, "coupling", "system", default=0.0),
                         "system.coupling")
    params = _mapping(_take(sec, "params", "system"), "system.params")
    for key, value in params.items():
        _as_float(value, f"system.params.{key}")
    ic = _take(sec, "initial_condition", "system")
    if ic is not None:
        ic = _as_float_list(ic, "system.initial_condition")
        if len(ic) != _STATE_DIM[kind]:
            raise ConfigError(
                "system.initial_condition",
                f"{kind} has {_STATE_DIM[kind]} state variables, "
                f"got {len(ic)}",
            )
    _no_leftovers(sec, "system")
    return SystemSection(kind=kind, coupling=coupling, params=params,
                         initial_condition=ic)


def _parse_simulation(raw, kind):
    sec = _mapping(raw, "simulation")
    n_samples = _as_int(_take(sec, "n_samples", "simulation", default=10_000),
                        "simulation.n_samples", minimum=2)
    n_transient = _as_int(_take(sec, "n_transient", "simulation",
                                default=1_000),
                          "simulation.n_transient", minimum=0)
    default_dt = 1.0 if kind in LINEAR_KINDS else 0.025
    dt = _as_float(_take(sec, "dt", "simulation", default=default_dt),
                   "simulation.dt")
    if dt <= 0:
        raise ConfigError("simulation.dt", f"must be positive, got {dt}")
    fixed_step = _as_bool(_take(sec, "fixed_step", "simulation",
                                default=False),
                          "simulation.fixed_step")
    _no_leftovers(sec, "simulation")
    return SimulationSection(n_samples=n_samples, n_transient=n_transient,
                             dt=dt, fixed_step=fixed_step)


def _parse_embedding(raw, kind, n_samples):
    sec = _mapping(raw, "embedding")
    m = _as_int(_take(sec, "m", "embedding", default=4),
                "embedding.m", minimum=1)
    tau = _as_int(_take(sec, "tau", "embedding", default=1),
                  "embedding.tau", minimum=1)
    measure_x = _as_int(_take(sec, "measure_x", "embedding", default=0),
                        "embedding.measure_x", minimum=0)
    measure_y = _as_int(_take(sec, "measure_y", "embedding", default=0),
                        "embedding.measure_y", minimum=0)
    theiler = _as_int(_take(sec, "theiler_window", "embedding", default=0),
                      "embedding.theiler_window", minimum=0)
    _no_leftovers(sec, "embedding")
    if kind in LINEAR_KINDS and tau != 1:
        raise ConfigError("embedding.tau",
                          "linear verification uses consecutive samples "
                          "(tau = 1)")
    if (m - 1) * tau + 2 > n_samples:
        raise ConfigError(
            "embedding.m",
            f"window (m-1)*tau = {(m - 1) * tau} leaves fewer than two "
            f"embedded points out of {n_samples} samples",
        )
    return EmbeddingSection(m=m, tau=tau, measure_x=measure_x,
                            measure_y=measure_y, theiler_window=theiler)


def _parse_analysis(raw):
    sec = _mapping(raw, "analysis")
    # phi_phi_xy needs a joint measurement functional, so it is not part of
    # the default two-embedding profile
    default_maps = [k.value for k in MapKind if k is not MapKind.PhiPhiXY]
    maps_raw = _take(sec, "maps", "analysis", default=default_maps)
    if not isinstance(maps_raw, (list, tuple)) or not maps_raw:
        raise ConfigError("analysis.maps", "expected a nonempty list")
    maps = []
    for i, token in enumerate(maps_raw):
        try:
            maps.append(MapKind(token))
        except ValueError:
            valid = ",".join(k.value for k in MapKind)
            raise ConfigError(f"analysis.maps[{i}]",
                              f"unknown map {token!r}; valid: {valid}")
    heur_raw = _take(sec, "heuristics", "analysis",
                     default=list(HEURISTIC_NAMES))
    if not isinstance(heur_raw, (list, tuple)):
        raise ConfigError("analysis.heuristics", "expected a list")
    heuristics = tuple(
        _as_str_choice(h, f"analysis.heuristics[{i}]", HEURISTIC_NAMES)
        for i, h in enumerate(heur_raw)
    )
    k = _as_int(_take(sec, "k", "analysis", default=5),
                "analysis.k", minimum=1)
    grid = _take(sec, "coupling_grid", "analysis")
    if grid is not None:
        grid = _as_float_list(grid, "analysis.coupling_grid")
    n_pairs = _as_int(_take(sec, "n_pairs", "analysis", default=5_000),
                      "analysis.n_pairs", minimum=1)
    library_sizes = _as_int_list(
        _take(sec, "library_sizes", "analysis",
              default=[100, 200, 400, 800, 1600, 3200]),
        "analysis.library_sizes", minimum=2,
    )
    quantiles = _as_float_list(
        _take(sec, "epsilon_quantiles", "analysis",
              default=[0.02, 0.05, 0.1, 0.2, 0.35, 0.5]),
        "analysis.epsilon_quantiles",
    )
    for i, quantile in enumerate(quantiles):
        if not 0 < quantile < 1:
            raise ConfigError(f"analysis.epsilon_quantiles[{i}]",
                              "quantiles must lie strictly in (0, 1)")
    n_probes = _as_int(_take(sec, "n_probes", "analysis", default=200),
                       "analysis.n_probes", minimum=1)
    replicates = _as_int(_take(sec, "ccm_replicates", "analysis", default=5),
                         "analysis.ccm_replicates", minimum=1)
    _no_leftovers(sec, "analysis")
    return AnalysisSection(
        maps=tuple(maps), heuristics=heuristics, k=k, coupling_grid=grid,
        n_pairs=n_pairs, library_sizes=library_sizes,
        epsilon_quantiles=quantiles, n_probes=n_probes,
        ccm_replicates=replicates,
    )


def _parse_output(raw):
    sec = _mapping(raw, "output")
    fmt = _as_str_choice(_take(sec, "format", "output", default="csv"),
                         "output.format", OUTPUT_FORMATS)
    directory = _take(sec, "directory", "output", default="results")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory", "expected a nonempty string")
    _no_leftovers(sec, "output")
    return OutputSection(format=fmt, directory=directory)


def config_from_dict(data):
    """Validate a parsed mapping into an :class:`ExperimentConfig`."""
    top = _mapping(data, "<top level>")
    system = _parse_system(_take(top, "system", "<top level>",
                                 required=True))
    simulation = _parse_simulation(_take(top, "simulation", "<top level>"),
                                   system.kind)
    embedding = _parse_embedding(_take(top, "embedding", "<top level>"),
                                 system.kind, simulation.n_samples)
    analysis = _parse_analysis(_take(top, "analysis", "<top level>"))
    output = _parse_output(_take(top, "output", "<top level>"))
    name = _take(top, "name", "<top level>", default=system.kind)
    if not isinstance(name, str) or not name:
        raise ConfigError("name", "expected a nonempty string")
    seed = _as_int(_take(top, "seed", "<top level>", default=0), "seed",
                   minimum=0)
    _no_leftovers(top, "<top level>")
    return ExperimentConfig(name=name, seed=seed, system=system,
                            simulation=simulation, embedding=embedding,
                            analysis=analysis, output=output)


def load_config(path):
    """Load and validate an experiment config from a YAML file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}")
    return config_from_dict(data)
