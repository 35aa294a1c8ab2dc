"""Experiment orchestration: config -> simulate -> embed -> analyze -> files.

Each ``run_*`` function executes one subcommand end to end and writes its
delimited output, companion figures, and a JSON manifest into the output
directory.  Every random choice derives from the config seed through fixed
integer paths, so cells of a sweep can run in any order (or in parallel)
and reruns are byte-identical.
"""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import enum
import json
import os

import numpy as np

from . import dynamics, linear, report
from .causal import (
    CertificateThreshold,
    ThresholdProvenance,
    expansivity_certificate,
)
from .config import LINEAR_KINDS
from .embedding import DelayEmbedding, NeighborQuery, align, delay_embed
from .errors import (
    ConfigError,
    HypothesisViolation,
    ResonanceError,
    ThresholdUndefined,
)
from .heuristics import andrzejak_M, ccm, chicharro_L, pecora_continuity
from .isometry import (
    MapKind,
    MapUnderTest,
    analytic_linear_bounds,
    build_maps,
    empirical_isometry,
    phi_matrix,
    subseed,
)
from .trajectory import _format_float

#: fixed seed-path tags so every consumer of randomness is independent
_TAG_MEASUREMENT = 11
_TAG_PAIRS = 13
_TAG_CCM = 17
_TAG_PROBES = 19
_TAG_EPSILON = 23
_TAG_VERIFY = 29

_MAP_ORDER = {kind: pos for pos, kind in enumerate(MapKind)}
_METHOD_ORDER = {"distance_score": 0, "rank_score": 1, "cross_map": 2,
                 "continuity": 3}


@dataclasses.dataclass(frozen=True, eq=False)
class SimulationProduct:
    """A simulated trajectory plus, for linear kinds, its construction."""

    trajectory: object
    linear_system: object = None
    measurements: object = None


@dataclasses.dataclass(frozen=True)
class RunResult:
    outputs: tuple
    n_failed: int = 0


# ---------------------------------------------------------------------------
# simulation and embedding from a config


def _nonlinear_model(cfg, coupling):
    kind = cfg.system.kind
    params = dict(cfg.system.params)
    if kind == "henon_henon":
        allowed = ()
    elif kind == "rossler_lorenz":
        allowed = ()
    else:
        allowed = ("omega1", "omega2")
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise ConfigError(f"system.params.{unknown[0]}",
                          f"not a parameter of {kind}")
    if kind == "henon_henon":
        return dynamics.henon_henon(coupling)
    if kind == "rossler_lorenz":
        return dynamics.rossler_lorenz(coupling)
    return dynamics.rossler_rossler(coupling, **params)


def simulate_experiment(cfg, coupling=None):
    """Simulate the configured system at the given (or configured) coupling."""
    c = cfg.system.coupling if coupling is None else float(coupling)
    kind = cfg.system.kind
    sim = cfg.simulation
    if kind in LINEAR_KINDS:
        sys_, meas = linear.example1_system(
            subseed(cfg.seed, _TAG_MEASUREMENT),
            m=cfg.embedding.m,
            coupled=(kind == "linear_example"),
        )
        z0 = cfg.system.initial_condition
        z0 = (linear.default_initial_condition(sys_) if z0 is None
              else np.asarray(z0, dtype=float))
        traj = linear.simulate_linear(sys_, z0, sim.dt, sim.n_samples)
        return SimulationProduct(trajectory=traj, linear_system=sys_,
                                 measurements=meas)
    model = _nonlinear_model(cfg, c)
    x0 = cfg.system.initial_condition
    x0 = (model.default_initial_condition if x0 is None
          else np.asarray(x0, dtype=float))
    if model.is_discrete:
        traj = dynamics.iterate_map(model, x0, sim.n_samples,
                                    n_transient=sim.n_transient)
    else:
        traj = dynamics.integrate_ode(model, x0, sim.dt, sim.n_samples,
                                      n_transient=sim.n_transient,
                                      fixed_step=sim.fixed_step)
    return SimulationProduct(trajectory=traj)


def measured_series(cfg, product):
    """Full-length scalar measurement series for the two subsystems."""
    traj = product.trajectory
    if product.measurements is not None:
        meas = product.measurements
        return traj.x @ meas.x_block, traj.samples @ meas.joint_y
    emb = cfg.embedding
    if emb.measure_x >= traj.n_x:
        raise ConfigError("embedding.measure_x",
                          f"subsystem has {traj.n_x} coordinates")
    if emb.measure_y >= traj.n_y:
        raise ConfigError("embedding.measure_y",
                          f"subsystem has {traj.n_y} coordinates")
    return traj.x[:, emb.measure_x], traj.y[:, emb.measure_y]


def build_embeddings(cfg, product):
    """Delay-embed the driver and response measurement series."""
    series_x, series_y = measured_series(cfg, product)
    m, tau = cfg.embedding.m, cfg.embedding.tau
    return (delay_embed(series_x, m, tau, source="x"),
            delay_embed(series_y, m, tau, source="y"))


def neighbor_query(cfg):
    return NeighborQuery(k=cfg.analysis.k,
                         theiler_window=cfg.embedding.theiler_window)


# ---------------------------------------------------------------------------
# record builders (long-form rows shared by CSV and JSON writers)


def isometry_records(cfg, coupling, emb_x, emb_y, product, c_index=0):
    """Ratio-profile rows for the configured maps at one coupling value."""
    maps = build_maps(product.trajectory, emb_x, emb_y,
                      kinds=cfg.analysis.maps)
    run_id = _run_id(cfg)
    rows = []
    for kind in cfg.analysis.maps:
        est = empirical_isometry(
            maps[kind], n_pairs=cfg.analysis.n_pairs,
            seed=subseed(cfg.seed, c_index, _MAP_ORDER[kind]),
        )
        stats = {"lower": est.lower, "p5": est.percentiles[5],
                 "p50": est.percentiles[50], "p95": est.percentiles[95],
                 "upper": est.upper}
        for stat, value in stats.items():
            rows.append({"run_id": run_id, "system": cfg.name,
                         "C": float(coupling), "map": kind.value,
                         "stat": stat, "value": float(value)})
    return rows


def _epsilon_grid(emb_x, emb_y, quantiles, seed, n_sample=2000):
    """Shared epsilon grid from pooled interpoint-distance quantiles."""
    rng = np.random.default_rng(seed)
    pooled = []
    for emb in (emb_x, emb_y):
        pts = emb.points
        n = pts.shape[0]
        ii = rng.integers(0, n, size=n_sample)
        jj = rng.integers(0, n, size=n_sample)
        keep = ii != jj
        pooled.append(np.linalg.norm(pts[ii[keep]] - pts[jj[keep]], axis=1))
    pooled = np.concatenate(pooled)
    eps = np.quantile(pooled, np.asarray(quantiles))
    return np.maximum(eps, 1e-12)


def heuristic_records(cfg, coupling, emb_x, emb_y, product, c_index=0):
    """Directional-heuristic rows at one coupling value."""
    q = neighbor_query(cfg)
    series_x, series_y = measured_series(cfg, product)
    rows = []

    def add(method, direction, statistic, value, p_value=None):
        rows.append({"system": cfg.name, "C": float(coupling),
                     "method": method, "direction": direction,
                     "statistic": statistic, "value": float(value),
                     "p_value": None if p_value is None else float(p_value)})

    for method in cfg.analysis.heuristics:
        cell = subseed(cfg.seed, c_index, 100 + _METHOD_ORDER[method])
        if method == "distance_score":
            res = andrzejak_M(emb_x, emb_y, q)
            add(method, "x_given_y", "M", res.m_x_given_y)
            add(method, "y_given_x", "M", res.m_y_given_x)
            add(method, "diff", "delta_M", res.delta_m)
            add(method, "sym", "M_s", res.m_s)
        elif method == "rank_score":
            res = chicharro_L(emb_x, emb_y, q)
            add(method, "x_given_y", "L", res.l_x_given_y)
            add(method, "y_given_x", "L", res.l_y_given_x)
            add(method, "diff", "delta_L", res.delta_l, res.wilcoxon_p)
        elif method == "cross_map":
            libs = [s for s in cfg.analysis.library_sizes
                    if s <= emb_y.t_prime]
            if len(libs) < 2:
                raise ConfigError("analysis.library_sizes",
                                  "fewer than two sizes fit the embedding")
            res_yx = ccm(emb_y, series_x, libs, q, seed=cell,
                         n_replicates=cfg.analysis.ccm_replicates)
            res_xy = ccm(emb_x, series_y, libs, q, seed=cell,
                         n_replicates=cfg.analysis.ccm_replicates)
            for res, direction in ((res_yx, "y_to_x"), (res_xy, "x_to_y")):
                for lib, skill in zip(res.library_sizes, res.skill):
                    add(method, direction, f"skill@{int(lib)}", skill)
        elif method == "continuity":
            eps = _epsilon_grid(emb_x, emb_y, cfg.analysis.epsilon_quantiles,
                                subseed(cfg.seed, c_index, _TAG_EPSILON))
            stat = pecora_continuity(emb_y, emb_x, eps,
                                     cfg.analysis.n_probes,
                                     seed=subseed(cfg.seed, c_index,
                                                  _TAG_PROBES))
            for ei, e in enumerate(stat.epsilons):
                tag = f"{e:.6g}"
                add(method, "y_to_x", f"theta@{tag}", stat.theta[ei])
                add(method, "x_to_y", f"theta@{tag}",
                    stat.theta_inverse[ei])
                add(method, "product", f"theta@{tag}",
                    stat.theta_product[ei])
                add(method, "y_to_x", f"coverage@{tag}", stat.coverage[ei])
                add(method, "x_to_y", f"coverage@{tag}",
                    stat.coverage_inverse[ei])
    return rows


# ---------------------------------------------------------------------------
# linear verification report


def _verify_embeddings(cfg, product):
    traj, meas = product.trajectory, product.measurements
    m = cfg.embedding.m
    series = {
        "phi_gamma_x": traj.x @ meas.x_block,
        "phi_phi_y": traj.samples @ meas.joint_y,
        "phi_phi_x": traj.samples @ meas.joint_x,
        "phi_phi_xy": traj.samples @ meas.joint,
    }
    return {name: delay_embed(s, m, 1, source=name)
            for name, s in series.items()}


def _analytic_rows(name, bound):
    return {
        "analytic_scale": bound.scale,
        "analytic_delta0": bound.delta0,
        "analytic_delta1": bound.delta1_of_m,
        "analytic_lower": bound.lower,
        "analytic_upper": bound.upper,
        "m_min": bound.m_min,
        "hypothesis_a": float(bound.hypothesis_a_holds),
    }


def _coupled_thresholds(cfg):
    """Certificate thresholds from the coupled reference construction."""
    sys_c, meas_c = linear.example1_system(
        subseed(cfg.seed, _TAG_MEASUREMENT), m=cfg.embedding.m, coupled=True,
    )
    m, t_s = cfg.embedding.m, cfg.simulation.dt
    b_gx = analytic_linear_bounds(linear.x_subsystem(sys_c), meas_c.x_block,
                                  m, t_s)
    b_phiy = analytic_linear_bounds(sys_c, meas_c.joint_y, m, t_s)
    return CertificateThreshold(u_gamma_x=b_gx.upper, l_phi_y=b_phiy.lower,
                                provenance=ThresholdProvenance.ANALYTIC), \
        b_gx, b_phiy


def linear_verify_records(cfg):
    """Analytic-vs-empirical comparison rows for the linear example.

    One row per (map, stat).  Maps with a valid analytic band get
    analytic_* and within_band rows; the cross-embedding maps get max/min
    ratio and certificate rows; the embedding operator of each measurement
    gets a rank row (plus a zero-column check for the response-only
    functional, which is the rank-deficiency mechanism when the blocks are
    decoupled).
    """
    if cfg.system.kind not in LINEAR_KINDS:
        raise ConfigError("system.kind",
                          "linear-verify needs a linear_example kind")
    product = simulate_experiment(cfg)
    sys_, meas = product.linear_system, product.measurements
    traj = product.trajectory
    m, t_s = cfg.embedding.m, cfg.simulation.dt
    embeds = _verify_embeddings(cfg, product)
    run_id = _run_id(cfg)
    rows, notes = [], []

    def add(map_name, stat, value):
        rows.append({"run_id": run_id, "system": cfg.name, "map": map_name,
                     "stat": stat, "value": float(value)})

    analytic = {}
    specs = [
        ("phi_gamma_x", linear.x_subsystem(sys_), meas.x_block),
        ("phi_phi_y", sys_, meas.joint_y),
        ("phi_phi_x", sys_, meas.joint_x),
        ("phi_phi_xy", sys_, meas.joint),
    ]
    for name, subsystem, h in specs:
        try:
            bound = analytic_linear_bounds(subsystem, h, m, t_s)
        except HypothesisViolation as exc:
            notes.append(f"{name}: no analytic band, {exc}")
            add(name, "analytic_valid", 0.0)
            analytic[name] = None
        else:
            analytic[name] = bound
            add(name, "analytic_valid", 1.0)
            for stat, value in _analytic_rows(name, bound).items():
                add(name, stat, value)

    # empirical profiles, domain = attractor states at the embedded times
    for vi, (name, emb) in enumerate(sorted(embeds.items())):
        domain = (traj.x if name == "phi_gamma_x" else traj.samples)
        mut = MapUnderTest(kind=MapKind(name),
                           domain_points=domain[emb.times],
                           image_points=emb.points)
        est = empirical_isometry(mut, n_pairs=cfg.analysis.n_pairs,
                                 seed=subseed(cfg.seed, _TAG_VERIFY, vi))
        add(name, "empirical_lower", est.lower)
        add(name, "empirical_upper", est.upper)
        bound = analytic.get(name)
        if bound is not None:
            inside = (est.lower >= bound.lower - 1e-9
                      and est.upper <= bound.upper + 1e-9)
            add(name, "within_band", float(inside))
            if not inside:
                notes.append(f"{name}: empirical ratios leave the analytic "
                             f"band")

    # cross-embedding maps between the two single-subsystem embeddings
    rng = align(embeds["phi_phi_y"], embeds["phi_gamma_x"])
    n_y_pts = embeds["phi_phi_y"].points[rng.a_rows]
    n_x_pts = embeds["phi_gamma_x"].points[rng.b_rows]
    psi_yx = MapUnderTest(kind=MapKind.PsiYtoX, domain_points=n_y_pts,
                          image_points=n_x_pts)
    psi_xy = MapUnderTest(kind=MapKind.PsiXtoY, domain_points=n_x_pts,
                          image_points=n_y_pts)
    for pi, (name, mut) in enumerate((("psi_y_to_x", psi_yx),
                                      ("psi_x_to_y", psi_xy))):
        est = empirical_isometry(mut, n_pairs=cfg.analysis.n_pairs,
                                 seed=subseed(cfg.seed, _TAG_VERIFY, 10 + pi))
        add(name, "empirical_lower", est.lower)
        add(name, "empirical_upper", est.upper)

    try:
        thresholds, _, _ = _coupled_thresholds(cfg)
    except (ThresholdUndefined, HypothesisViolation, ResonanceError) as exc:
        notes.append(f"psi_y_to_x: no certificate threshold, {exc}")
    else:
        add("psi_y_to_x", "certificate_threshold", thresholds.threshold)
        witness = expansivity_certificate(
            psi_yx, thresholds, n_pairs=cfg.analysis.n_pairs,
            seed=subseed(cfg.seed, _TAG_VERIFY, 20))
        add("psi_y_to_x", "witness_found", float(witness is not None))
        if witness is not None:
            add("psi_y_to_x", "witness_ratio", witness.ratio)
            notes.append("psi_y_to_x: expansivity witness found, the driver "
                         "cannot be recovered from the response embedding")

    # operator ranks of the response/driver/joint measurement embeddings
    for name, h in (("phi_phi_y", meas.joint_y), ("phi_phi_x", meas.joint_x),
                    ("phi_phi_xy", meas.joint)):
        matrix, _, rank = phi_matrix(sys_, h, m, t_s)
        add(name, "operator_rank", rank)
        if name == "phi_phi_y":
            zero_cols = bool(np.all(matrix[:, :sys_.n_x] == 0.0))
            add(name, "x_columns_exactly_zero", float(zero_cols))
    return rows, notes


# ---------------------------------------------------------------------------
# file writers


def _run_id(cfg):
    return f"{cfg.name}-seed{cfg.seed}"


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return _format_float(value)
    if isinstance(value, enum.Enum):
        return str(value.value)
    return str(value)


def write_records(path_base, fieldnames, records, out_format):
    """Write long-form records as CSV (byte-stable floats) or JSON."""
    if out_format == "json":
        path = path_base + ".json"
        payload = [{k: row.get(k) for k in fieldnames} for row in records]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path
    path = path_base + ".csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in records:
            writer.writerow([_format_cell(row.get(k)) for k in fieldnames])
    return path


def _json_default(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def write_manifest(out_dir, cfg, command, outputs, cells=None, errors=None,
                   notes=None):
    """Record everything needed to reproduce the run or any single cell."""
    manifest = {
        "command": command,
        "run_id": _run_id(cfg),
        "config": cfg.to_dict(),
        "seed_scheme": "SeedSequence([seed, *path]) per cell",
        "outputs": sorted(os.path.basename(p) for p in outputs),
        "cells": cells or [],
        "errors": errors or [],
        "notes": notes or [],
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True,
                  default=_json_default)
        fh.write("\n")
    return path


def write_embedding_csv(emb, path):
    """One row per embedded point: absolute time then the m coordinates."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"e{i + 1}" for i in range(emb.m)])
        for t, row in zip(emb.times, emb.points):
            writer.writerow([str(int(t))] + [_format_float(v) for v in row])
    return path


def _ensure_out_dir(cfg):
    out_dir = cfg.output.directory
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


# ---------------------------------------------------------------------------
# subcommand runners


def run_simulate(cfg, jobs=1):
    out_dir = _ensure_out_dir(cfg)
    product = simulate_experiment(cfg)
    traj_path = os.path.join(out_dir, "trajectory.csv")
    product.trajectory.write_csv(traj_path)
    fig = report.save_trajectory_figure(
        product.trajectory, os.path.join(out_dir, "trajectory.png"))
    outputs = [traj_path, fig]
    outputs.append(write_manifest(out_dir, cfg, "simulate", outputs))
    return RunResult(outputs=tuple(outputs))


def run_embed(cfg, jobs=1):
    out_dir = _ensure_out_dir(cfg)
    product = simulate_experiment(cfg)
    emb_x, emb_y = build_embeddings(cfg, product)
    outputs = [
        write_embedding_csv(emb_x, os.path.join(out_dir, "embedding_x.csv")),
        write_embedding_csv(emb_y, os.path.join(out_dir, "embedding_y.csv")),
        report.save_embedding_figure(
            emb_x, emb_y, os.path.join(out_dir, "embeddings.png")),
    ]
    outputs.append(write_manifest(out_dir, cfg, "embed", outputs))
    return RunResult(outputs=tuple(outputs))


_ISOMETRY_FIELDS = ("run_id", "system", "C", "map", "stat", "value")
_HEURISTIC_FIELDS = ("system", "C", "method", "direction", "statistic",
                     "value", "p_value")
_VERIFY_FIELDS = ("run_id", "system", "map", "stat", "value")


def run_isometry(cfg, jobs=1):
    out_dir = _ensure_out_dir(cfg)
    product = simulate_experiment(cfg)
    emb_x, emb_y = build_embeddings(cfg, product)
    records = isometry_records(cfg, cfg.system.coupling, emb_x, emb_y,
                               product)
    outputs = [
        write_records(os.path.join(out_dir, "isometry"), _ISOMETRY_FIELDS,
                      records, cfg.output.format),
        report.save_isometry_figure(
            records, os.path.join(out_dir, "isometry.png")),
    ]
    outputs.append(write_manifest(out_dir, cfg, "isometry", outputs))
    return RunResult(outputs=tuple(outputs))


def run_heuristics(cfg, jobs=1):
    out_dir = _ensure_out_dir(cfg)
    product = simulate_experiment(cfg)
    emb_x, emb_y = build_embeddings(cfg, product)
    records = heuristic_records(cfg, cfg.system.coupling, emb_x, emb_y,
                                product)
    outputs = [
        write_records(os.path.join(out_dir, "heuristics"), _HEURISTIC_FIELDS,
                      records, cfg.output.format),
        report.save_heuristics_figure(
            records, os.path.join(out_dir, "heuristics.png")),
    ]
    outputs.append(write_manifest(out_dir, cfg, "heuristics", outputs))
    return RunResult(outputs=tuple(outputs))


def _sweep_cell(cfg, c_index, coupling):
    product = simulate_experiment(cfg, coupling=coupling)
    emb_x, emb_y = build_embeddings(cfg, product)
    iso = isometry_records(cfg, coupling, emb_x, emb_y, product,
                           c_index=c_index)
    heur = heuristic_records(cfg, coupling, emb_x, emb_y, product,
                             c_index=c_index)
    return iso, heur


def run_sweep(cfg, jobs=1):
    """Run every coupling-grid cell, tolerating per-cell failures."""
    grid = cfg.analysis.coupling_grid
    if grid is None:
        raise ConfigError("analysis.coupling_grid", "required for sweep")
    if len(grid) == 0:
        raise ConfigError("analysis.coupling_grid", "must not be empty")
    out_dir = _ensure_out_dir(cfg)

    iso_rows, heur_rows, errors, cells = {}, {}, [], []
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, jobs)) \
            as pool:
        futures = {
            pool.submit(_sweep_cell, cfg, ci, c): (ci, c)
            for ci, c in enumerate(grid)
        }
        for fut in concurrent.futures.as_completed(futures):
            ci, c = futures[fut]
            cells.append({"c_index": ci, "C": float(c),
                          "seed_paths": [[ci, _MAP_ORDER[k]]
                                         for k in cfg.analysis.maps]})
            try:
                iso_rows[ci], heur_rows[ci] = fut.result()
            except Exception as exc:  # record the cell, keep sweeping
                errors.append({"c_index": ci, "C": float(c),
                               "error": f"{type(exc).__name__}: {exc}"})

    iso = [row for ci in sorted(iso_rows) for row in iso_rows[ci]]
    heur = [row for ci in sorted(heur_rows) for row in heur_rows[ci]]
    cells.sort(key=lambda cell: cell["c_index"])
    outputs = [
        write_records(os.path.join(out_dir, "isometry_sweep"),
                      _ISOMETRY_FIELDS, iso, cfg.output.format),
        write_records(os.path.join(out_dir, "heuristics_sweep"),
                      _HEURISTIC_FIELDS, heur, cfg.output.format),
        report.save_sweep_figure(iso, os.path.join(out_dir,
                                                   "isometry_sweep.png")),
        report.save_heuristic_sweep_figure(
            heur, os.path.join(out_dir, "heuristics_sweep.png")),
    ]
    outputs.append(write_manifest(out_dir, cfg, "sweep", outputs,
                                  cells=cells, errors=errors))
    return RunResult(outputs=tuple(outputs), n_failed=len(errors))


def run_linear_verify(cfg, jobs=1):
    out_dir = _ensure_out_dir(cfg)
    records, notes = linear_verify_records(cfg)
    outputs = [
        write_records(os.path.join(out_dir, "linear_verify"), _VERIFY_FIELDS,
                      records, cfg.output.format),
        report.save_linear_verify_figure(
            records, os.path.join(out_dir, "linear_verify.png")),
    ]
    outputs.append(write_manifest(out_dir, cfg, "linear-verify", outputs,
                                  notes=notes))
    return RunResult(outputs=tuple(outputs))
