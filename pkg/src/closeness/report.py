"""Figure rendering for run outputs.

Every runner writes its figures next to the delimited output so a run
directory is self-describing.  The functions here take the same long-form
records that go into the CSV files, never recompute statistics, and are
tolerant of partially failed sweeps (missing cells are simply absent from
the curves).
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def save_trajectory_figure(traj, path, max_points=2000):
    """Time series of the driver and response coordinates."""
    n = min(traj.n_samples, max_points)
    t = traj.times[:n]
    fig, (ax_x, ax_y) = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    for i in range(traj.n_x):
        ax_x.plot(t, traj.x[:n, i], lw=0.7, label=f"x{i + 1}")
    for i in range(traj.n_y):
        ax_y.plot(t, traj.y[:n, i], lw=0.7, label=f"y{i + 1}")
    ax_x.set_ylabel("driver")
    ax_y.set_ylabel("response")
    ax_y.set_xlabel("t")
    ax_x.legend(loc="upper right", fontsize=8)
    ax_y.legend(loc="upper right", fontsize=8)
    return _save(fig, path)


def save_embedding_figure(emb_x, emb_y, path, max_points=5000):
    """First two delay coordinates of each embedding."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, emb, name in ((axes[0], emb_x, "driver embedding"),
                          (axes[1], emb_y, "response embedding")):
        pts = emb.points[:max_points]
        if emb.m >= 2:
            ax.plot(pts[:, 0], pts[:, 1], ",", alpha=0.6)
            ax.set_xlabel("s(t)")
            ax.set_ylabel("s(t - tau)")
        else:
            ax.plot(emb.times[:max_points], pts[:, 0], lw=0.5)
            ax.set_xlabel("t")
            ax.set_ylabel("s(t)")
        ax.set_title(name, fontsize=9)
    return _save(fig, path)


def _by_map(records):
    table = {}
    for row in records:
        table.setdefault(row["map"], {})[row["stat"]] = row["value"]
    return table


def save_isometry_figure(records, path):
    """Ratio profile per map: extreme band plus inner percentiles."""
    table = _by_map(records)
    names = sorted(table)
    fig, ax = plt.subplots(figsize=(1.2 * max(len(names), 4) + 2, 4))
    for pos, name in enumerate(names):
        stats = table[name]
        if "lower" not in stats or "upper" not in stats:
            continue
        ax.plot([pos, pos], [stats["lower"], stats["upper"]], "-",
                color="tab:blue", lw=2)
        for key, marker in (("p5", "v"), ("p50", "o"), ("p95", "^")):
            if key in stats:
                ax.plot(pos, stats[key], marker, color="tab:orange", ms=4)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    positive = [v for stats in table.values() for v in stats.values()
                if v > 0]
    if positive:
        ax.set_yscale("log")
    ax.set_ylabel("squared-distance ratio")
    return _save(fig, path)


def save_sweep_figure(records, path):
    """Ratio extremes and median against the coupling strength, per map."""
    curves = {}
    for row in records:
        curves.setdefault(row["map"], {}).setdefault(
            row["stat"], []).append((row["C"], row["value"]))
    names = sorted(curves)
    ncols = 2
    nrows = max((len(names) + ncols - 1) // ncols, 1)
    fig, axes = plt.subplots(nrows, ncols, figsize=(9, 2.6 * nrows),
                             squeeze=False)
    for pos, name in enumerate(names):
        ax = axes[pos // ncols][pos % ncols]
        for stat, style in (("lower", "--"), ("p50", "-"), ("upper", "--")):
            pts = sorted(curves[name].get(stat, []))
            if pts:
                c, v = zip(*pts)
                ax.plot(c, v, style, lw=1, label=stat)
        ax.set_title(name, fontsize=9)
        ax.set_yscale("log")
        ax.set_xlabel("coupling C")
        ax.legend(fontsize=7)
    for pos in range(len(names), nrows * ncols):
        axes[pos // ncols][pos % ncols].axis("off")
    return _save(fig, path)


def _heuristic_series(records, method, direction, prefix):
    """(tag, value) points for statistics named like ``prefix@tag``."""
    out = []
    for row in records:
        if row["method"] != method or row["direction"] != direction:
            continue
        stat = row["statistic"]
        if stat.startswith(prefix + "@"):
            out.append((float(stat.split("@", 1)[1]), row["value"]))
    return sorted(out)


def save_heuristics_figure(records, path):
    """Single-coupling heuristic summary: scores, cross-map, continuity."""
    fig, (ax_s, ax_c, ax_t) = plt.subplots(1, 3, figsize=(11, 3.4))

    labels, values = [], []
    for row in records:
        if row["method"] in ("distance_score", "rank_score") \
                and row["direction"] in ("x_given_y", "y_given_x"):
            labels.append(f"{row['statistic']}\n{row['direction']}")
            values.append(row["value"])
    if labels:
        ax_s.bar(range(len(labels)), values, color="tab:blue")
        ax_s.set_xticks(range(len(labels)))
        ax_s.set_xticklabels(labels, fontsize=7)
    ax_s.set_title("neighbor scores", fontsize=9)

    for direction, style in (("y_to_x", "-o"), ("x_to_y", "--s")):
        pts = _heuristic_series(records, "cross_map", direction, "skill")
        if pts:
            lib, skill = zip(*pts)
            ax_c.plot(lib, skill, style, ms=3, label=direction)
    ax_c.set_xlabel("library size")
    ax_c.set_ylabel("cross-map skill")
    ax_c.legend(fontsize=7)
    ax_c.set_title("cross mapping", fontsize=9)

    for direction, style in (("y_to_x", "-o"), ("x_to_y", "--s"),
                             ("product", ":^")):
        pts = _heuristic_series(records, "continuity", direction, "theta")
        if pts:
            eps, theta = zip(*pts)
            ax_t.plot(eps, theta, style, ms=3, label=direction)
    ax_t.set_xlabel("epsilon")
    ax_t.set_ylabel("theta")
    ax_t.set_ylim(-0.05, 1.05)
    ax_t.legend(fontsize=7)
    ax_t.set_title("continuity", fontsize=9)
    return _save(fig, path)


def save_heuristic_sweep_figure(records, path):
    """Directional scores against coupling strength."""
    per_c = {}
    for row in records:
        per_c.setdefault(row["C"], []).append(row)

    def curve(picker):
        pts = []
        for c, rows in sorted(per_c.items()):
            value = picker(rows)
            if value is not None:
                pts.append((c, value))
        return pts

    def scalar(rows, method, direction, statistic):
        for row in rows:
            if (row["method"], row["direction"], row["statistic"]) \
                    == (method, direction, statistic):
                return row["value"]
        return None

    def at_max_tag(rows, method, direction, prefix):
        pts = _heuristic_series(rows, method, direction, prefix)
        return pts[-1][1] if pts else None

    fig, (ax_m, ax_c) = plt.subplots(1, 2, figsize=(9, 3.6))
    for label, picker in (
        ("M(X|Y)", lambda r: scalar(r, "distance_score", "x_given_y", "M")),
        ("M(Y|X)", lambda r: scalar(r, "distance_score", "y_given_x", "M")),
        ("L(X|Y)", lambda r: scalar(r, "rank_score", "x_given_y", "L")),
        ("L(Y|X)", lambda r: scalar(r, "rank_score", "y_given_x", "L")),
    ):
        pts = curve(picker)
        if pts:
            c, v = zip(*pts)
            ax_m.plot(c, v, "-o", ms=3, label=label)
    ax_m.set_xlabel("coupling C")
    ax_m.set_ylabel("score")
    ax_m.legend(fontsize=7)
    ax_m.set_title("neighbor scores", fontsize=9)

    for label, picker in (
        ("skill y->x", lambda r: at_max_tag(r, "cross_map", "y_to_x",
                                            "skill")),
        ("skill x->y", lambda r: at_max_tag(r, "cross_map", "x_to_y",
                                            "skill")),
        ("theta y->x", lambda r: at_max_tag(r, "continuity", "y_to_x",
                                            "theta")),
        ("theta x->y", lambda r: at_max_tag(r, "continuity", "x_to_y",
                                            "theta")),
    ):
        pts = curve(picker)
        if pts:
            c, v = zip(*pts)
            ax_c.plot(c, v, "-o", ms=3, label=label)
    ax_c.set_xlabel("coupling C")
    ax_c.set_ylabel("value at largest budget")
    ax_c.legend(fontsize=7)
    ax_c.set_title("cross map and continuity", fontsize=9)
    return _save(fig, path)


def save_linear_verify_figure(records, path):
    """Analytic bands vs empirical extremes for the linear example maps."""
    table = _by_map(records)
    names = sorted(table)
    fig, ax = plt.subplots(figsize=(1.5 * max(len(names), 4) + 2, 4))
    for pos, name in enumerate(names):
        stats = table[name]
        if "analytic_lower" in stats and "analytic_upper" in stats:
            ax.fill_between([pos - 0.25, pos + 0.25],
                            stats["analytic_lower"], stats["analytic_upper"],
                            color="tab:green", alpha=0.3,
                            label="analytic band" if pos == 0 else None)
        if "empirical_lower" in stats and "empirical_upper" in stats:
            ax.plot([pos, pos],
                    [max(stats["empirical_lower"], 1e-18),
                     stats["empirical_upper"]],
                    "-", color="tab:blue", lw=2)
            ax.plot([pos, pos],
                    [max(stats["empirical_lower"], 1e-18),
                     stats["empirical_upper"]], "_", color="tab:blue", ms=10)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_yscale("log")
    ax.set_ylabel("squared-distance ratio")
    handles, labels = ax.get_legend_handles_labels()
    if handles:
        ax.legend(fontsize=8)
    return _save(fig, path)
