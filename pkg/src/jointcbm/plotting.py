"""Figures for study, comparison and benchmark tables.

matplotlib is optional. Every function raises ``ImportError`` when it is
missing; the CLI turns that into a warning and still writes the tables.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _num(v):
    if v is None or v == "":
        return None
    return float(v)


KPI_TITLES = {
    "pct_pm": "% preventive maintenance",
    "cost_per_day": "cost per day [K$/day]",
    "avg_cc_violation": "avg. chance-constraint violation",
}


def plot_study(rows: Sequence[dict], out_dir: str | Path, name: str = "study") -> list[Path]:
    """One bar panel per KPI; bars are policies, grouped by training-set size."""
    plt = _pyplot()
    out_dir = Path(out_dir)
    policies = list(dict.fromkeys(r["policy"] for r in rows))
    sizes = list(dict.fromkeys(int(r["n_train"]) for r in rows))
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    width = 0.8 / max(len(sizes), 1)
    for ax, (key, title) in zip(axes, KPI_TITLES.items()):
        for i, n in enumerate(sizes):
            sel = {r["policy"]: r for r in rows if int(r["n_train"]) == n}
            means = [_num(sel.get(p, {}).get(key)) for p in policies]
            errs = [_num(sel.get(p, {}).get(f"se_{key}")) or 0.0 for p in policies]
            xs = [k + (i - (len(sizes) - 1) / 2) * width for k in range(len(policies))]
            ax.bar(xs, [m if m is not None else 0.0 for m in means], width, yerr=errs,
                   capsize=3, label=f"{n} training signals")
        ax.set_xticks(range(len(policies)))
        ax.set_xticklabels(policies, rotation=20)
        ax.set_title(title)
        if key == "avg_cc_violation":
            ax.axhline(0.1, color="k", lw=0.8, ls="--")
        if key == "pct_pm":
            lo = min((_num(r.get(key)) or 100.0) for r in rows)
            ax.set_ylim(max(0.0, lo - 5.0), 100.5)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / f"{name}_kpis.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def plot_violation_rates(rows: Sequence[dict], out_dir: str | Path, name: str = "z2") -> list[Path]:
    """Violation rate and mean runtime of sampled solutions against S."""
    plt = _pyplot()
    out_dir = Path(out_dir)
    sample = [r for r in rows if r["method"] == "sample"]
    sizes = sorted({int(r["S"]) for r in sample})
    rate = [sum(str(r["violated"]) == "True" for r in sample if int(r["S"]) == s)
            / max(1, sum(int(r["S"]) == s for r in sample)) for s in sizes]
    rt = [sum(float(r["runtime"]) for r in sample if int(r["S"]) == s)
          / max(1, sum(int(r["S"]) == s for r in sample)) for s in sizes]
    exact = [float(r["runtime"]) for r in rows if r["method"] == "exact"]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    a1.plot(sizes, rate, marker="o")
    a1.set_xlabel("scenarios S")
    a1.set_ylabel("exact-constraint violation rate")
    a1.set_xscale("log")
    a2.plot(sizes, rt, marker="o", label="sample-based")
    if exact:
        a2.axhline(sum(exact) / len(exact), color="k", ls="--", label="exact")
    a2.set_xlabel("scenarios S")
    a2.set_ylabel("mean solve time [s]")
    a2.set_xscale("log")
    a2.legend()
    fig.tight_layout()
    path = out_dir / f"{name}_violation.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def plot_bench(rows: Sequence[dict], out_dir: str | Path, name: str = "bench") -> list[Path]:
    plt = _pyplot()
    out_dir = Path(out_dir)
    sizes = sorted({int(r["turbines"]) for r in rows})
    times = [[float(r["solve_time"]) for r in rows if int(r["turbines"]) == n] for n in sizes]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.boxplot(times)
    ax.set_xticks(range(1, len(sizes) + 1), [str(n) for n in sizes])
    ax.set_xlabel("turbines")
    ax.set_ylabel("solve time [s]")
    fig.tight_layout()
    path = out_dir / f"{name}_times.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
