"""Figure rendering for the report path.

Renders summary figures from experiment CSV rows to image files next to the
delimited output.  The CSV remains the data contract; these are reading
aids for sweep results.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update({
    "figure.figsize": (7.0, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _cell_label(cell) -> str:
    algo, k, d, R, eps = cell[0], cell[1], cell[2], cell[3], cell[4]
    label = f"{algo} k={k} d={d}"
    if R not in (None, "", 1):
        label += f" R={R}"
    if eps not in (None, ""):
        label += f" eps={eps}"
    return label


def render_summary_figures(groups: dict, fig_dir) -> list:
    """Write summary figures for grouped rows; returns the file paths.

    groups maps cell tuples (algo, k, d, R, eps, delta, scales...) to lists
    of row dicts with numeric fields already parsed.
    """
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    cells = sorted(groups, key=lambda c: tuple(str(x) for x in c))

    # per-cell gap distributions
    fig, ax = plt.subplots(figsize=(7.0, max(2.5, 0.45 * len(cells) + 1.2)))
    for y, cell in enumerate(cells):
        gaps = [r["gap"] for r in groups[cell] if r["gap"] is not None]
        if not gaps:
            continue
        jitter = [(y + 0.28 * ((j * 0.6180339887) % 1.0 - 0.5)) for j in range(len(gaps))]
        ax.plot(gaps, jitter, ".", alpha=0.55, markersize=4)
        eps = cell[4]
        if eps not in (None, ""):
            ax.plot([float(eps)] * 2, [y - 0.3, y + 0.3], "r-", linewidth=1.0)
    ax.set_yticks(range(len(cells)))
    ax.set_yticklabels([_cell_label(c) for c in cells])
    ax.set_xlabel("exact optimality gap (red line: target eps)")
    ax.set_title("gap distribution per cell")
    fig.tight_layout()
    p = fig_dir / "gap_by_cell.png"
    fig.savefig(p)
    plt.close(fig)
    paths.append(p)

    # samples vs k, one line per (algo, eps)
    series = {}
    for cell, rows in groups.items():
        algo, k, eps = cell[0], cell[1], cell[4]
        totals = [r["samples_total"] for r in rows if r["samples_total"]]
        if not totals or k in (None, ""):
            continue
        series.setdefault((algo, eps), []).append((int(k), sum(totals) / len(totals)))
    if series:
        fig, ax = plt.subplots()
        for (algo, eps), pts in sorted(series.items(), key=lambda t: str(t[0])):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-",
                    label=f"{algo}" + (f" eps={eps}" if eps not in (None, "") else ""))
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("number of distributions k")
        ax.set_ylabel("mean total samples")
        ax.set_title("sample usage vs k")
        ax.legend()
        fig.tight_layout()
        p = fig_dir / "samples_vs_k.png"
        fig.savefig(p)
        plt.close(fig)
        paths.append(p)

    # normalized trajectory norm vs k
    series = {}
    for cell, rows in groups.items():
        algo, k = cell[0], cell[1]
        norms = [r["traj_norm"] for r in rows if r["traj_norm"] is not None]
        if not norms or k in (None, ""):
            continue
        series.setdefault(algo, []).append((int(k), sum(norms) / len(norms) / int(k)))
    if series:
        fig, ax = plt.subplots()
        for algo, pts in sorted(series.items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "s-", label=algo)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("number of distributions k")
        ax.set_ylabel("mean trajectory norm / k")
        ax.set_title("adversary weight concentration vs k")
        ax.legend()
        fig.tight_layout()
        p = fig_dir / "traj_norm_vs_k.png"
        fig.savefig(p)
        plt.close(fig)
        paths.append(p)

    return paths
