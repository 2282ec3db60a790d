"""Experiment orchestration: configs, runs, sweeps, persistence, summaries.

One JSON config format (schema_version field required) drives both single
experiments and grid sweeps.  Each trial writes a JSON run report; one CSV
accumulates a fixed-schema row per trial.  Rows are appended (and flushed)
as trials finish so an interrupted sweep leaves a valid file, then the
completed file is rewritten sorted by cell and trial for byte stability
under parallel execution.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    ConfigError,
    Instance,
    ValidationError,
    canonical_json,
    fmt_float,
)
from .diagnostics import Trajectory, weight_buckets
from .game import run_bilinear_hedge, solve_matrix_game
from .instances import (
    RademacherSchedule,
    make_hard_instance,
    make_heterogeneous_instance,
    make_random_instance,
)
from .learners import (
    REPORT_SCHEMA_VERSION,
    run_mdl_hedge_rad,
    run_mdl_hedge_vc,
    run_mlmdl_hedge,
    run_uniform_baseline,
)

CONFIG_SCHEMA_VERSION = 1
CSV_SCHEMA_VERSION = 1

CSV_HEADER = ("schema_version,trial,seed,algo,k,d,R,eps,delta,scale_eta,scale_T,"
              "scale_T1,rounds,samples_bank,samples_fresh,samples_total,gap,"
              "traj_norm,trigger_count,wallclock_ms")
CSV_COLUMNS = CSV_HEADER.split(",")

DIAG_HEADER = "schema_version,trial,seed,algo,k,d,R,eps,traj_norm,bucket_j,bucket_count"

ALGORITHMS = ("hedge_vc", "hedge_rad", "mlmdl", "uniform", "bilinear")


@dataclass
class ExperimentConfig:
    """Validated contents of one experiment config document."""

    algorithm: str
    instance_spec: dict
    seeds: tuple
    eps: float | None = None
    delta: float | None = None
    scale: tuple = (1.0, 1.0, 1.0)
    schedule: dict | None = None
    budget: int | None = None
    out_dir: str = "out"
    thin_stride: int | None = None
    t_formula: str = "algorithm"
    erm_eps1: float = 0.0
    bank_mode: str = "independent"
    opt_tol: float = 1e-6
    log_base: float | None = None
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
            raise ConfigError(
                f"config schema_version must be {CONFIG_SCHEMA_VERSION}")
        algo = doc.get("algorithm")
        if algo not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {algo!r}")
        spec = doc.get("instance")
        if not isinstance(spec, dict) or not (
                {"path", "inline", "generator"} & set(spec)):
            raise ConfigError("instance must give one of: path, inline, generator")
        seeds = doc.get("seeds")
        if isinstance(seeds, dict):
            count, base = int(seeds.get("count", 0)), int(seeds.get("base", 0))
            seeds = tuple(range(base, base + count))
        elif isinstance(seeds, list):
            seeds = tuple(int(s) for s in seeds)
        else:
            seeds = None
        if not seeds:
            raise ConfigError("seeds must be a nonempty list or {count, base}")
        eps = doc.get("eps")
        delta = doc.get("delta")
        if algo in ("hedge_vc", "hedge_rad", "mlmdl"):
            if eps is None or delta is None:
                raise ConfigError(f"algorithm {algo} requires eps and delta")
        if algo == "bilinear" and eps is None:
            raise ConfigError("algorithm bilinear requires eps")
        if algo == "uniform" and doc.get("budget") is None:
            raise ConfigError("algorithm uniform requires budget")
        scale = tuple(float(c) for c in doc.get("scale", (1.0, 1.0, 1.0)))
        if len(scale) != 3 or any(c <= 0 for c in scale):
            raise ConfigError("scale must be three positive multipliers")
        schedule = doc.get("schedule")
        if algo == "hedge_rad" and schedule is not None:
            RademacherSchedule.from_config(schedule)  # validates
        t_formula = doc.get("t_formula", "algorithm")
        if t_formula not in ("algorithm", "proof"):
            raise ConfigError("t_formula must be 'algorithm' or 'proof'")
        bank_mode = doc.get("loss_correlation", "independent")
        if bank_mode not in ("independent", "shared"):
            raise ConfigError("loss_correlation must be 'independent' or 'shared'")
        thin = doc.get("thin_stride")
        return cls(
            algorithm=algo,
            instance_spec=spec,
            seeds=seeds,
            eps=None if eps is None else float(eps),
            delta=None if delta is None else float(delta),
            scale=scale,
            schedule=schedule,
            budget=None if doc.get("budget") is None else int(doc["budget"]),
            out_dir=str(doc.get("out_dir", "out")),
            thin_stride=None if thin is None else int(thin),
            t_formula=t_formula,
            erm_eps1=float(doc.get("erm_eps1", 0.0)),
            bank_mode=bank_mode,
            opt_tol=float(doc.get("opt_tol", 1e-6)),
            log_base=None if doc.get("log_base") is None else float(doc["log_base"]),
            raw=doc,
        )

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)


def build_instance(spec: dict) -> Instance:
    if "path" in spec:
        return Instance.from_json(Path(spec["path"]).read_text())
    if "inline" in spec:
        return Instance.from_json(json.dumps(spec["inline"]))
    gen = spec["generator"]
    params = dict(spec.get("params", {}))
    if gen == "random":
        if "H" not in params and "d" in params:
            params["H"] = 2 ** int(params["d"])
        return make_random_instance(
            k=int(params.get("k", 2)), H=int(params.get("H", 16)),
            d=int(params.get("d", 0)), eps_gap=float(params.get("eps_gap", 0.05)),
            seed=int(params.get("seed", 0)), R=int(params.get("R", 1)))
    if gen == "hard":
        return make_hard_instance(d=int(params["d"]), k=int(params["k"]),
                                  eps=float(params["eps"]))
    if gen == "heterogeneous":
        return make_heterogeneous_instance(k=int(params.get("k", 4)),
                                           seed=int(params.get("seed", 0)))
    raise ConfigError(f"unknown instance generator {gen!r}")


def _kwargs_common(cfg: ExperimentConfig) -> dict:
    out = {"thin_stride": cfg.thin_stride, "opt_tol": cfg.opt_tol,
           "bank_mode": cfg.bank_mode, "erm_eps1": cfg.erm_eps1}
    if cfg.log_base is not None:
        out["log_base"] = cfg.log_base
    return out


def execute_trial(cfg: ExperimentConfig, trial: int, seed: int) -> dict:
    """Run one (config, seed) trial; returns the report document."""
    instance = build_instance(cfg.instance_spec)
    if cfg.algorithm == "hedge_vc":
        kw = _kwargs_common(cfg)
        kw["t_formula"] = cfg.t_formula
        report = run_mdl_hedge_vc(instance, cfg.eps, cfg.delta, cfg.scale, seed, **kw)
        doc = report.to_dict()
    elif cfg.algorithm == "hedge_rad":
        sched_cfg = cfg.schedule or {"kind": "vc", "d": instance.vc_dim_proxy}
        schedule = RademacherSchedule.from_config(sched_cfg)
        kw = _kwargs_common(cfg)
        kw["t_formula"] = cfg.t_formula
        report = run_mdl_hedge_rad(instance, cfg.eps, cfg.delta, schedule,
                                   cfg.scale, seed, **kw)
        doc = report.to_dict()
    elif cfg.algorithm == "mlmdl":
        report = run_mlmdl_hedge(instance, cfg.eps, cfg.delta, cfg.scale, seed,
                                 **_kwargs_common(cfg))
        doc = report.to_dict()
    elif cfg.algorithm == "uniform":
        report = run_uniform_baseline(instance, cfg.budget, seed,
                                      bank_mode=cfg.bank_mode, opt_tol=cfg.opt_tol)
        doc = report.to_dict()
    elif cfg.algorithm == "bilinear":
        doc = _bilinear_trial(cfg, instance, seed)
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"unknown algorithm {cfg.algorithm}")
    doc["trial"] = trial
    return doc


def _bilinear_trial(cfg: ExperimentConfig, instance: Instance, seed: int) -> dict:
    """Bilinear-game run over the instance's exact loss vectors.

    The action set is the instance's rows of exact per-distribution losses;
    the seed only rotates which row breaks ties first (runs are otherwise
    deterministic), so reports stay reproducible per (config, seed).
    """
    import time

    t0 = time.perf_counter()
    Y = instance.means_matrix()
    if seed:
        Y = np.roll(Y, seed % Y.shape[0], axis=0)
    traj = run_bilinear_hedge(Y, cfg.eps,
                              log_base=cfg.log_base if cfg.log_base else math.e)
    value, _, _ = solve_matrix_game(Y, tol=cfg.opt_tol)
    gap = traj.averaged_gap()
    stride = max(1, len(traj) // 512)
    stored = traj.weights[::stride]
    diag = Trajectory(
        weights=stored,
        times=np.arange(1, len(traj) + 1, stride),
        running_max=traj.weights.max(axis=0),
        total_rounds=len(traj),
        stride=stride,
    )
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "algo": "bilinear",
        "seed": seed,
        "instance": {"name": instance.name, "k": instance.k,
                     "d": instance.vc_dim_proxy, "R": instance.R},
        "eps": cfg.eps,
        "delta": None,
        "scale": list(cfg.scale),
        "hyper": {"eta": traj.eta, "T": len(traj)},
        "rounds": len(traj),
        "final_hypothesis": {"support": [], "weights": []},
        "samples": {"bank": 0, "fresh": 0, "rad_initial": 0, "total": 0},
        "stream_counters": {},
        "trigger_count": 0,
        "trajectory": {
            "stride": diag.stride,
            "total_rounds": diag.total_rounds,
            "times": diag.times.tolist(),
            "weights": [row.tolist() for row in diag.weights],
            "running_max": diag.running_max.tolist(),
        },
        "traj_norm": float(traj.weights.max(axis=0).sum()),
        "worst_case_loss": float(traj.averaged_vector().max()),
        "opt_value": value,
        "gap": gap,
        "wallclock_ms": (time.perf_counter() - t0) * 1000.0,
        "config": {},
    }


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------

def _csv_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return fmt_float(x)
    return str(x)


def report_to_row(doc: dict) -> dict:
    return {
        "schema_version": CSV_SCHEMA_VERSION,
        "trial": doc["trial"],
        "seed": doc["seed"],
        "algo": doc["algo"],
        "k": doc["instance"]["k"],
        "d": doc["instance"]["d"],
        "R": doc["instance"]["R"],
        "eps": doc["eps"],
        "delta": doc["delta"],
        "scale_eta": doc["scale"][0],
        "scale_T": doc["scale"][1],
        "scale_T1": doc["scale"][2],
        "rounds": doc["rounds"],
        "samples_bank": doc["samples"]["bank"],
        "samples_fresh": doc["samples"]["fresh"],
        "samples_total": doc["samples"]["total"],
        "gap": doc["gap"],
        "traj_norm": doc["traj_norm"],
        "trigger_count": doc["trigger_count"],
        "wallclock_ms": doc["wallclock_ms"],
    }


def format_row(row: dict) -> str:
    return ",".join(_csv_value(row[c]) for c in CSV_COLUMNS)


def _row_sort_key(line: str):
    parts = line.split(",")
    by = dict(zip(CSV_COLUMNS, parts))
    return (by["algo"], by["k"], by["d"], by["R"], by["eps"], by["delta"],
            by["scale_eta"], by["scale_T"], by["scale_T1"],
            int(by["trial"]), int(by["seed"]))


def _diag_rows(doc: dict) -> list:
    traj = doc["trajectory"]
    t = Trajectory(
        weights=np.asarray(traj["weights"]),
        times=np.asarray(traj["times"]),
        running_max=np.asarray(traj["running_max"]),
        total_rounds=traj["total_rounds"],
        stride=traj["stride"],
    )
    head = [CSV_SCHEMA_VERSION, doc["trial"], doc["seed"], doc["algo"],
            doc["instance"]["k"], doc["instance"]["d"], doc["instance"]["R"],
            doc["eps"]]
    rows = []
    for j, count in weight_buckets(t):
        rows.append(",".join(_csv_value(v) for v in
                             head + [doc["traj_norm"], j, count]))
    return rows


# ---------------------------------------------------------------------------
# run / sweep drivers
# ---------------------------------------------------------------------------

def _worker(cfg_doc: dict, trial: int, seed: int) -> dict:
    cfg = ExperimentConfig.from_dict(cfg_doc)
    return execute_trial(cfg, trial, seed)


def default_threads() -> int:
    env = os.environ.get("MDL_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_cells(cells, out_dir: Path, threads: int | None = None) -> dict:
    """Execute (cell_tag, cfg, trial, seed) tuples and persist everything.

    Returns {"rows": [...], "errors": [...], "csv": path}.  Reports land in
    out_dir/reports/, rows in out_dir/results.csv (appended as completed,
    sorted on success), bucket diagnostics in out_dir/diagnostics.csv.
    """
    out_dir = Path(out_dir)
    reports_dir = out_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    diag_path = out_dir / "diagnostics.csv"
    threads = threads if threads is not None else default_threads()

    work = [(tag, cfg, trial, seed) for (tag, cfg, trial, seed) in cells]
    rows, diag_lines, errors = [], [], []

    def handle(tag, cfg, trial, seed, doc, csv_file):
        # serialize the report first: no CSV row for a report that fails
        try:
            report_text = canonical_json(doc)
            row = report_to_row(doc)
            line = format_row(row)
        except Exception as exc:
            errors.append({"cell": tag, "trial": trial, "seed": seed,
                           "error": f"serialization: {exc}"})
            return
        name = f"{tag}_t{trial:03d}_s{seed}.json"
        (reports_dir / name).write_text(report_text)
        csv_file.write(line + "\n")
        csv_file.flush()
        rows.append(line)
        diag_lines.extend(_diag_rows(doc))

    with open(csv_path, "w") as csv_file:
        csv_file.write(CSV_HEADER + "\n")
        csv_file.flush()
        if threads <= 1:
            for tag, cfg, trial, seed in work:
                try:
                    doc = execute_trial(cfg, trial, seed)
                except Exception as exc:
                    errors.append({"cell": tag, "trial": trial, "seed": seed,
                                   "error": str(exc)})
                    continue
                handle(tag, cfg, trial, seed, doc, csv_file)
        else:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                futures = {
                    pool.submit(_worker, cfg.raw, trial, seed): (tag, cfg, trial, seed)
                    for tag, cfg, trial, seed in work
                }
                for fut in as_completed(futures):
                    tag, cfg, trial, seed = futures[fut]
                    try:
                        doc = fut.result()
                    except Exception as exc:
                        errors.append({"cell": tag, "trial": trial, "seed": seed,
                                       "error": str(exc)})
                        continue
                    handle(tag, cfg, trial, seed, doc, csv_file)

    # canonical order for byte stability under parallel completion
    rows.sort(key=_row_sort_key)
    with open(csv_path, "w") as csv_file:
        csv_file.write(CSV_HEADER + "\n")
        for line in rows:
            csv_file.write(line + "\n")
    with open(diag_path, "w") as diag_file:
        diag_file.write(DIAG_HEADER + "\n")
        for line in sorted(diag_lines):
            diag_file.write(line + "\n")
    return {"rows": rows, "errors": errors, "csv": csv_path, "diagnostics": diag_path}


def _cell_tag(cfg: ExperimentConfig, overrides: dict | None = None) -> str:
    bits = [cfg.algorithm]
    params = dict(cfg.instance_spec.get("params", {})) if "generator" in cfg.instance_spec else {}
    for key in ("k", "d"):
        v = (overrides or {}).get(key, params.get(key))
        if v is not None:
            bits.append(f"{key}{v}")
    if cfg.eps is not None:
        bits.append(f"eps{cfg.eps}")
    return "-".join(str(b).replace(".", "p") for b in bits)


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> dict:
    """Execute every seed of a single-cell config."""
    tag = _cell_tag(cfg)
    cells = [(tag, cfg, trial, seed) for trial, seed in enumerate(cfg.seeds)]
    result = run_cells(cells, Path(cfg.out_dir), threads)
    return result


def expand_sweep(doc: dict) -> list:
    """Cartesian-product cells of a sweep config: (tag, cfg, trial, seed)."""
    if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"sweep schema_version must be {CONFIG_SCHEMA_VERSION}")
    base = doc.get("base")
    grid = doc.get("grid")
    if not isinstance(base, dict) or not isinstance(grid, dict) or not grid:
        raise ConfigError("sweep config needs 'base' (object) and nonempty 'grid'")
    allowed = {"k", "d", "eps", "algorithm"}
    if set(grid) - allowed:
        raise ConfigError(f"grid keys must be within {sorted(allowed)}")
    axes = [(key, list(vals)) for key, vals in sorted(grid.items())]
    if any(not vals for _, vals in axes):
        raise ConfigError("grid axes must be nonempty")
    if ({"k", "d"} & set(grid)) and "generator" not in base.get("instance", {}):
        raise ConfigError("grid axes k/d need a generator-backed instance")
    cells = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        over = dict(zip((k for k, _ in axes), combo))
        cell_doc = json.loads(json.dumps(base))
        cell_doc["schema_version"] = CONFIG_SCHEMA_VERSION
        if "algorithm" in over:
            cell_doc["algorithm"] = over["algorithm"]
        if "eps" in over:
            cell_doc["eps"] = over["eps"]
        spec = cell_doc.get("instance", {})
        if "generator" in spec:
            params = dict(spec.get("params", {}))
            if "k" in over:
                params["k"] = over["k"]
            if "d" in over:
                params["d"] = over["d"]
                params.pop("H", None)
            spec["params"] = params
            cell_doc["instance"] = spec
        cfg = ExperimentConfig.from_dict(cell_doc)
        tag = _cell_tag(cfg, over)
        for trial, seed in enumerate(cfg.seeds):
            cells.append((tag, cfg, trial, seed))
    return cells


def run_sweep(doc: dict, threads: int | None = None) -> dict:
    cells = expand_sweep(doc)
    out_dir = Path(doc["base"].get("out_dir", "out"))
    return run_cells(cells, out_dir, threads)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def _parse_rows(csv_path) -> list:
    lines = Path(csv_path).read_text().strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{csv_path} does not carry the expected CSV header")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        row = dict(zip(CSV_COLUMNS, parts))
        for col in ("eps", "delta", "gap", "traj_norm", "wallclock_ms",
                    "scale_eta", "scale_T", "scale_T1"):
            row[col] = float(row[col]) if row[col] != "" else None
        for col in ("trial", "seed", "rounds", "samples_bank", "samples_fresh",
                    "samples_total", "trigger_count", "k", "d", "R"):
            row[col] = int(row[col]) if row[col] != "" else None
        rows.append(row)
    return rows


def summarize(csv_path, out_path=None, fig_dir=None, render_figures: bool = True) -> dict:
    """Aggregate a results CSV per cell; optionally render figures.

    Returns {"cells": {...}, "summary_csv": path, "figures": [paths]}.
    """
    rows = _parse_rows(csv_path)
    groups = {}
    for row in rows:
        cell = (row["algo"], row["k"], row["d"], row["R"], row["eps"],
                row["delta"], row["scale_eta"], row["scale_T"], row["scale_T1"])
        groups.setdefault(cell, []).append(row)

    header = ("algo,k,d,R,eps,delta,trials,success_frac,gap_mean,gap_median,"
              "gap_q10,gap_q90,samples_mean,traj_norm_mean,wallclock_ms_mean")
    lines = []
    cells_out = {}
    for cell in sorted(groups, key=lambda c: tuple(str(x) for x in c)):
        rs = groups[cell]
        gaps = np.array([r["gap"] for r in rs if r["gap"] is not None])
        eps = cell[4]
        success = float(np.mean(gaps <= eps)) if eps is not None and gaps.size else None
        stats = {
            "trials": len(rs),
            "success_frac": success,
            "gap_mean": float(gaps.mean()) if gaps.size else None,
            "gap_median": float(np.median(gaps)) if gaps.size else None,
            "gap_q10": float(np.quantile(gaps, 0.1)) if gaps.size else None,
            "gap_q90": float(np.quantile(gaps, 0.9)) if gaps.size else None,
            "samples_mean": float(np.mean([r["samples_total"] for r in rs])),
            "traj_norm_mean": float(np.mean([r["traj_norm"] for r in rs
                                             if r["traj_norm"] is not None])),
            "wallclock_ms_mean": float(np.mean([r["wallclock_ms"] for r in rs
                                                if r["wallclock_ms"] is not None])),
        }
        cells_out[cell] = stats
        lines.append(",".join(
            [_csv_value(v) for v in cell[:6]]
            + [_csv_value(stats[k]) for k in
               ("trials", "success_frac", "gap_mean", "gap_median", "gap_q10",
                "gap_q90", "samples_mean", "traj_norm_mean", "wallclock_ms_mean")]))

    out_path = Path(out_path) if out_path else Path(csv_path).with_name("summary.csv")
    out_path.write_text(header + "\n" + "\n".join(lines) + ("\n" if lines else ""))

    figures = []
    if render_figures:
        from .plots import render_summary_figures
        figures = render_summary_figures(groups, fig_dir or out_path.parent / "figures")
    return {"cells": cells_out, "summary_csv": out_path, "figures": figures}


# ---------------------------------------------------------------------------
# argparse front end
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mdlearn",
        description="Experiments for worst-case loss minimization over "
                    "multiple sampling distributions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every seed of one experiment config")
    p_run.add_argument("-c", "--config", required=True)
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--threads", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="run a grid sweep config")
    p_sweep.add_argument("-c", "--config", required=True)
    p_sweep.add_argument("--threads", type=int, default=None)

    p_inst = sub.add_parser("instance", help="generate instance files")
    inst_sub = p_inst.add_subparsers(dest="generator", required=True)
    p_rand = inst_sub.add_parser("make-random")
    p_rand.add_argument("--k", type=int, required=True)
    p_rand.add_argument("--H", type=int, required=True)
    p_rand.add_argument("--d", type=int, default=0)
    p_rand.add_argument("--eps-gap", type=float, default=0.05)
    p_rand.add_argument("--seed", type=int, default=0)
    p_rand.add_argument("--R", type=int, default=1)
    p_rand.add_argument("--out", required=True)
    p_hard = inst_sub.add_parser("make-hard")
    p_hard.add_argument("--d", type=int, required=True)
    p_hard.add_argument("--k", type=int, required=True)
    p_hard.add_argument("--eps", type=float, required=True)
    p_hard.add_argument("--out", required=True)
    p_het = inst_sub.add_parser("make-heterogeneous")
    p_het.add_argument("--k", type=int, default=4)
    p_het.add_argument("--seed", type=int, default=0)
    p_het.add_argument("--out", required=True)

    p_solve = sub.add_parser("solve-opt", help="print a game value and strategies")
    p_solve.add_argument("--instance", required=True)
    p_solve.add_argument("--tol", type=float, default=1e-6)
    p_solve.add_argument("--out", default=None)

    p_rep = sub.add_parser("report", help="aggregate results")
    rep_sub = p_rep.add_subparsers(dest="report_command", required=True)
    p_sum = rep_sub.add_parser("summarize")
    p_sum.add_argument("--csv", required=True)
    p_sum.add_argument("--out", default=None)
    p_sum.add_argument("--fig-dir", default=None)
    p_sum.add_argument("--no-figures", action="store_true")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure; partial outputs are flushed
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "run":
        cfg = ExperimentConfig.from_json_file(args.config)
        if args.out_dir:
            cfg.out_dir = args.out_dir
        result = run_experiment(cfg, threads=args.threads)
        print(f"wrote {len(result['rows'])} rows to {result['csv']}")
        if result["errors"]:
            for err in result["errors"]:
                print(f"trial failed: {err}", file=sys.stderr)
            return 1
        return 0
    if args.command == "sweep":
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read sweep config: {exc}") from exc
        result = run_sweep(doc, threads=args.threads)
        print(f"wrote {len(result['rows'])} rows to {result['csv']}")
        for err in result["errors"]:
            print(f"cell trial failed: {err}", file=sys.stderr)
        return 0
    if args.command == "instance":
        if args.generator == "make-random":
            inst = make_random_instance(k=args.k, H=args.H, d=args.d,
                                        eps_gap=args.eps_gap, seed=args.seed, R=args.R)
        elif args.generator == "make-hard":
            inst = make_hard_instance(d=args.d, k=args.k, eps=args.eps)
        else:
            inst = make_heterogeneous_instance(k=args.k, seed=args.seed)
        Path(args.out).write_text(inst.to_json())
        print(f"wrote {args.out} ({inst.name}: k={inst.k} H={inst.H} R={inst.R})")
        return 0
    if args.command == "solve-opt":
        inst = Instance.from_json(Path(args.instance).read_text())
        value, pi_star, w_star = solve_matrix_game(inst.game_matrix(), tol=args.tol)
        doc = {
            "value": value,
            "pi_star": {h: float(p) for h, p in zip(inst.hypotheses, pi_star)
                        if p > 1e-12},
            "w_star": [float(x) for x in w_star],
        }
        text = canonical_json(doc)
        if args.out:
            Path(args.out).write_text(text)
        print(text)
        return 0
    if args.command == "report":
        result = summarize(args.csv, out_path=args.out, fig_dir=args.fig_dir,
                           render_figures=not args.no_figures)
        print(f"wrote {result['summary_csv']}")
        for fig in result["figures"]:
            print(f"wrote {fig}")
        return 0
    raise ConfigError(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
