"""Experiment orchestration: runs, sweeps, variant comparisons, artifacts.

Every run writes a self-contained directory: the canonical config text,
a per-step trajectory CSV, estimate report CSVs, optional field snapshots
and a manifest listing each artifact with its content hash. Failures keep
whatever was produced and mark the manifest FAILED so partial output is
never mistaken for a clean run.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, build_initial_field, config_to_text
from .estimates import (
    EstimateReport,
    continuum_monitors,
    p_variant_energy,
    verify_prop31,
    verify_prop32,
    verify_prop33,
    write_reports_csv,
    write_terms_csv,
)
from .exceptions import CrystalflowError
from .grid import FLOAT_FMT, Field, save_field
from .stepper import Trajectory, run

__all__ = [
    "ExperimentResult",
    "run_experiment",
    "sweep",
    "compare_variants",
    "compare_scaled_sinh",
]

_REPORT_FUNCS = {
    "prop31": verify_prop31,
    "prop32": verify_prop32,
    "prop33": verify_prop33,
}


@dataclasses.dataclass
class ExperimentResult:
    exit_code: int
    directory: Path
    trajectory: Trajectory | None
    reports: list
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.exit_code == 0


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_trajectory_csv(traj: Trajectory, path: Path) -> None:
    monitors = continuum_monitors(traj)
    qw = traj.grid.quad_weights()
    measure = traj.grid.measure
    with open(path, "w", newline="\n") as fh:
        fh.write(
            "k,t,picard_iters,newton_used,residual_inf,"
            "u_mean,mass,dirichlet,cosh_energy,l2_time_derivative,w_sup\n"
        )
        for k, rec in enumerate(traj.records):
            u_mean = float(qw @ rec.u.values) / measure
            w_sup = float(np.abs(rec.w.values).max())
            row = [
                str(k),
                FLOAT_FMT % monitors.t[k],
                str(rec.picard_iters),
                str(rec.newton_used).lower(),
                FLOAT_FMT % rec.residual_inf,
                FLOAT_FMT % u_mean,
                FLOAT_FMT % monitors.mass[k],
                FLOAT_FMT % monitors.dirichlet[k],
                FLOAT_FMT % monitors.cosh_energy[k],
                FLOAT_FMT % monitors.l2_time_derivative[k],
                FLOAT_FMT % w_sup,
            ]
            fh.write(",".join(row) + "\n")


def _applicable_reports(cfg: ExperimentConfig, traj: Trajectory) -> list[EstimateReport]:
    variant = cfg.variant
    if variant.p is not None:
        return [p_variant_energy(traj, variant.p)]
    if not variant.hyperbolic:
        return []
    return [_REPORT_FUNCS[name](traj) for name in cfg.output.reports]


def run_experiment(cfg: ExperimentConfig, output_root=None) -> ExperimentResult:
    """Run one configured trajectory and persist all artifacts.

    output_root, when given, is prepended to the configured output
    directory. Returns exit code 0 on a clean run, 1 when the step solver
    or an estimate check raised; the directory then contains a FAILED
    manifest along with any partial artifacts.
    """
    out_dir = Path(cfg.output.directory)
    if output_root is not None:
        out_dir = Path(output_root) / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    config_text = config_to_text(cfg)
    (out_dir / "config.txt").write_text(config_text, newline="\n")

    started = time.time()
    traj = None
    reports: list[EstimateReport] = []
    error = None
    try:
        u0 = build_initial_field(cfg)
        traj = run(u0, cfg.scheme, cfg.variant)
        _write_trajectory_csv(traj, out_dir / "trajectory.csv")
        if cfg.output.snapshot_stride > 0:
            fields_dir = out_dir / "fields"
            fields_dir.mkdir(exist_ok=True)
            for rec in traj.records:
                if rec.k % cfg.output.snapshot_stride == 0 or rec.k == traj.num_steps:
                    save_field(rec.u, fields_dir / f"u_{rec.k:06d}.csv")
                    save_field(rec.w, fields_dir / f"w_{rec.k:06d}.csv")
        reports = _applicable_reports(cfg, traj)
        with open(out_dir / "reports.csv", "w", newline="\n") as fh:
            write_reports_csv(reports, fh)
        with open(out_dir / "report_terms.csv", "w", newline="\n") as fh:
            write_terms_csv(reports, fh)
    except CrystalflowError as err:
        error = f"{type(err).__name__}: {err}"

    failed_reports = [rep.name for rep in reports if not rep.passed]
    status = "FAILED" if (error or failed_reports) else "OK"
    artifacts = {
        str(p.relative_to(out_dir)): _sha256(p)
        for p in sorted(out_dir.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = {
        "status": status,
        "error": error,
        "failed_reports": failed_reports,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "versions": {
            "crystalflow": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_clock_seconds": time.time() - started,
        "artifacts": artifacts,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", newline="\n"
    )
    exit_code = 0 if status == "OK" else 1
    return ExperimentResult(exit_code, out_dir, traj, reports, error)


def _run_for_value(args):
    cfg, output_root = args
    return run_experiment(cfg, output_root)


def _with_param(cfg: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    if param == "tau":
        scheme = dataclasses.replace(cfg.scheme, tau=value)
    elif param == "reg_eps":
        scheme = dataclasses.replace(cfg.scheme, reg_eps=value)
    else:
        raise ValueError(f"unsupported sweep parameter {param!r}; use tau or reg_eps")
    return dataclasses.replace(cfg, scheme=scheme)


def _final_l2_diff(a: Trajectory, b: Trajectory) -> float:
    qw = a.grid.quad_weights()
    d = a.records[-1].u.values - b.records[-1].u.values
    return float(np.sqrt(qw @ (d * d)))


def sweep(
    cfg: ExperimentConfig,
    param: str,
    values,
    output_root=None,
    workers: int = 1,
) -> list[ExperimentResult]:
    """Run the config once per parameter value and summarize convergence.

    Each value gets its own subdirectory <param>_<value>. The summary CSV
    lists, per consecutive pair of runs, the final-time L2 difference and
    the observed order log2 of the ratio of successive differences, which
    is the self-convergence rate when values halve.
    """
    values = [float(v) for v in values]
    root = Path(output_root) if output_root is not None else Path(cfg.output.directory)
    root.mkdir(parents=True, exist_ok=True)

    jobs = []
    for value in values:
        sub_cfg = _with_param(cfg, param, value)
        sub_cfg = dataclasses.replace(
            sub_cfg,
            output=dataclasses.replace(sub_cfg.output, directory=f"{param}_{value:g}"),
        )
        jobs.append((sub_cfg, root))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_for_value, jobs))
    else:
        results = [_run_for_value(job) for job in jobs]

    diffs = []
    for a, b in zip(results[:-1], results[1:]):
        if a.trajectory is not None and b.trajectory is not None:
            diffs.append(_final_l2_diff(a.trajectory, b.trajectory))
        else:
            diffs.append(float("nan"))
    with open(root / "sweep_summary.csv", "w", newline="\n") as fh:
        fh.write(f"{param},final_l2_diff_to_next,observed_order\n")
        for i, value in enumerate(values):
            diff = FLOAT_FMT % diffs[i] if i < len(diffs) else ""
            if 1 <= i < len(diffs) and diffs[i] > 0 and np.isfinite(diffs[i - 1]):
                order = FLOAT_FMT % np.log2(diffs[i - 1] / diffs[i])
            else:
                order = ""
            fh.write(f"{FLOAT_FMT % value},{diff},{order}\n")
    return results


def compare_variants(
    cfg: ExperimentConfig, variants=("sinh", "exp"), output_root=None
) -> dict:
    """Run the same initial data under several nonlinearities side by side.

    Produces a comparison CSV with the exponent sup-norm series of every
    variant aligned on t_k. Per-variant failures are recorded without
    aborting the remaining variants.
    """
    from .nonlinearity import make_variant

    root = Path(output_root) if output_root is not None else Path(cfg.output.directory)
    root.mkdir(parents=True, exist_ok=True)

    results = {}
    for name in variants:
        sub_cfg = dataclasses.replace(
            cfg,
            variant=make_variant(name),
            output=dataclasses.replace(cfg.output, directory=f"variant_{name}"),
        )
        results[name] = run_experiment(sub_cfg, root)

    completed = {k: r for k, r in results.items() if r.trajectory is not None}
    if completed:
        n = min(len(r.trajectory.records) for r in completed.values())
        with open(root / "variant_comparison.csv", "w", newline="\n") as fh:
            names = list(completed)
            header = ["t"]
            for name in names:
                header += [f"w_sup_{name}", f"energy_{name}"]
            fh.write(",".join(header) + "\n")
            for k in range(n):
                t = k * cfg.scheme.tau
                row = [FLOAT_FMT % t]
                for name in names:
                    traj = completed[name].trajectory
                    rec = traj.records[k]
                    qw = traj.grid.quad_weights()
                    w_sup = float(np.abs(rec.w.values).max())
                    energy = float(qw @ traj.variant.antiderivative(rec.w.values))
                    row += [FLOAT_FMT % w_sup, FLOAT_FMT % energy]
                fh.write(",".join(row) + "\n")
    return results


def compare_scaled_sinh(
    cfg: ExperimentConfig, scales, output_root=None
) -> dict:
    """Sweep the normalized scaled-sinh nonlinearity toward its linear limit.

    Runs f(s) = sinh(K s)/K for every K plus the linear reference f(s) = s
    on the same data and writes the final-time L2 distance to the
    reference per K; the distance decreases as K shrinks.
    """
    from .nonlinearity import linear_variant, scaled_sinh_variant

    root = Path(output_root) if output_root is not None else Path(cfg.output.directory)
    root.mkdir(parents=True, exist_ok=True)

    ref_cfg = dataclasses.replace(
        cfg,
        variant=linear_variant(),
        output=dataclasses.replace(cfg.output, directory="variant_linear"),
    )
    reference = run_experiment(ref_cfg, root)

    results = {"linear": reference}
    rows = []
    for k_value in scales:
        sub_cfg = dataclasses.replace(
            cfg,
            variant=scaled_sinh_variant(float(k_value)),
            output=dataclasses.replace(cfg.output, directory=f"variant_scaled_sinh_{k_value:g}"),
        )
        result = run_experiment(sub_cfg, root)
        results[f"scaled_sinh_{k_value:g}"] = result
        if result.trajectory is not None and reference.trajectory is not None:
            rows.append((float(k_value), _final_l2_diff(result.trajectory, reference.trajectory)))
    with open(root / "scaled_sinh_summary.csv", "w", newline="\n") as fh:
        fh.write("K,final_l2_diff_to_linear\n")
        for k_value, diff in rows:
            fh.write(f"{FLOAT_FMT % k_value},{FLOAT_FMT % diff}\n")
    return results
