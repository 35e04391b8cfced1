"""Command-line front end.

Subcommands ``run`` (mode taken from the config file), ``validate``,
``figure1``, ``figure2`` and ``figure3``.  Exit status: 0 when every check
passes, 1 on a failed check or a runtime error, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__, oracle
from ._backend import BACKEND
from .config import Mode, OutputFormat, RunConfig, load_config
from .core import CouplingKind, DomainError, QSDPhaseError
from .ensemble import ConfigurationError, run_ensemble
from .noise import sample_noise
from .phase import (
    bloch_path,
    ensemble_geometric_phase_difference,
    ensemble_geometric_phase_product,
    half_solid_angle_series,
    pancharatnam_series,
    wrap,
)
from .qsd import OOperatorSpec, TrajectoryOverflowError, integrate_trajectory
from .records import ResultRecord, Table, export
from .validation import (
    Check,
    EnsembleSettings,
    check_dissipative,
    check_shift,
    figure1_data,
    figure2_data,
    figure3_data,
    full_suite,
)

log = logging.getLogger("qsdphase")

RAD = "[rad]"
SERIES_COLUMNS = ["t [1/omega]", "gamma_tot [rad]", "gamma_dyn [rad]", "gamma_geo [rad]",
                  "half_solid_angle [rad]", "bloch_x [1]", "bloch_y [1]", "bloch_z [1]", "norm2 [1]"]


def _settings(cfg: RunConfig) -> EnsembleSettings:
    if cfg.checkpoint:
        os.makedirs(cfg.checkpoint, exist_ok=True)
    return EnsembleSettings(n_traj=cfg.n_traj, dt=cfg.dt, root_seed=cfg.root_seed, workers=cfg.workers,
                            n_blocks=cfg.n_blocks, checkpoint_dir=cfg.checkpoint, tol=cfg.tolerances)


def _provenance(cfg: RunConfig) -> dict:
    return {"package_version": __version__, "backend": BACKEND, "root_seed": cfg.root_seed,
            "seed_derivation": "SeedSequence(entropy=root_seed, spawn_key=(trajectory_index,)) -> PCG64",
            "numpy_version": np.__version__}


def _echo(cfg: RunConfig) -> dict:
    d = cfg.echo()
    # execution-only settings do not change results
    for k in ("workers", "checkpoint", "out", "format"):
        d.pop(k, None)
    return d


def _record(cfg: RunConfig, name: str) -> ResultRecord:
    return ResultRecord(name, _echo(cfg), provenance=_provenance(cfg),
                        wall_clock={"workers": cfg.workers})


def _series_table(d) -> Table:
    rows = []
    for j in range(len(d["t"])):
        b = d["bloch"][j]
        rows.append((float(d["t"][j]), float(d["tot"][j]), float(d["dyn"][j]), float(d["geo"][j]),
                     float(d["half_solid_angle"][j]), float(b[0]), float(b[1]), float(b[2]), float(d["norm2"][j])))
    return Table(SERIES_COLUMNS, rows)


def _series_checks(d, cfg: RunConfig, prefix: str):
    dev = float(np.abs(wrap(d["geo"] - d["half_solid_angle"])).max())
    ident = float(np.abs(wrap(d["tot"] - d["dyn"] - d["geo"])).max())
    return [Check(f"{prefix}/solid_angle_law", dev, cfg.tolerances.solid_angle),
            Check(f"{prefix}/decomposition_identity", ident, 1e-10)]


def run_single(cfg: RunConfig) -> ResultRecord:
    model, bath, grid = cfg.model(), cfg.bath(), cfg.grid()
    traj = integrate_trajectory(model, bath, OOperatorSpec.build(model, bath, grid),
                                sample_noise(bath, grid, (cfg.root_seed, 0), cfg.generator))
    tot, dyn, geo = pancharatnam_series(traj)
    path = bloch_path(traj)
    half = half_solid_angle_series(path)
    d = {"t": grid.times, "tot": tot, "dyn": dyn, "geo": geo, "half_solid_angle": geo + wrap(half - geo),
         "bloch": path.points, "norm2": np.sum(np.abs(traj.states) ** 2, axis=1)}
    rec = _record(cfg, "single_trajectory")
    rec.tables["single_trajectory"] = _series_table(d)
    rec.quantities = {"gamma_tot": float(tot[-1]), "gamma_dyn": float(dyn[-1]), "gamma_geo": float(geo[-1]),
                      "gamma_geo_principal": wrap(geo[-1]), "noise_seed": [cfg.root_seed, 0]}
    rec.checks = _series_checks(d, cfg, "single_trajectory")
    return rec


def run_figure1(cfg: RunConfig) -> ResultRecord:
    _, d = figure1_data(cfg.root_seed, cfg.dt)
    rec = _record(cfg, "figure1")
    rec.config.update({"omega": 1.0, "lam": 1.0, "theta": 1.0, "Gamma": 1.0, "gamma": 1.0, "Omega": 0.0,
                       "coupling": "dissipative", "t_final": 2.0 * math.pi})
    rec.tables["figure1"] = _series_table(d)
    rec.quantities = {"gamma_geo": float(d["geo"][-1]), "half_solid_angle": float(d["half_solid_angle"][-1])}
    rec.checks = _series_checks(d, cfg, "figure1")
    return rec


def _analytic(cfg: RunConfig, theta: float):
    if cfg.coupling is CouplingKind.DISSIPATIVE:
        return oracle.dissipative_phases_analytic(theta, cfg.omega, cfg.lam, cfg.bath(), cfg.t_final)
    return oracle.dephasing_phases_analytic(theta, cfg.omega, cfg.lam, cfg.bath(), cfg.t_final)


def run_analytic(cfg: RunConfig) -> ResultRecord:
    rec = _record(cfg, "analytic")
    cols = ["theta [rad]", "gamma_tot [rad]", "gamma_dyn [rad]", "gamma_geo [rad]", "gamma_geo_principal [rad]"]
    rows = []
    for th in cfg.theta_grid():
        tot, dyn = _analytic(cfg, th)
        rows.append((th, tot, dyn, tot - dyn, wrap(tot - dyn)))
    rec.tables["analytic"] = Table(cols, rows)
    return rec


def run_ensemble_mode(cfg: RunConfig) -> ResultRecord:
    model, bath, grid = cfg.model(), cfg.bath(), cfg.grid()
    thetas = cfg.theta_grid()
    ckpt = os.path.join(cfg.checkpoint, "ensemble.npz") if cfg.checkpoint else None
    if ckpt:
        os.makedirs(cfg.checkpoint, exist_ok=True)
    sums = run_ensemble(model, bath, grid, cfg.n_traj, thetas, root_seed=cfg.root_seed,
                        n_blocks=cfg.n_blocks, workers=cfg.workers, kind=cfg.generator, checkpoint=ckpt)
    prod = ensemble_geometric_phase_product(sums)
    diff = ensemble_geometric_phase_difference(sums)
    prod = prod if isinstance(prod, list) else [prod]
    diff = diff if isinstance(diff, list) else [diff]
    rec = _record(cfg, "ensemble")
    cols = ["theta [rad]", "gamma_tot [rad]", "gamma_dyn [rad]", "gamma_geo [rad]", "std_error [rad]",
            "gamma_geo_difference [rad]", "std_error_difference [rad]", "gamma_geo_analytic [rad]"]
    rows = []
    n_sigma = cfg.tolerances.n_sigma
    for th, p, q in zip(thetas, prod, diff):
        tot, dyn = _analytic(cfg, th)
        ref = tot - dyn
        rows.append((th, p.gamma_tot, p.gamma_dyn, p.gamma_geo, p.std_error, q.gamma_geo, q.std_error, ref))
        rec.checks.append(Check(f"ensemble/theta={th:.4f}", abs(wrap(p.gamma_geo - ref)),
                                n_sigma * p.std_error + cfg.tolerances.deterministic, p.gamma_geo, ref, p.std_error))
    rec.tables["ensemble"] = Table(cols, rows)
    rec.quantities = {"n_traj": sums.n_traj, "n_blocks": sums.n_blocks}
    return rec


def _curve_tables(prefix, data, extra=None):
    tables = {}
    for g, curve in data.items():
        cols = ["theta [rad]", "gamma_G_analytic [rad]", "gamma_G_ensemble [rad]", "std_error [rad]"]
        out = [tuple(float(x) for x in r) for r in curve]
        if extra:
            cols, out = extra(g, cols, out)
        tables[f"{prefix}_gamma_{g:g}"] = Table(cols, out)
    return tables


def _estimators(data) -> dict:
    return {f"gamma={g:g}": curve.estimator for g, curve in data.items()}


def run_figure2(cfg: RunConfig) -> ResultRecord:
    s = _settings(cfg)
    data = figure2_data(s, cfg.theta_grid())
    rec = _record(cfg, "figure2")
    rec.config.update({"coupling": "dissipative", "lam": 1.0, "Gamma": 1.0, "Omega": 0.0, "omega": 1.0,
                       "t_final": 2.0 * math.pi, "gammas": list(data)})
    rec.tables = _curve_tables("figure2", data)
    rec.quantities = {"estimator": _estimators(data)}
    rec.checks = check_dissipative(s, data=data)
    return rec


def run_figure3(cfg: RunConfig) -> ResultRecord:
    s = _settings(cfg)
    data = figure3_data(s, cfg.theta_grid())

    def shift_cols(g, cols, rows):
        sh = oracle.dephasing_shift(1.0, 1.0, 1.0, g)
        new = [r + (sh, sh + wrap(oracle.closed_system_phase(r[0]) - r[2] - sh)) for r in rows]
        return cols + ["shift_analytic [rad]", "shift_ensemble [rad]"], new

    rec = _record(cfg, "figure3")
    rec.config.update({"coupling": "dephasing", "lam": 1.0, "Gamma": 1.0, "omega": 1.0, "Omega": 1.0,
                       "t_final": 2.0 * math.pi, "gammas": list(data)})
    rec.tables = _curve_tables("figure3", data, shift_cols)
    rec.quantities = {"estimator": _estimators(data)}
    rec.checks = check_shift(s, data=data)
    return rec


def run_validate(cfg: RunConfig) -> ResultRecord:
    s = _settings(cfg)
    rec = _record(cfg, "validate")
    for group, checks in full_suite(s, cfg.theta_grid()):
        log.info("%s: %d checks, %d failed", group, len(checks), sum(not c.passed for c in checks))
        rec.checks.extend(checks)
    rec.tables["validate_checks"] = Table(
        ["name", "deviation [varies]", "tolerance [varies]", "verdict"],
        [(c.name, float(c.deviation), float(c.tolerance), "pass" if c.passed else "fail") for c in rec.checks])
    return rec


RUNNERS = {
    Mode.SINGLE: run_single,
    Mode.ENSEMBLE: run_ensemble_mode,
    Mode.ANALYTIC: run_analytic,
    Mode.FIGURE1: run_figure1,
    Mode.FIGURE2: run_figure2,
    Mode.FIGURE3: run_figure3,
    Mode.VALIDATE: run_validate,
}


def run(cfg: RunConfig) -> ResultRecord:
    t0 = time.perf_counter()
    rec = RUNNERS[cfg.mode](cfg)
    rec.wall_clock["seconds"] = round(time.perf_counter() - t0, 3)
    return rec


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", metavar="U64", type=lambda v: int(v, 0), help="root seed")
    common.add_argument("--workers", metavar="N", type=int, help="worker processes")
    common.add_argument("--n-traj", metavar="N", type=int, dest="n_traj", help="ensemble size")
    common.add_argument("--dt", metavar="F", type=float, help="time step")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], help="output files to write")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="qsdphase", description="Geometric phases of non-Markovian QSD trajectories.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the mode named in the config file")
    sub.add_parser("validate", parents=[common], help="full oracle / ensemble cross-check suite")
    sub.add_parser("figure1", parents=[common], help="single trajectory with solid-angle overlay")
    sub.add_parser("figure2", parents=[common], help="dissipative theta sweeps")
    sub.add_parser("figure3", parents=[common], help="dephasing theta sweeps")
    return p


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    mode = cfg.mode if args.command == "run" else Mode(args.command)
    return cfg.with_overrides(mode=mode, out=args.out, root_seed=args.seed, workers=args.workers,
                              n_traj=args.n_traj, dt=args.dt,
                              format=OutputFormat(args.format) if args.format else None)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigurationError, DomainError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        rec = run(cfg)
        files = export(rec, cfg.out, cfg.format.value)
    except QSDPhaseError as exc:
        where = f"root_seed={cfg.root_seed}"
        if isinstance(exc, TrajectoryOverflowError) and exc.index is not None:
            where += f", trajectory index={exc.index}"
        print(f"error: {exc} ({where})", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    failed = [c for c in rec.checks if not c.passed]
    for f in files:
        print(f)
    print(f"{rec.name}: {len(rec.checks) - len(failed)}/{len(rec.checks)} checks passed")
    for c in failed:
        print(f"FAIL {c.name}: deviation {c.deviation:.4g} > tolerance {c.tolerance:.4g}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
