"""Command-line front end.

Subcommands: sample, spectrum, locallaw, kolmogorov, rigidity, deloc,
edge, truncate-report, classify-config, selftest.  Configuration comes
from a TOML file ([ensemble], [domain], [run], [constants] tables) with
CLI overrides for seed, output directory, thread count, and format.

Exit codes: 0 success, 1 configuration error, 2 runtime/eigensolver
failure, 3 identity-audit failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace as _dc_replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version dependent
    import tomli as tomllib

from . import __version__, ensembles, experiments, io, plots, semicircle, spectral, truncation
from .experiments import AuditError, Constants, ExperimentConfig
from .spectral import EigensolverError

_EXIT_CONFIG = 1
_EXIT_RUNTIME = 2
_EXIT_AUDIT = 3


class ConfigError(ValueError):
    pass


def _law_from_table(tbl: dict) -> ensembles.EntryLaw:
    variant = tbl.get("variant", "rademacher")
    try:
        if variant == "gaussian":
            return ensembles.gaussian()
        if variant == "rademacher":
            return ensembles.rademacher()
        if variant == "student-t":
            return ensembles.student_t(float(tbl["nu"]))
        if variant == "symmetric-pareto":
            return ensembles.symmetric_pareto(float(tbl["alpha"]))
        if variant == "atoms":
            return ensembles.discrete_atoms(tbl["atoms"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid ensemble table: {exc}") from exc
    raise ConfigError(f"unknown ensemble variant {variant!r}")


def load_config(
    path: str | None, overrides: argparse.Namespace, clamp_p: bool = False
) -> tuple[ExperimentConfig, dict]:
    """Parse the TOML config (or defaults) and apply CLI overrides.

    ``clamp_p`` forces p_list to (1,) for commands that never estimate
    gap moments, so the theorem's moment-order cap cannot reject a config
    whose p values those commands would not use anyway.
    """
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
    ens = raw.get("ensemble", {})
    dom = raw.get("domain", {})
    run = raw.get("run", {})
    cst = raw.get("constants", {})
    law = _law_from_table(ens)
    p_list = tuple(int(p) for p in run.get("p_list", (2,)))
    if clamp_p:
        p_list = (1,)
    constants = Constants(
        A_0=float(cst.get("A_0", 8.0)),
        A_1=float(cst.get("A_1", 1.0)),
        log_base=float(cst.get("log_base", 10.0)),
        chernoff_c=float(cst.get("chernoff_c", 1.0)),
        D_bound=float(cst.get("D_bound", 4.0)),
    )
    try:
        config = ExperimentConfig(
            ensemble=law,
            n_grid=tuple(int(n) for n in run.get("n_grid", (64, 128))),
            u_list=tuple(float(u) for u in dom.get("u_list", (0.0,))),
            V=float(dom.get("V", 2.0)),
            alpha=int(dom.get("alpha", 2)),
            v_mode=str(dom.get("v_mode", "v0")),
            v_list=tuple(float(v) for v in dom.get("v_list", ())),
            points_per_decade=int(dom.get("points_per_decade", 8)),
            p_list=p_list,
            trials=int(run.get("trials", 50)),
            base_seed=int(run.get("base_seed", 1)),
            pipeline=str(run.get("pipeline", "raw")),
            threads=int(run.get("threads", 1)),
            constants=constants,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if overrides.seed is not None:
        config = _dc_replace(config, base_seed=int(overrides.seed))
    if overrides.threads is not None:
        config = _dc_replace(config, threads=int(overrides.threads))
    return config, raw


def _config_dict(config: ExperimentConfig) -> dict:
    law = config.ensemble
    return {
        "ensemble": {
            "variant": law.variant,
            "nu": law.nu,
            "alpha": law.alpha,
            "atoms": law.atoms,
        },
        "domain": {
            "u_list": list(config.u_list),
            "V": config.V,
            "alpha": config.alpha,
            "v_mode": config.v_mode,
            "v_list": list(config.v_list),
            "points_per_decade": config.points_per_decade,
        },
        "run": {
            "n_grid": list(config.n_grid),
            "p_list": list(config.p_list),
            "trials": config.trials,
            "base_seed": config.base_seed,
            "pipeline": config.pipeline,
        },
        "constants": {
            "A_0": config.constants.A_0,
            "A_1": config.constants.A_1,
            "log_base": config.constants.log_base,
            "chernoff_c": config.constants.chernoff_c,
            "D_bound": config.constants.D_bound,
        },
    }


def _manifest(
    command: str, config: ExperimentConfig, outputs, refs, audits, started_at: str | None = None
) -> io.RunManifest:
    now = datetime.now(timezone.utc).isoformat()
    return io.RunManifest(
        command=command,
        config_digest=io.canonical_digest(_config_dict(config)),
        tool_version=__version__,
        base_seed=config.base_seed,
        started_at=started_at or now,
        finished_at=now,
        record_refs=list(refs),
        audit_summary=audits,
        outputs=[str(o) for o in outputs],
    )


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_table(table: io.ResultTable, out: Path, stem: str, fmt: str) -> Path:
    path = out / f"{stem}.{fmt}"
    if fmt == "csv":
        table.write_csv(path)
    else:
        table.write_json(path)
    return path


def _audit_policy(config: ExperimentConfig) -> dict:
    cells = len(config.cells())
    full = sum(
        config.trials if n <= config.audit_max_n else 1
        for n, _, _, _ in config.cells()
    )
    return {
        "policy": f"full resolvent audit per trial for n <= {config.audit_max_n}, "
        "else on the first trial of each cell; eigenvalue-level trace and "
        "Ward identities on every trial",
        "cells": cells,
        "light_audits": cells * config.trials,
        "full_audits": full,
    }


def cmd_sample(args, out: Path, fmt: str) -> int:
    started = _utcnow()
    config, _ = load_config(args.config, args, clamp_p=True)
    n = args.n or config.n_grid[0]
    sample = ensembles.sample_wigner(config.ensemble, n, config.base_seed)
    path = out / f"sample_{n}.csv"
    with open(path, "w") as fh:
        for row in sample.entries:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    manifest = _manifest("sample", config, [path], [f"matrix n={n}"], {}, started)
    manifest.write(out / "manifest.json")
    print(f"wrote {path}")
    return 0


def cmd_spectrum(args, out: Path, fmt: str) -> int:
    started = _utcnow()
    config, _ = load_config(args.config, args, clamp_p=True)
    n = args.n or config.n_grid[0]
    sample = ensembles.sample_wigner(config.ensemble, n, config.base_seed)
    spec = spectral.eigendecompose(sample.scaled)
    cdf = spectral.esd(spec)
    rows = [
        {
            "j": j + 1,
            "eigenvalue": float(spec.eigenvalues[j]),
            "esd": float(cdf(spec.eigenvalues[j])),
            "semicircle_cdf": float(semicircle.cdf(spec.eigenvalues[j])),
        }
        for j in range(n)
    ]
    table = io.ResultTable(
        columns=(("j", "int"), ("eigenvalue", "float"), ("esd", "float"), ("semicircle_cdf", "float")),
        rows=rows,
    )
    tpath = _write_table(table, out, f"spectrum_{n}", fmt)
    fpath = plots.spectrum_figure(
        spec.eigenvalues, out / f"spectrum_{n}.png", f"{config.ensemble.label}, n={n}"
    )
    manifest = _manifest("spectrum", config, [tpath, fpath], [f"spectrum n={n}"], {}, started)
    manifest.write(out / "manifest.json")
    print(f"wrote {tpath} and {fpath}")
    return 0


def _fit_outputs(fit, out: Path, stem: str, xlabel: str, ylabel: str, title: str):
    paths = io.write_fit_data(fit, out / stem, xlabel=xlabel)
    paths.append(plots.fit_figure(fit, out / f"{stem}.png", xlabel, ylabel, title))
    return paths


def cmd_locallaw(args, out: Path, fmt: str) -> int:
    started = _utcnow()
    config, _ = load_config(args.config, args)
    records = experiments.run_local_law(config)
    table = io.experiment_table(records)
    outputs = [_write_table(table, out, "locallaw_results", fmt)]
    refs = [f"{r.law} n={r.n} u={r.u} v={r.v} p={r.p}" for r in records]
    fit_line = ""
    try:
        fit = experiments.fit_scaling(records, mode="nv_bulk")
        outputs += _fit_outputs(
            fit, out, "locallaw_fit", "n*v", "E^(1/p)|gap|^p",
            f"{config.ensemble.label} local-law scaling",
        )
        fit_line = f"slope {fit.slope:+.4f} (stderr {fit.slope_stderr:.4f}, r2 {fit.r_squared:.4f})"
    except experiments.DegenerateFitError:
        fit_line = "fit skipped (needs >= 3 cells with predictor spread)"
    manifest = _manifest("locallaw", config, outputs, refs, _audit_policy(config), started)
    manifest.write(out / "manifest.json")
    print(f"{len(records)} cells; {fit_line}")
    return 0


def cmd_edge(args, out: Path, fmt: str) -> int:
    started = _utcnow()
    config, _ = load_config(args.config, args)
    records, fit = experiments.edge_imag_experiment(config)
    table = io.experiment_table(records)
    outputs = [_write_table(table, out, "edge_results", fmt)]
    outputs += _fit_outputs(
        fit, out, "edge_fit", "n*(kappa+v)", "E^(1/p)|Im gap|^p",
        f"{config.ensemble.label} edge scaling",
    )
    refs = [f"{r.law} n={r.n} u={r.u} v={r.v} p={r.p}" for r in records]
    manifest = _manifest("edge", config, outputs, refs, _audit_policy(config), started)
    manifest.write(out / "manifest.json")
    print(f"{len(records)} cells; slope {fit.slope:+.4f}")
    return 0


def _stat_command(name, runner, ylabel):
    def cmd(args, out: Path, fmt: str) -> int:
        started = _utcnow()
        config, _ = load_config(args.config, args, clamp_p=True)
        records = runner(config)
        table = io.stat_table(records)
        outputs = [_write_table(table, out, f"{name}_results", fmt)]
        ns = [r.n for r in records]
        meds = [r.median for r in records]
        outputs.append(
            plots.trend_figure(ns, meds, out / f"{name}_trend.png", ylabel,
                               f"{config.ensemble.label} {name} trend")
        )
        fit_line = ""
        if len(records) >= 3:
            fit = experiments.fit_powerlaw(ns, meds)
            outputs += io.write_fit_data(fit, out / f"{name}_fit", xlabel="n")
            fit_line = f"; slope {fit.slope:+.4f}"
        manifest = _manifest(name, config, outputs, [f"n={n}" for n in ns], {}, started)
        manifest.write(out / "manifest.json")
        print(f"{name}: medians {dict(zip(ns, [round(m, 6) for m in meds]))}{fit_line}")
        return 0

    return cmd


def cmd_truncate_report(args, out: Path, fmt: str) -> int:
    started = _utcnow()
    config, _ = load_config(args.config, args, clamp_p=True)
    n = args.n or config.n_grid[0]
    cst = config.constants
    sample = ensembles.sample_wigner(config.ensemble, n, config.base_seed)
    _, _, report = truncation.center_and_renormalize(sample, cst.R_over(n))
    table = io.ResultTable(
        columns=(
            ("n", "int"),
            ("R_over", "float"),
            ("threshold", "float"),
            ("altered_count", "int"),
            ("sigma_sq", "float"),
            ("mean_shift", "float"),
        ),
        rows=[report.__dict__],
    )
    tpath = _write_table(table, out, f"truncate_report_{n}", fmt)
    manifest = _manifest("truncate-report", config, [tpath], [f"n={n}"], {}, started)
    manifest.write(out / "manifest.json")
    print(f"altered {report.altered_count} cells; sigma^2 = {report.sigma_sq:.6f}")
    return 0


def cmd_classify_config(args, out: Path, fmt: str) -> int:
    started = _utcnow()
    config, _ = load_config(args.config, args, clamp_p=True)
    n = args.n or config.n_grid[0]
    cst = config.constants
    sample = ensembles.sample_wigner(config.ensemble, n, config.base_seed)
    cfg = truncation.build_configuration(
        sample, cst.R_under(n), cst.r_cluster(n), cst.K_deviant(n)
    )
    verdict = truncation.classify(cfg)
    p_rconn, p_deviant = truncation.inadmissibility_probability_bounds(
        n, cfg.r, cst.R_under(n), cfg.K, cfg.p_n, cst.chernoff_c
    )
    payload = {
        "n": n,
        "R_under": cfg.R_under,
        "r": cfg.r,
        "K": cfg.K,
        "p_n": cfg.p_n,
        "deviant_count": len(verdict.deviant_set),
        "deviant_threshold": verdict.deviant_threshold,
        "largest_cluster": verdict.r_of_L,
        "deviant_inadmissible": verdict.deviant_inadmissible,
        "r_admissible": verdict.r_admissible,
        "bound_cluster_inadmissible": p_rconn,
        "bound_deviant_inadmissible": p_deviant,
    }
    path = out / f"classify_{n}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    manifest = _manifest("classify-config", config, [path], [f"n={n}"], {}, started)
    manifest.write(out / "manifest.json")
    print(f"r-admissible: {verdict.r_admissible} (deviant {len(verdict.deviant_set)}, "
          f"largest cluster {verdict.r_of_L})")
    return 0


def cmd_selftest(args, out: Path, fmt: str) -> int:
    config, _ = load_config(args.config, args, clamp_p=True)
    rng_seed = config.base_seed
    checked = {"schur": 0, "gap_identity": 0, "trace_identity": 0, "ward_rows": 0,
               "trace_bound": 0, "orthonormality": 0}
    cases = 0
    for n in (8, 16, 32):
        for trial in range(8):
            seed = experiments._rng.derive_key(rng_seed, n, trial, 0)
            sample = ensembles.sample_wigner(config.ensemble, n, seed)
            W = sample.scaled
            u = ((seed >> 8) % 300 - 150) / 100.0  # deterministic u in [-1.5, 1.5)
            v = 0.1 + ((seed >> 20) % 100) / 100.0
            z = complex(u, v)
            law_sample = spectral.local_law_sample(W, z)
            if law_sample.identity_residual > 1e-8:
                raise AuditError(f"gap identity residual {law_sample.identity_residual:.2e}")
            checked["gap_identity"] += 1
            j = trial % n
            terms = spectral.epsilon_decomposition(W, j, z)
            if terms.residual > 1e-8:
                raise AuditError(f"Schur residual {terms.residual:.2e}")
            checked["schur"] += 1
            if abs(terms.eps4) > 1.0 / (n * v) + 1e-12:
                raise AuditError("trace-increment bound violated")
            checked["trace_bound"] += 1
            ident = spectral.trace_difference_identity(W, j, z)
            if abs(ident.lhs - ident.via_quadratic) > 1e-8:
                raise AuditError("trace identity (quadratic form) failed")
            if abs(ident.lhs - ident.via_derivative) > 1e-4:
                raise AuditError("trace identity (derivative form) failed")
            checked["trace_identity"] += 1
            ward = spectral.ward_check(spectral.resolvent(W, z))
            if ward.max_row_gap > 1e-10:
                raise AuditError(f"Ward row gap {ward.max_row_gap:.2e}")
            checked["ward_rows"] += 1
            spec = spectral.eigendecompose(W)
            gram = spec.vectors.T @ spec.vectors
            if np.max(np.abs(gram - np.eye(n))) > 1e-10:
                raise AuditError("eigenvector orthonormality failed")
            checked["orthonormality"] += 1
            cases += 1
    for name, count in sorted(checked.items()):
        print(f"{name}: {count} checks passed")
    print(f"selftest OK ({cases} matrix/point cases)")
    return 0


def _add_global_flags(parser: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    default_out = os.environ.get("WIGNERLAB_OUT", "wignerlab-out")
    parser.add_argument("--config", default=d, help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=d, help="override base seed")
    parser.add_argument(
        "--out", default=d if suppress else default_out,
        help="output directory (default from WIGNERLAB_OUT)",
    )
    parser.add_argument("--threads", type=int, default=d, help="worker threads for trials")
    parser.add_argument(
        "--format", choices=("csv", "json"), default=d if suppress else "csv"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wignerlab",
        description="Spectral statistics of Wigner matrices: analytics, "
        "identity checks, and Monte Carlo scaling experiments.",
    )
    _add_global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text, needs_n in (
        ("sample", "emit one raw symmetric matrix", True),
        ("spectrum", "eigenvalues and empirical spectral distribution", True),
        ("locallaw", "gap-moment grid plus nv scaling fit", False),
        ("kolmogorov", "sup-distance between ESD and semicircle CDF", False),
        ("rigidity", "eigenvalue deviations from classical locations", False),
        ("deloc", "largest eigenvector coordinates", False),
        ("edge", "imaginary-part moments outside the bulk", False),
        ("truncate-report", "entry truncation and renormalization summary", True),
        ("classify-config", "small/large configuration admissibility", True),
        ("selftest", "run the exact-identity suite", False),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_global_flags(p, suppress=True)
        if needs_n:
            p.add_argument("--n", type=int, help="matrix size (default: first of n_grid)")
        else:
            p.set_defaults(n=None)
    return parser


_COMMANDS = {
    "sample": cmd_sample,
    "spectrum": cmd_spectrum,
    "locallaw": cmd_locallaw,
    "kolmogorov": _stat_command("kolmogorov", experiments.run_kolmogorov, "median sup-distance"),
    "rigidity": _stat_command("rigidity", experiments.run_rigidity, "median bulk-max deviation"),
    "deloc": _stat_command("deloc", experiments.run_delocalization, "median max|u|/sqrt(log n/n)"),
    "edge": cmd_edge,
    "truncate-report": cmd_truncate_report,
    "classify-config": cmd_classify_config,
    "selftest": cmd_selftest,
}


def cli_dispatch(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args, out, args.format)
    except AuditError as exc:
        print(f"identity-audit failure: {exc}", file=sys.stderr)
        return _EXIT_AUDIT
    except EigensolverError as exc:
        print(f"eigensolver failure: {exc}", file=sys.stderr)
        return _EXIT_RUNTIME
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (RuntimeError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return _EXIT_RUNTIME


def main():  # pragma: no cover - thin wrapper
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":  # pragma: no cover
    main()
