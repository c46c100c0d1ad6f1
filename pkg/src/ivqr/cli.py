"""Command-line entry point: data ingestion, test subcommands, simulation.

Subcommands: spec-test, spec-test-q, exog-test, add-test, simulate,
select-dims.  Every run writes a JSON report; statistical decisions never
affect the exit code (only configuration or input errors do).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ivqr import __version__
from ivqr.bootstrap import BootstrapConfig, bootstrap_test
from ivqr.estimation import OptimizerSettings, SieveConfig, SieveDesign, fit_ivqr_path
from ivqr.moments import Sample
from ivqr.numerics import make_uniform_grid
from ivqr.selection import minmax_select
from ivqr.simulation import DgpSpec, TestConfig, run_monte_carlo, worker_count
from ivqr.testing import TestResult, addit_test, exog_test, spec_test, spec_test_at


@dataclass
class ColumnMapping:
    y: str
    z: list[str]
    w: list[str]
    d: list[str] | None = None


@dataclass
class RunConfig:
    """One CLI invocation: input, columns, test kind, dimensions, output."""

    command: str
    input_path: str | None = None
    mapping: ColumnMapping | None = None
    q: float = 0.5
    grid_n: int = 20
    k_n: int | None = None
    l_n: int | None = None
    m_n: int | None = None
    auto_dims: bool = False
    alpha: float = 0.05
    bootstrap_b: int | None = None
    sigma_eps: float = 0.5
    seed: int = 0
    out_dir: str = "."
    groups: list[list[str]] | None = None
    emit_curves: bool = False
    # simulate-only settings
    design: str | None = None
    n: int = 500
    reps: int = 100
    zeta: float = 0.7
    theta: float | None = None
    workers: int | None = None


def ingest_csv(path: str, mapping: ColumnMapping) -> tuple[Sample, int]:
    """Read a header CSV into a Sample; rows with unusable mapped cells drop.

    Returns the sample and the number of dropped rows.
    """
    needed = [mapping.y, *mapping.z, *mapping.w, *(mapping.d or [])]
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in needed if c not in header]
        if missing:
            raise ValueError(f"missing column(s) in {path}: {', '.join(missing)}")
        rows = []
        dropped = 0
        for record in reader:
            try:
                values = [float(record[c]) for c in needed]
            except (TypeError, ValueError):
                dropped += 1
                continue
            if not all(np.isfinite(values)):
                dropped += 1
                continue
            rows.append(values)
    if not rows:
        raise ValueError(f"no usable rows in {path}")
    data = np.asarray(rows)
    idx = 1
    z = data[:, idx : idx + len(mapping.z)]
    idx += len(mapping.z)
    w = data[:, idx : idx + len(mapping.w)]
    idx += len(mapping.w)
    d = data[:, idx:] if mapping.d else None
    return Sample(y=data[:, 0], z=z, w=w, d=d), dropped


def _result_payload(result: TestResult, extra: dict) -> dict:
    payload = {
        "test": result.name,
        "raw": result.raw,
        "standardized": result.standardized,
        "alpha": result.alpha,
        "critical_value": result.critical_value,
        "reject": result.reject,
        "critical_source": result.critical_source,
        "dims": {"k_n": result.dims[0], "l_n": result.dims[1], "m_n": result.dims[2]},
        "grid": {
            "points": result.grid.points.tolist(),
            "weights": result.grid.weights.tolist(),
        },
        "q": result.q,
        "details": result.details,
        "versions": {
            "ivqr": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    payload.update(extra)
    return payload


def write_report(payload: dict, out_dir: str, name: str = "report.json") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def _emit_curves(sample: Sample, config: SieveConfig, out_dir: str) -> list[str]:
    """Per-quantile fitted structural curves on a regressor grid (CSV)."""
    design = SieveDesign(sample, config)
    fits = fit_ivqr_path(sample, config, design=design)
    z = sample.z[:, 0]
    z_grid = np.linspace(float(z.min()), float(z.max()), 101)
    paths = []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fit in fits:
        values = design.evaluate_z(z_grid) @ design.structural_part(fit.coefficients)
        path = out / f"curve_q{fit.q:.4f}.csv"
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["z", "phi_hat"])
            writer.writerows(zip(z_grid.tolist(), values.tolist()))
        paths.append(str(path))
    return paths


def _resolve_dims(config: RunConfig, sample: Sample) -> tuple[int, int, int, dict]:
    """Explicit dims, or min-max selection when --auto-dims is set."""
    info: dict = {}
    if config.auto_dims:
        n = sample.n
        ks = range(1, int(np.ceil(n**0.25)) + 1)
        ms = range(1, int(np.ceil(n**0.5)) + 1)
        kind = "exog" if config.command == "exog-test" else (
            "spec_q" if config.command == "spec-test-q" else "spec"
        )
        sel = minmax_select(
            sample, kind, ks, ms, config.alpha, q=config.q,
            grid=make_uniform_grid(config.grid_n),
            optimizer=OptimizerSettings(seed=config.seed),
        )
        info["selection"] = {
            "chosen_k": sel.chosen_k,
            "chosen_l": sel.chosen_l,
            "chosen_m": sel.chosen_m,
            "table": {f"{k},{m}": v for (k, m), v in sel.table.items()},
        }
        return sel.chosen_k, sel.chosen_l, sel.chosen_m, info
    if config.k_n is None or config.m_n is None:
        raise ValueError("either --auto-dims or both --kn and --mn are required")
    k = config.k_n
    l = config.l_n if config.l_n is not None else 2 * k
    m = config.m_n
    if not 1 <= k <= l <= m:
        raise ValueError("dimensions must satisfy 1 <= k_n <= l_n <= m_n")
    return k, l, m, info


def _sieve_config(
    config: RunConfig, k: int, l: int, m: int, groups=None, include_d: bool = False
) -> SieveConfig:
    return SieveConfig(
        k_n=k,
        l_n=l,
        m_n=m,
        grid=make_uniform_grid(config.grid_n),
        optimizer=OptimizerSettings(seed=config.seed),
        additive_groups=groups,
        include_d_linear=include_d,
    )


def _column_groups(config: RunConfig) -> tuple[tuple[int, ...], ...]:
    by_name = {name: i for i, name in enumerate(config.mapping.z)}
    if config.groups:
        resolved = []
        for group in config.groups:
            unknown = [g for g in group if g not in by_name]
            if unknown:
                raise ValueError(f"--group references unknown z column(s): {unknown}")
            resolved.append(tuple(by_name[g] for g in group))
        return tuple(resolved)
    return tuple((i,) for i in range(len(by_name)))


def run(config: RunConfig) -> int:
    """Execute one parsed CLI invocation; 0 unless the configuration fails."""
    try:
        if config.command == "simulate":
            return _run_simulate(config)
        sample, dropped = ingest_csv(config.input_path, config.mapping)
        if config.command == "select-dims":
            return _run_select(config, sample, dropped)
        k, l, m, info = _resolve_dims(config, sample)
        has_d = sample.d is not None
        sieve = _sieve_config(config, k, l, m, include_d=has_d)
        if config.command == "spec-test":
            if config.bootstrap_b:
                boot = BootstrapConfig(
                    b=config.bootstrap_b, sigma_eps=config.sigma_eps, seed=config.seed
                )
                result = bootstrap_test(sample, sieve, boot, config.alpha)
            else:
                result = spec_test(sample, sieve, config.alpha)
        elif config.command == "spec-test-q":
            result = spec_test_at(sample, config.q, sieve, config.alpha)
        elif config.command == "exog-test":
            result = exog_test(
                sample, config.q, k, m, config.alpha,
                include_d_linear=sample.d is not None,
            )
        elif config.command == "add-test":
            sieve = _sieve_config(
                config, k, l, m, groups=_column_groups(config), include_d=has_d
            )
            result = addit_test(sample, config.q, sieve, config.alpha)
        else:
            raise ValueError(f"unknown command {config.command!r}")
        extra = {"n": sample.n, "dropped_rows": dropped, "seed": config.seed}
        extra.update(info)
        if config.emit_curves and config.command in ("spec-test", "spec-test-q"):
            extra["curve_files"] = _emit_curves(sample, sieve, config.out_dir)
        path = write_report(_result_payload(result, extra), config.out_dir)
        print(f"{result.name}: standardized={result.standardized:.4f} "
              f"critical={result.critical_value:.4f} reject={result.reject}")
        print(f"report written to {path}")
        return 0
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def _run_select(config: RunConfig, sample: Sample, dropped: int) -> int:
    n = sample.n
    ks = range(1, int(np.ceil(n**0.25)) + 1)
    ms = range(1, int(np.ceil(n**0.5)) + 1)
    sel = minmax_select(
        sample, "spec", ks, ms, config.alpha,
        grid=make_uniform_grid(config.grid_n),
        optimizer=OptimizerSettings(seed=config.seed),
    )
    payload = {
        "test": "select-dims",
        "n": n,
        "dropped_rows": dropped,
        "chosen_k": sel.chosen_k,
        "chosen_l": sel.chosen_l,
        "chosen_m": sel.chosen_m,
        "statistic_at_choice": sel.statistic_at_choice,
        "admissible_k_max": max(k for k, _ in sel.table),
        "admissible_m_max": max(m for _, m in sel.table),
        "table": {f"{k},{m}": v for (k, m), v in sel.table.items()},
        "seed": config.seed,
    }
    path = write_report(payload, config.out_dir)
    print(f"select-dims: k={sel.chosen_k} l={sel.chosen_l} m={sel.chosen_m}")
    print(f"report written to {path}")
    return 0


def _run_simulate(config: RunConfig) -> int:
    if not config.design:
        raise ValueError("--design is required for simulate")
    boot = None
    if config.bootstrap_b:
        boot = BootstrapConfig(
            b=config.bootstrap_b, sigma_eps=config.sigma_eps, seed=config.seed
        )
    kind = "exog" if config.design == "exog_42" else "spec"
    tc = TestConfig(
        kind=kind,
        k_n=config.k_n if config.k_n is not None else 4,
        l_n=config.l_n,
        m_n=config.m_n if config.m_n is not None else 20,
        grid_n=config.grid_n,
        q=config.q,
        bootstrap=boot,
        optimizer=OptimizerSettings(seed=config.seed),
    )
    spec = DgpSpec(
        design=config.design, n=config.n, zeta=config.zeta,
        theta=config.theta, seed=config.seed,
    )
    report = run_monte_carlo(spec, tc, config.reps, config.alpha, workers=config.workers)
    payload = {
        "test": "simulate",
        "design": spec.design,
        "n": spec.n,
        "zeta": spec.zeta,
        "theta": spec.theta,
        "replications": report.replications,
        "rejections": report.rejections,
        "frequency": report.frequency,
        "std_error": report.std_error,
        "alpha": report.alpha,
        "kind": tc.kind,
        "dims": {"k_n": tc.k_n, "l_n": tc.l_n, "m_n": tc.m_n},
        "bootstrap_b": config.bootstrap_b,
        "seed": config.seed,
        "wall_time_s": report.wall_time,
        "workers": worker_count(config.workers),
    }
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_report(payload, config.out_dir, name="mc_report.json")
    with open(out / "mc_table.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["design", "n", "zeta", "theta", "k_n", "m_n",
                         "replications", "frequency", "std_error"])
        writer.writerow([spec.design, spec.n, spec.zeta, spec.theta, tc.k_n,
                         tc.m_n, report.replications, report.frequency,
                         report.std_error])
    print(f"simulate {spec.design}: frequency={report.frequency:.4f} "
          f"(se={report.std_error:.4f}, reps={report.replications})")
    print(f"report written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivqr",
        description="Specification, exogeneity and additivity tests for "
                    "nonparametric instrumental quantile regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(p):
        p.add_argument("--input", required=True, help="CSV file with a header row")
        p.add_argument("--y", required=True, help="outcome column")
        p.add_argument("--z", action="append", required=True, help="regressor column (repeatable)")
        p.add_argument("--w", action="append", required=True, help="instrument column (repeatable)")
        p.add_argument("--d", action="append", help="exogenous linear covariate column (repeatable)")

    def add_common_args(p, with_dims=True):
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--grid-n", type=int, default=20, help="quantile grid size N")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")
        if with_dims:
            p.add_argument("--kn", type=int)
            p.add_argument("--ln", type=int, help="defaults to 2*kn")
            p.add_argument("--mn", type=int)
            p.add_argument("--auto-dims", action="store_true",
                           help="choose dimensions by the min-max principle")

    for name, help_text in (
        ("spec-test", "integrated specification test over the quantile grid"),
        ("spec-test-q", "specification test at one quantile"),
        ("exog-test", "exogeneity test at one quantile"),
        ("add-test", "additivity test at one quantile"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_data_args(p)
        add_common_args(p)
        if name != "spec-test":
            p.add_argument("--q", type=float, default=0.5)
        if name == "spec-test":
            p.add_argument("--bootstrap-b", type=int,
                           help="bootstrap replications for the critical value")
            p.add_argument("--sigma-eps", type=float, default=0.5)
        if name == "add-test":
            p.add_argument("--group", action="append",
                           help="comma-separated z columns forming one additive group (repeatable)")
        if name in ("spec-test", "spec-test-q"):
            p.add_argument("--emit-curves", action="store_true",
                           help="write per-quantile fitted curve CSVs")

    p = sub.add_parser("simulate", help="Monte Carlo rejection frequencies")
    p.add_argument("--design", required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--zeta", type=float, default=0.7)
    p.add_argument("--theta", type=float)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--bootstrap-b", type=int)
    p.add_argument("--sigma-eps", type=float, default=0.5)
    p.add_argument("--workers", type=int)
    add_common_args(p)

    p = sub.add_parser("select-dims", help="min-max dimension selection report")
    add_data_args(p)
    add_common_args(p, with_dims=False)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    mapping = None
    if getattr(args, "input", None):
        mapping = ColumnMapping(
            y=args.y, z=list(args.z), w=list(args.w),
            d=list(args.d) if getattr(args, "d", None) else None,
        )
    groups = None
    if getattr(args, "group", None):
        groups = [g.split(",") for g in args.group]
    return RunConfig(
        command=args.command,
        input_path=getattr(args, "input", None),
        mapping=mapping,
        q=getattr(args, "q", 0.5),
        grid_n=args.grid_n,
        k_n=getattr(args, "kn", None),
        l_n=getattr(args, "ln", None),
        m_n=getattr(args, "mn", None),
        auto_dims=getattr(args, "auto_dims", False),
        alpha=args.alpha,
        bootstrap_b=getattr(args, "bootstrap_b", None),
        sigma_eps=getattr(args, "sigma_eps", 0.5),
        seed=args.seed,
        out_dir=args.out,
        groups=groups,
        emit_curves=getattr(args, "emit_curves", False),
        design=getattr(args, "design", None),
        n=getattr(args, "n", 500),
        reps=getattr(args, "reps", 100),
        zeta=getattr(args, "zeta", 0.7),
        theta=getattr(args, "theta", None),
        workers=getattr(args, "workers", None),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
