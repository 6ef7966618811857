"""Command line interface.

Subcommands: ``validate``, ``evolve``, ``traj``, ``kernel``, ``stationary``,
``example``.  Exit codes are stable for scripting: 0 success, 1 usage or
configuration error, 2 complete-positivity validation failure, 3 engine
failure (diagnostics on stderr).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import (
    ConfigError,
    ModelSource,
    OutputTable,
    RunConfig,
    deterministic_table,
    emit_csv,
    load_config,
    stochastic_table,
)
from .model import validate_model
from .qubit import PRESETS, dephasing_model, h_of_t, preset_params
from .solver import evolve, homogeneity_check, memory_kernel_at, stationary_state
from .stochastic import run_ensemble

_DEFAULT_GRID = np.linspace(0.0, 20.0, 201)
_DEFAULT_STATE = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
_DEFAULT_KERNEL_POINTS = [0.5 + 0.0j, 1.0 + 0.0j, 2.0 + 0.0j, 4.0 + 0.0j]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lre", description="Lindblad rate equation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("validate", "check complete positivity of a model"),
        ("evolve", "deterministic evolution table"),
        ("traj", "Monte Carlo trajectory ensemble table"),
        ("kernel", "Laplace-domain memory kernel samples"),
        ("stationary", "stationary state and homogeneity report"),
        ("example", "closed-form preset table with engine cross-checks"),
    ]:
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("--config", help="path to a JSON run configuration")
        cmd.add_argument("--preset", choices=sorted(PRESETS), help="named preset instead of a config")
        cmd.add_argument("--out", help="output CSV path (default: stdout)")
        cmd.add_argument("--seed", type=int, help="master seed for stochastic runs")
        cmd.add_argument("--n", type=int, help="trajectory count for stochastic runs")
        cmd.add_argument("--u", help="comma-separated Laplace points for the kernel table")
        if name == "example":
            cmd.add_argument("preset_name", nargs="?", choices=sorted(PRESETS), help="preset to tabulate")
    return parser


def _emit(table: OutputTable, path: str | None) -> None:
    if path:
        emit_csv(table, path)
        return
    sys.stdout.write(",".join(table.columns) + "\n")
    for row in table.rows:
        sys.stdout.write(",".join(f"{x:.17g}" for x in row) + "\n")


def _load(args) -> RunConfig | None:
    if args.config:
        return load_config(args.config)
    preset = getattr(args, "preset_name", None) or args.preset
    if preset:
        return RunConfig(
            model=ModelSource("preset", {"name": preset}),
            initial_state=_DEFAULT_STATE.copy(),
            grid=_DEFAULT_GRID.copy(),
            engine="deterministic",
            trajectories=args.n,
            seed=args.seed,
        )
    return None


def _cmd_validate(config: RunConfig, args) -> int:
    rate_model, _ = config.model.build()
    report = validate_model(rate_model, psd_tol=config.psd_tol)
    for blk in report.blocks:
        status = "PSD" if blk.is_psd else "NOT PSD"
        print(
            f"block {blk.tag}: hermiticity residual {blk.hermiticity_residual:.3e}, "
            f"min eigenvalue {blk.min_eigenvalue:+.12e} -> {status}"
        )
    print(f"weights: sum {report.weight_sum:.12f}, nonnegative {report.weights_nonnegative}")
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 2


def _cmd_evolve(config: RunConfig, args) -> int:
    rate_model, _ = config.model.build()
    result = evolve(rate_model, config.initial_state, config.grid, rtol=config.rtol, psd_tol=config.psd_tol)
    _emit(deterministic_table(result), args.out or config.output)
    return 0


def _cmd_traj(config: RunConfig, args) -> int:
    _, walk = config.model.build()
    if walk is None:
        print("traj requires a preset or walk-form model", file=sys.stderr)
        return 1
    n = args.n or config.trajectories
    seed = args.seed if args.seed is not None else config.seed
    if not n or seed is None:
        print("traj requires --n and --seed (or config fields)", file=sys.stderr)
        return 1
    acc = run_ensemble(walk, config.initial_state, config.grid, n, seed, workers=config.workers)
    _emit(stochastic_table(acc), args.out or config.output)
    return 0


def _cmd_kernel(config: RunConfig, args) -> int:
    rate_model, _ = config.model.build()
    points = config.kernel_points or _DEFAULT_KERNEL_POINTS
    if args.u:
        points = [complex(float(x), 0.0) for x in args.u.split(",")]
    d2 = rate_model.dim ** 2
    columns = ["u_re", "u_im", "shifted", "condition"]
    columns += [f"K_{i}{j}_{part}" for i in range(d2) for j in range(d2) for part in ("re", "im")]
    rows = []
    for u in points:
        sample = memory_kernel_at(rate_model, u)
        row = [u.real, u.imag, float(sample.shifted), sample.condition]
        for i in range(d2):
            for j in range(d2):
                row += [sample.kernel[i, j].real, sample.kernel[i, j].imag]
        rows.append(row)
    _emit(OutputTable(columns, np.array(rows)), args.out or config.output)
    return 0


def _cmd_stationary(config: RunConfig, args) -> int:
    rate_model, _ = config.model.build()
    rho_inf = stationary_state(rate_model, config.initial_state)
    report = homogeneity_check(rate_model)
    print(f"stationary state:\n{np.array_str(rho_inf, precision=10, suppress_small=True)}")
    print(f"homogeneity holds: {report.holds}")
    print(f"coherence-sector residual norm: {report.coherence_residual_norm:.6e}")
    for sector, norm in report.sector_norms.items():
        print(f"  sector {sector}: {norm:.6e}")
    if args.out or config.output:
        d = rate_model.dim
        columns = [f"rho_{i}{j}_{part}" for i in range(d) for j in range(d) for part in ("re", "im")]
        row = []
        for i in range(d):
            for j in range(d):
                row += [rho_inf[i, j].real, rho_inf[i, j].imag]
        _emit(OutputTable(columns, np.array([row])), args.out or config.output)
    return 0


def _cmd_example(config: RunConfig, args) -> int:
    name = config.model.preset_name()
    if name is None:
        print("example requires a preset", file=sys.stderr)
        return 1
    params = preset_params(name)
    rate_model, walk = dephasing_model(params)
    grid = config.grid
    closed = np.atleast_1d(h_of_t(params, grid))
    result = evolve(rate_model, config.initial_state, grid, rtol=config.rtol)
    phi0 = config.initial_state[0, 1]
    if phi0 == 0:
        print("example requires an initial state with nonzero coherence", file=sys.stderr)
        return 1
    engine_h = (result.system[:, 0, 1] / phi0).real
    columns = ["t", "h_closed", "h_engine", "abs_residual"]
    data = [grid, closed, engine_h, np.abs(engine_h - closed)]
    n, seed = args.n or config.trajectories, args.seed if args.seed is not None else config.seed
    if n and seed is not None:
        acc = run_ensemble(walk, config.initial_state, grid, n, seed, workers=config.workers)
        mc_h = (acc.system_estimate()[:, 0, 1] / phi0).real
        se_re, _ = acc.system_standard_error()
        columns += ["h_mc", "se_mc", "abs_mc_residual"]
        data += [mc_h, se_re[:, 0, 1] / abs(phi0), np.abs(mc_h - closed)]
    _emit(OutputTable(columns, np.stack(data, axis=1)), args.out or config.output)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "evolve": _cmd_evolve,
    "traj": _cmd_traj,
    "kernel": _cmd_kernel,
    "stationary": _cmd_stationary,
    "example": _cmd_example,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        config = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    if config is None:
        print("a --config file or --preset name is required", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](config, args)
    except (RuntimeError, FloatingPointError, ZeroDivisionError, ValueError) as exc:
        print(f"engine failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
