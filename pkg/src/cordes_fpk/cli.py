"""Command-line front end: ``cordes-fpk <command> --config <path> [--out <dir>]``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .coefficients import CordesConditionError, CordesReport, check_cordes
from .config import COMMANDS, ConfigError, RunConfig, build_coefficients, parse_config
from .fpk_solver import (
    NormalizationError,
    StudyProblem,
    convergence_study,
    effective_matrix,
    solve_dirichlet,
    solve_periodic_fpk,
)
from .grid_fem import PERIODIC, TANGENTIAL, assemble, build_mesh, build_space, cell_quadrature
from .oracle import exact_dirichlet
from .problems import periodic_oracle
from .sparse_linalg import LinearSolveError, dump_coo

log = logging.getLogger("cordes_fpk")

EXIT_OK = 0
EXIT_CORDES = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def format_report(report: CordesReport) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in report.as_dict().items())


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _quad_samples(cfg: RunConfig):
    kind = PERIODIC if cfg.setting == "periodic" else TANGENTIAL
    space = build_space(build_mesh(cfg.dim, cfg.N[0]), kind)
    return cell_quadrature(space, cfg.quad_order).flat_points


def _write_solution(path: Path, solution) -> int:
    mesh = solution.space.mesh
    x = mesh.node_coords
    u = solution.u_eval(x)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(mesh.dim)] + ["u"])
        for row, val in zip(x, u):
            w.writerow([_fmt(float(c)) for c in row] + [_fmt(float(val))])
    return len(x)


def _solve(cfg: RunConfig, coeffs, N: int):
    if cfg.setting == "periodic":
        return solve_periodic_fpk(coeffs, N, cfg.quad_order, cfg.solve_config())
    return solve_dirichlet(coeffs, N, cfg.quad_order, cfg.solve_config(), cfg.N_fine)


def _study_problem(cfg: RunConfig, coeffs) -> StudyProblem:
    if cfg.setting == "periodic":
        oracle = periodic_oracle(coeffs)
    elif "manufactured" in (cfg.f, cfg.F):
        from .coefficients import sine_product

        oracle = exact_dirichlet(sine_product(cfg.dim)[0])
    elif cfg.F == "zero":
        oracle = exact_dirichlet(lambda x: np.zeros(len(x)))
    else:
        oracle = None
    if oracle is None:
        raise ConfigError(f"missing oracle: no reference solution for family {cfg.family} in setting {cfg.setting}")
    return StudyProblem(coeffs, cfg.setting, oracle, cfg.quad_order, solve_config=cfg.solve_config())


def run(cfg: RunConfig, out_dir=".", base_dir=None) -> int:
    """Execute one command; returns the process exit status."""
    if cfg.command is None:
        raise ConfigError("no command given")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coeffs = build_coefficients(cfg, base_dir)

    if cfg.command == "check":
        report = check_cordes(coeffs, cfg.setting, _quad_samples(cfg))
        (out / cfg.report).write_text(format_report(report), encoding="utf-8")
        print(format_report(report), end="")
        return EXIT_OK if report.passed else EXIT_CORDES

    try:
        if cfg.dump_matrix:
            kind = PERIODIC if cfg.setting == "periodic" else TANGENTIAL
            for N in cfg.N:
                space = build_space(build_mesh(cfg.dim, N), kind)
                field_ = coeffs
                if kind == TANGENTIAL and coeffs.F is None:
                    from .fpk_solver import potential_from_source

                    field_ = coeffs.with_source(coeffs.f, potential_from_source(coeffs.f, cfg.dim, cfg.N_fine or N))
                system = assemble(space, field_, quad_order=cfg.quad_order)
                dump_coo(system.saddle()[0], out / f"system_N{N}.coo")

        if cfg.command == "solve":
            sol = _solve(cfg, coeffs, cfg.N[0])
            rows = _write_solution(out / cfg.solution, sol)
            print(f"wrote {rows} rows to {out / cfg.solution}")
            if sol.C_h is not None:
                print(f"C_h={_fmt(sol.C_h)}")
            print(f"integral_u={_fmt(sol.diagnostics['integral_u'])} min_u={_fmt(sol.diagnostics['min_u'])}")
        elif cfg.command == "homogenize":
            if cfg.setting != "periodic":
                raise ConfigError("homogenize requires setting=periodic")
            sol = _solve(cfg, coeffs, cfg.N[0])
            Abar = effective_matrix(coeffs, sol)
            text = "".join(" ".join(_fmt(float(v)) for v in row) + "\n" for row in Abar)
            (out / cfg.matrix).write_text(text, encoding="utf-8")
            print(text, end="")
        elif cfg.command == "study":
            rows = convergence_study(_study_problem(cfg, coeffs), cfg.N)
            with open(out / cfg.study, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["N", "h", "l2_error", "rate"])
                for r in rows:
                    w.writerow([r.N, _fmt(r.h), _fmt(r.l2_error), _fmt(r.rate)])
            for r in rows:
                print(f"N={r.N} h={r.h:.6g} l2_error={r.l2_error:.6e} rate={'' if r.rate is None else f'{r.rate:.4f}'}")
    except CordesConditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(format_report(exc.report), end="", file=sys.stderr)
        return EXIT_CORDES
    except (LinearSolveError, NormalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(prog="cordes-fpk", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="key = value configuration file")
    parser.add_argument("--out", default=".", type=Path, help="output directory (default: current)")
    parser.add_argument("--dump-matrix", action="store_true", help="write the system matrix as 'row col value' lines")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8"), command=args.command)
        if args.dump_matrix and not cfg.dump_matrix:
            from dataclasses import replace

            cfg = replace(cfg, dump_matrix=True)
        return run(cfg, args.out, base_dir=args.config.parent)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
