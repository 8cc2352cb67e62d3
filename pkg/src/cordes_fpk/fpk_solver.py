"""Two-step solvers: Galerkin solve for rho_h, then reconstruction of the density u_h."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import CoefficientField, CordesConditionError, CordesReport, check_cordes, eval_gamma
from .grid_fem import (
    PERIODIC,
    TANGENTIAL,
    FeSpace,
    assemble,
    build_mesh,
    build_space,
    cell_quadrature,
    check_alignment,
    divergence_at,
    gauss_rule,
    shape_eval,
)
from .grid_fem.mesh import Mesh
from .oracle import OracleSolution, l2_error
from .sparse_linalg import SolveConfig, SolveStats, solve_linear

log = logging.getLogger(__name__)


class NormalizationError(RuntimeError):
    """The discrete normalization integral is not positive (under-resolved problem)."""

    def __init__(self, integral: float, diagnostics: dict):
        self.integral = integral
        self.diagnostics = diagnostics
        super().__init__(f"normalization integral (gamma, 1 - div rho_h) = {integral:.6g} is not positive")


@dataclass(frozen=True)
class FpkSolution:
    """Discrete rho_h together with the reconstructed density.

    Periodic: u_h = C_h gamma (1 - div rho_h). Dirichlet: u_h = gamma (-div rho_h).
    """

    setting: str
    space: FeSpace = field(repr=False)
    coeffs: CoefficientField = field(repr=False)
    rho_coeffs: np.ndarray = field(repr=False)
    C_h: Optional[float]
    quad_order: int
    report: CordesReport = field(repr=False)
    stats: SolveStats = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def N(self) -> int:
        return self.space.mesh.N

    def rho(self, x) -> np.ndarray:
        return self.space.evaluate(self.rho_coeffs, x)[0]

    def divergence(self, x) -> np.ndarray:
        _, J = self.space.evaluate(self.rho_coeffs, x)
        return np.trace(J, axis1=1, axis2=2)

    def u_eval(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = eval_gamma(self.coeffs, x)
        div = self.divergence(x)
        if self.setting == "periodic":
            return self.C_h * g * (1.0 - div)
        return -g * div

    __call__ = u_eval


def _default_config(config: Optional[SolveConfig]) -> SolveConfig:
    return config if config is not None else SolveConfig()


def _gate(coeffs: CoefficientField, setting: str, space: FeSpace, quad_order: int) -> CordesReport:
    quad = cell_quadrature(space, quad_order)
    report = check_cordes(coeffs, setting, quad.flat_points)
    if not report.passed:
        raise CordesConditionError(report)
    return report


def solve_periodic_fpk(
    coeffs: CoefficientField, N: int, quad_order: int = 2, solve_config: Optional[SolveConfig] = None
) -> FpkSolution:
    """Invariant density of -D^2:(Au) + div(bu) = 0 with periodic data and unit mass."""
    check_alignment(coeffs, N)
    space = build_space(build_mesh(coeffs.dim, N), PERIODIC)
    report = _gate(coeffs, "periodic", space, quad_order)
    system = assemble(space, coeffs, rhs_kind="periodic_unit", quad_order=quad_order, report=report)
    sol = solve_linear(system, _default_config(solve_config))

    div, quad = divergence_at(space, sol.x, quad_order)
    gamma = eval_gamma(coeffs, quad.flat_points).reshape(div.shape)
    w = quad.weights
    integral = float(np.einsum("q,eq->", w, gamma * (1.0 - div)))
    diagnostics = {
        "normalization_integral": integral,
        "multipliers": sol.multipliers.tolist(),
        "rho_mean": space.mean(sol.x).tolist(),
    }
    if not integral > 0:
        raise NormalizationError(integral, diagnostics)
    C_h = 1.0 / integral
    u_q = C_h * gamma * (1.0 - div)
    diagnostics.update(
        integral_u=float(np.einsum("q,eq->", w, u_q)),
        min_u=float(u_q.min()),
        max_u=float(u_q.max()),
    )
    if u_q.min() < 0:
        log.info("discrete density takes negative values (min %.3e) at N = %d", u_q.min(), N)
    return FpkSolution("periodic", space, coeffs, sol.x, C_h, quad_order, report, sol.stats, diagnostics)


def solve_dirichlet(
    coeffs: CoefficientField,
    N: int,
    quad_order: int = 2,
    solve_config: Optional[SolveConfig] = None,
    N_fine: Optional[int] = None,
) -> FpkSolution:
    """Solution of -D^2:(Au) + div(bu) = f, u = 0 on the boundary.

    Uses the potential F of the field when present; otherwise F is
    reconstructed from f on an ``N_fine`` grid (default: N).
    """
    if not coeffs.has_source():
        raise ValueError("Dirichlet solve requires a source f or potential F")
    check_alignment(coeffs, N)
    if coeffs.F is None:
        potential = potential_from_source(coeffs.f, coeffs.dim, N_fine or N)
        coeffs = coeffs.with_source(f=coeffs.f, F=potential)
    space = build_space(build_mesh(coeffs.dim, N), TANGENTIAL)
    report = _gate(coeffs, "dirichlet", space, quad_order)
    system = assemble(space, coeffs, rhs_kind="dirichlet_F", quad_order=quad_order, report=report)
    sol = solve_linear(system, _default_config(solve_config))

    div, quad = divergence_at(space, sol.x, quad_order)
    gamma = eval_gamma(coeffs, quad.flat_points).reshape(div.shape)
    u_q = -gamma * div
    diagnostics = {
        "integral_u": float(np.einsum("q,eq->", quad.weights, u_q)),
        "min_u": float(u_q.min()),
        "max_u": float(u_q.max()),
    }
    return FpkSolution("dirichlet", space, coeffs, sol.x, None, quad_order, report, sol.stats, diagnostics)


# -- potentials -------------------------------------------------------------


@dataclass(frozen=True)
class SourcePotential:
    """F = -grad phi_h where phi_h is the Q1 solution of Delta phi = f, phi = 0 on the boundary."""

    mesh: Mesh
    phi_nodal: np.ndarray = field(repr=False)

    def _local(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cell, xi = self.mesh.locate(x)
        nodes = self.mesh.cell_nodes[self.mesh.cell_id(cell)]
        vals, grads = shape_eval(self.mesh.dim, xi, self.mesh.h)
        return self.phi_nodal[nodes], vals, grads

    def phi(self, x) -> np.ndarray:
        local, vals, _ = self._local(x)
        return np.einsum("ma,ma->m", vals, local)

    def __call__(self, x) -> np.ndarray:
        local, _, grads = self._local(x)
        return -np.einsum("mak,ma->mk", grads, local)


def _scalar_system(mesh: Mesh, f: Callable, quad_order: int):
    xi, w = gauss_rule(mesh.dim, quad_order)
    vals, grads = shape_eval(mesh.dim, xi, mesh.h)
    w = w * mesh.h**mesh.dim
    K_loc = np.einsum("q,qak,qbk->ab", w, grads, grads)
    pts = (mesh.cell_origins[:, None, :] + mesh.h * xi[None]).reshape(-1, mesh.dim)
    fq = np.asarray(f(pts), dtype=float).reshape(mesh.n_cells, -1)
    load_loc = np.einsum("q,eq,qa->ea", w, fq, vals)
    nodes = mesh.cell_nodes
    nc = nodes.shape[1]
    rows = np.repeat(nodes, nc, axis=1).ravel()
    cols = np.tile(nodes, (1, nc)).ravel()
    K = sp.coo_matrix((np.tile(K_loc.ravel(), mesh.n_cells), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    load = np.bincount(nodes.ravel(), weights=load_loc.ravel(), minlength=mesh.n_nodes)
    return K, load


def potential_from_source(f: Callable, dim: int, N_fine: int, quad_order: int = 2) -> SourcePotential:
    """A vector field F with -div F = f weakly, from a conforming Q1 Poisson solve."""
    mesh = build_mesh(dim, N_fine)
    K, load = _scalar_system(mesh, f, quad_order)
    idx = mesh.node_multi_index
    interior = np.all((idx > 0) & (idx < N_fine), axis=1)
    Kii = K[interior][:, interior]
    phi = np.zeros(mesh.n_nodes)
    rhs = -load[interior]
    if np.any(rhs):
        phi[interior] = spla.spsolve(sp.csc_matrix(Kii), rhs)
        if not np.all(np.isfinite(phi)):
            raise RuntimeError("Poisson solve for the source potential failed")
    return SourcePotential(mesh, phi)


def potential_weak_residual(potential: SourcePotential, f: Callable, quad_order: int = 2) -> float:
    """max_v |(F, grad v) - (f, v)| over the interior Q1 hat functions v of the potential's mesh."""
    mesh = potential.mesh
    K, load = _scalar_system(mesh, f, quad_order)
    idx = mesh.node_multi_index
    interior = np.all((idx > 0) & (idx < mesh.N), axis=1)
    # (F, grad v) = -(grad phi, grad v) = -(K phi)_v
    res = -(K @ potential.phi_nodal) - load
    return float(np.abs(res[interior]).max()) if interior.any() else 0.0


# -- post-processing --------------------------------------------------------


def effective_matrix(coeffs: CoefficientField, solution: FpkSolution) -> np.ndarray:
    """Quadrature of A u_h over Y, symmetrized."""
    if solution.setting != "periodic":
        raise ValueError("effective matrix requires a periodic solution")
    quad = cell_quadrature(solution.space, solution.quad_order)
    x = quad.flat_points
    u = solution.u_eval(x)
    w = np.tile(quad.weights, solution.space.mesh.n_cells)
    Abar = np.einsum("m,m,mij->ij", w, u, coeffs.eval_A(x))
    return 0.5 * (Abar + Abar.T)


@dataclass(frozen=True)
class StudyProblem:
    """A solvable problem paired with an oracle density for error measurement."""

    coeffs: CoefficientField
    setting: str
    oracle: Optional[OracleSolution]
    quad_order: int = 2
    error_order: int = 4
    solve_config: Optional[SolveConfig] = None
    name: str = ""


@dataclass(frozen=True)
class StudyRow:
    N: int
    h: float
    l2_error: float
    rate: Optional[float]


def solve(problem: StudyProblem, N: int) -> FpkSolution:
    if problem.setting == "periodic":
        return solve_periodic_fpk(problem.coeffs, N, problem.quad_order, problem.solve_config)
    if problem.setting == "dirichlet":
        return solve_dirichlet(problem.coeffs, N, problem.quad_order, problem.solve_config)
    raise ValueError(f"unknown setting {problem.setting!r}")


def convergence_study(problem: StudyProblem, Ns) -> list[StudyRow]:
    """L2 errors against the oracle and observed rates log2(e_i / e_{i+1})."""
    if problem.oracle is None:
        raise ValueError("convergence study requires an oracle solution")
    rows: list[StudyRow] = []
    prev = None
    for N in Ns:
        sol = solve(problem, N)
        err = l2_error(sol.u_eval, problem.oracle, problem.coeffs.dim, cells=N, order=problem.error_order)
        rate = None
        if prev is not None and err > 0 and prev[1] > 0:
            rate = float(np.log(prev[1] / err) / np.log(N / prev[0]))
        rows.append(StudyRow(N, 1.0 / N, err, rate))
        prev = (N, err)
    return rows
