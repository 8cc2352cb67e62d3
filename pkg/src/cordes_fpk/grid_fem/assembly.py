"""Assembly of the rot-stabilized first-order Galerkin systems.

For test field w and trial field rho the bilinear form is

    a(rho, w) = (-div rho, gamma Lt w) + (rot rho, rot w),   Lt w = -A:Dw - b.w,

with right-hand side (-1, gamma Lt w) on the periodic space or (F, w) on the
tangential-trace space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from ..coefficients import CoefficientField, CordesConditionError, CordesReport, check_cordes, eval_gamma
from .quadrature import gauss_rule
from .shape import shape_eval
from .space import PERIODIC, TANGENTIAL, FeSpace

RHS_KINDS = ("periodic_unit", "dirichlet_F")


def rot_of_jacobian(J: np.ndarray) -> np.ndarray:
    """rot from Jacobians ``J[..., i, k] = d_k w_i``: scalar in 2D, curl vector in 3D."""
    n = J.shape[-1]
    if n == 2:
        return J[..., 0, 1] - J[..., 1, 0]
    return np.stack(
        [J[..., 2, 1] - J[..., 1, 2], J[..., 0, 2] - J[..., 2, 0], J[..., 1, 0] - J[..., 0, 1]], axis=-1
    )


def div_of_jacobian(J: np.ndarray) -> np.ndarray:
    return np.trace(J, axis1=-2, axis2=-1)


@lru_cache(maxsize=None)
def _reference_basis(dim: int, order: int, h: float):
    """Vector basis on one cell at the Gauss points.

    Returns weights (q,), values (q, L, dim) and Jacobians (q, L, dim, dim) with
    local index L = comp * 2^dim + corner.
    """
    xi, w = gauss_rule(dim, order)
    vals, grads = shape_eval(dim, xi, h)
    q, nc = vals.shape
    L = dim * nc
    bvals = np.zeros((q, L, dim))
    bjac = np.zeros((q, L, dim, dim))
    for i in range(dim):
        sl = slice(i * nc, (i + 1) * nc)
        bvals[:, sl, i] = vals
        bjac[:, sl, i, :] = grads
    return xi, w * h**dim, bvals, bjac


@dataclass(frozen=True)
class CellQuadrature:
    """Physical Gauss points of every cell, shape (n_cells, q, dim), with the cell basis."""

    points: np.ndarray
    weights: np.ndarray
    basis_values: np.ndarray
    basis_jac: np.ndarray

    @property
    def flat_points(self) -> np.ndarray:
        return self.points.reshape(-1, self.points.shape[-1])


def cell_quadrature(space: FeSpace, order: int) -> CellQuadrature:
    mesh = space.mesh
    xi, w, bvals, bjac = _reference_basis(mesh.dim, order, mesh.h)
    pts = mesh.cell_origins[:, None, :] + mesh.h * xi[None, :, :]
    return CellQuadrature(pts, w, bvals, bjac)


@dataclass(frozen=True)
class SparseSystem:
    """Nonsymmetric Galerkin matrix (rows = test DOFs) and right-hand side.

    ``constraints`` holds one row per mean condition; when present the solve
    uses the bordered saddle form [[K, B^T], [B, 0]].
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constraints: Optional[np.ndarray] = None
    space: Optional[FeSpace] = field(default=None, repr=False)
    quad_order: Optional[int] = None
    report: Optional[CordesReport] = field(default=None, repr=False)

    def __post_init__(self):
        m, n = self.matrix.shape
        if m != n:
            raise ValueError(f"system matrix must be square, got {self.matrix.shape}")
        if self.rhs.shape != (n,):
            raise ValueError("right-hand side length does not match the matrix")

    @property
    def n_free(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_multipliers(self) -> int:
        return 0 if self.constraints is None else self.constraints.shape[0]

    def saddle(self):
        """Bordered matrix and right-hand side including mean-constraint rows."""
        if self.constraints is None:
            return self.matrix, self.rhs
        B = sp.csr_matrix(self.constraints)
        k = B.shape[0]
        M = sp.bmat([[self.matrix, B.T], [B, None]], format="csr")
        return M, np.concatenate([self.rhs, np.zeros(k)])


def _scatter(space: FeSpace, local: np.ndarray) -> sp.csr_matrix:
    dofs = space.cell_dofs
    L = dofs.shape[1]
    rows = np.broadcast_to(dofs[:, :, None], (len(dofs), L, L))
    cols = np.broadcast_to(dofs[:, None, :], (len(dofs), L, L))
    mask = (rows >= 0) & (cols >= 0)
    return sp.coo_matrix(
        (local[mask], (rows[mask], cols[mask])), shape=(space.n_free, space.n_free)
    ).tocsr()


def _scatter_vector(space: FeSpace, local: np.ndarray) -> np.ndarray:
    dofs = space.cell_dofs
    mask = dofs >= 0
    return np.bincount(dofs[mask], weights=local[mask], minlength=space.n_free)


def setting_of(space: FeSpace) -> str:
    return "periodic" if space.kind == PERIODIC else "dirichlet"


def renormalized_operator(coeffs: CoefficientField, quad: CellQuadrature, gamma: Optional[Callable] = None):
    """gamma at the Gauss points (n_cells, q) and gamma * Lt applied to each basis field (n_cells, q, L)."""
    x = quad.flat_points
    ne, q, n = quad.points.shape
    A = coeffs.eval_A(x).reshape(ne, q, n, n)
    b = coeffs.eval_b(x).reshape(ne, q, n)
    g = (eval_gamma(coeffs, x) if gamma is None else np.asarray(gamma(x), dtype=float)).reshape(ne, q)
    Lt = -np.einsum("eqjk,qrjk->eqr", A, quad.basis_jac) - np.einsum("eqj,qrj->eqr", b, quad.basis_values)
    return g, g[:, :, None] * Lt


def assemble(
    space: FeSpace,
    coeffs: CoefficientField,
    gamma: Optional[Callable] = None,
    rhs_kind: Optional[str] = None,
    quad_order: int = 2,
    report: Optional[CordesReport] = None,
) -> SparseSystem:
    """Assemble a(rho, w) and the matching right-hand side.

    Unless a passing ``report`` is supplied, the Cordes condition of the
    space's setting is checked on the assembly Gauss points first.
    """
    if coeffs.dim != space.dim:
        raise ValueError("coefficient and space dimensions differ")
    if rhs_kind is None:
        rhs_kind = "periodic_unit" if space.kind == PERIODIC else "dirichlet_F"
    if rhs_kind not in RHS_KINDS:
        raise ValueError(f"unknown rhs kind {rhs_kind!r}")
    if rhs_kind == "periodic_unit" and space.kind != PERIODIC:
        raise ValueError("periodic_unit right-hand side requires the periodic space")
    if rhs_kind == "dirichlet_F":
        if space.kind != TANGENTIAL:
            raise ValueError("dirichlet_F right-hand side requires the tangential-trace space")
        if coeffs.F is None:
            raise ValueError("dirichlet_F right-hand side requires the vector potential F")
    check_alignment(coeffs, space.mesh.N)

    quad = cell_quadrature(space, quad_order)
    if report is None:
        report = check_cordes(coeffs, setting_of(space), quad.flat_points)
    if not report.passed:
        raise CordesConditionError(report)

    _, gLt = renormalized_operator(coeffs, quad, gamma)
    div = div_of_jacobian(quad.basis_jac)  # (q, L)
    rot = rot_of_jacobian(quad.basis_jac)
    rot = rot[..., None] if rot.ndim == 2 else rot
    w = quad.weights

    rot_local = np.einsum("q,qsc,qrc->rs", w, rot, rot)
    local = np.einsum("q,qs,eqr->ers", w, -div, gLt) + rot_local[None]
    K = _scatter(space, local)

    if rhs_kind == "periodic_unit":
        rhs_local = -np.einsum("q,eqr->er", w, gLt)
    else:
        ne, q, n = quad.points.shape
        F = coeffs.eval_F(quad.flat_points).reshape(ne, q, n)
        rhs_local = np.einsum("q,eqj,qrj->er", w, F, quad.basis_values)
    rhs = _scatter_vector(space, rhs_local)

    return SparseSystem(K, rhs, space.constraint_vectors, space, quad_order, report)


def check_alignment(coeffs: CoefficientField, N: int) -> None:
    m = coeffs.alignment
    if m is not None and N % m != 0:
        if m == 2:
            raise ValueError("N must be even for grid-aligned discontinuities")
        raise ValueError(f"N must be a multiple of {m} for grid-aligned discontinuities")


# -- Gram matrices and discrete norms -------------------------------------


def gram_matrices(space: FeSpace, quad_order: int = 2) -> dict:
    """Independently assembled Gram matrices of div, rot, full gradient and L2."""
    quad = cell_quadrature(space, quad_order)
    w = quad.weights
    J = quad.basis_jac
    div = div_of_jacobian(J)
    rot = rot_of_jacobian(J)
    rot = rot[..., None] if rot.ndim == 2 else rot
    ne = space.mesh.n_cells

    def glob(local):
        return _scatter(space, np.broadcast_to(local, (ne,) + local.shape))

    return {
        "div": glob(np.einsum("q,qr,qs->rs", w, div, div)),
        "rot": glob(np.einsum("q,qrc,qsc->rs", w, rot, rot)),
        "grad": glob(np.einsum("q,qrjk,qsjk->rs", w, J, J)),
        "mass": glob(np.einsum("q,qrj,qsj->rs", w, quad.basis_values, quad.basis_values)),
    }


def nearness_defect(space: FeSpace, coeffs: CoefficientField, w_coeffs: np.ndarray, quad_order: int = 2) -> float:
    """L2 norm of (-div w) - gamma Lt w for a discrete field w."""
    quad = cell_quadrature(space, quad_order)
    _, gLt = renormalized_operator(coeffs, quad)
    wl = _gather(space, w_coeffs)
    div = div_of_jacobian(quad.basis_jac)
    defect = -np.einsum("qr,er->eq", div, wl) - np.einsum("eqr,er->eq", gLt, wl)
    return float(np.sqrt(np.einsum("q,eq->", quad.weights, defect**2)))


def _gather(space: FeSpace, coeffs: np.ndarray) -> np.ndarray:
    padded = np.append(np.asarray(coeffs, dtype=float), 0.0)
    return padded[space.cell_dofs]  # -1 picks the trailing zero


def divergence_at(space: FeSpace, coeffs: np.ndarray, quad_order: int):
    """Elementwise divergence of a discrete field at the Gauss points, (n_cells, q)."""
    quad = cell_quadrature(space, quad_order)
    return np.einsum("qr,er->eq", div_of_jacobian(quad.basis_jac), _gather(space, coeffs)), quad
