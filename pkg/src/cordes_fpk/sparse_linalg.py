"""Linear solves for the nonsymmetric (possibly bordered) Galerkin systems."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid_fem.assembly import SparseSystem

log = logging.getLogger(__name__)

ITERATIVE = "iterative_krylov"
DIRECT = "direct_factorization"
DIRECT_FALLBACK_LIMIT = 20_000


class LinearSolveError(RuntimeError):
    def __init__(self, message: str, residual_history=()):
        self.residual_history = list(residual_history)
        super().__init__(message)


@dataclass(frozen=True)
class SolveConfig:
    method: str = ITERATIVE
    tol: float = 1e-10
    max_iter: Optional[int] = None
    restart: int = 200
    fallback: bool = True

    def __post_init__(self):
        if self.method not in (ITERATIVE, DIRECT):
            raise ValueError(f"unknown solve method {self.method!r}")
        if not 0 < self.tol < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.restart < 1:
            raise ValueError("restart must be >= 1")


@dataclass(frozen=True)
class SolveStats:
    method: str
    iterations: int
    residual: float
    relative_residual: float
    fell_back: bool = False
    residual_history: list = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class LinearSolution:
    x: np.ndarray
    multipliers: np.ndarray
    stats: SolveStats


def _jacobi(M: sp.csr_matrix) -> spla.LinearOperator:
    d = M.diagonal().copy()
    d[np.abs(d) < 1e-300] = 1.0
    inv = 1.0 / d
    return spla.LinearOperator(M.shape, matvec=lambda v: inv * v, dtype=float)


def _gmres(M, r, config: SolveConfig, history: list):
    n = M.shape[0]
    max_iter = config.max_iter or 10 * n
    restart = min(config.restart, n)
    precond = _jacobi(M)
    bnorm = np.linalg.norm(r)
    x = np.zeros(n)
    counter = {"it": 0}

    def cb(res):
        counter["it"] += 1
        history.append(float(res))

    # scipy measures the preconditioned residual; re-check the true one and
    # restart from the current iterate with a tighter target if needed
    rtol = config.tol
    for _ in range(4):
        remaining = max_iter - counter["it"]
        if remaining <= 0:
            break
        x, info = spla.gmres(
            M, r, x0=x, rtol=rtol, atol=0.0, restart=restart,
            maxiter=max(1, -(-remaining // restart)), M=precond, callback=cb, callback_type="pr_norm",
        )
        res = np.linalg.norm(M @ x - r)
        if res <= config.tol * bnorm:
            return x, counter["it"]
        if info < 0:
            break
        rtol = max(rtol * 0.1 * config.tol * bnorm / res, 1e-15)
    raise LinearSolveError(
        f"GMRES did not reach relative residual {config.tol:g} within {max_iter} iterations "
        f"(final {np.linalg.norm(M @ x - r) / bnorm:.3e})",
        history,
    )


def _direct(M, r):
    try:
        lu = spla.splu(sp.csc_matrix(M))
    except RuntimeError as exc:  # raised for exactly singular factors
        raise LinearSolveError(f"singular matrix in factorization: {exc}") from exc
    x = lu.solve(r)
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("factorization produced non-finite values")
    return x


def solve_linear(system: SparseSystem, config: Optional[SolveConfig] = None) -> LinearSolution:
    """Solve the system, bordered with its mean constraints when present.

    The returned vector satisfies ||M x - r|| <= tol ||r|| for the iterative
    method; otherwise the solve raises :class:`LinearSolveError`. With
    ``fallback`` set, systems below 20,000 unknowns retry with a direct
    factorization after a Krylov failure.
    """
    config = config or SolveConfig()
    M, r = system.saddle()
    M = sp.csr_matrix(M)
    n = M.shape[0]
    k = system.n_multipliers
    bnorm = np.linalg.norm(r)
    history: list = []
    fell_back = False
    iterations = 0

    if bnorm == 0.0:
        z = np.zeros(n)
        method = config.method
    elif config.method == DIRECT:
        z = _direct(M, r)
        method = DIRECT
    else:
        method = ITERATIVE
        try:
            z, iterations = _gmres(M, r, config, history)
        except LinearSolveError:
            if not (config.fallback and n < DIRECT_FALLBACK_LIMIT):
                raise
            log.warning("GMRES failed on %d unknowns, falling back to direct factorization", n)
            z = _direct(M, r)
            fell_back = True
            method = DIRECT

    res = float(np.linalg.norm(M @ z - r))
    stats = SolveStats(method, iterations, res, res / bnorm if bnorm else 0.0, fell_back, history)
    return LinearSolution(z[: n - k], z[n - k:], stats)


def dump_coo(matrix, path) -> None:
    """Write ``row col value`` lines (0-based) for every stored entry."""
    coo = sp.coo_matrix(matrix)
    with open(Path(path), "w", encoding="utf-8") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")


def load_coo(path, shape) -> sp.csr_matrix:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return sp.csr_matrix(shape)
    data = np.loadtxt(text.splitlines(), ndmin=2)
    return sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=shape).tocsr()
