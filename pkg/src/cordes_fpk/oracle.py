"""Reference solutions and checks that do not go through the Galerkin solver."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coefficients import CoefficientField
from .grid_fem.quadrature import composite_points

PointFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OracleSolution:
    density: PointFn
    provenance: str
    quad_order: int
    normalization: Optional[float] = None
    setting: str = "periodic"

    def __call__(self, x):
        return self.density(np.atleast_2d(np.asarray(x, dtype=float)))


def exact_periodic_gradient_drift(V: PointFn, dim: int = 2, cells: int = 8, order: int = 8) -> OracleSolution:
    """Invariant density e^V / Z for A = I, b = grad V."""
    if order < 6:
        raise ValueError("normalization needs a Gauss rule of order >= 6")
    pts, wts = composite_points(dim, cells, order)
    Z = float(wts @ np.exp(V(pts)))
    return OracleSolution(lambda x: np.exp(V(x)) / Z, "closed form e^V/Z", order, Z)


def exact_periodic_scalar_diffusion(a: PointFn, dim: int = 2, cells: int = 8, order: int = 8) -> OracleSolution:
    """Invariant density (1/a) / int(1/a) for A = a I, b = 0.

    For piecewise-constant ``a`` the composite grid must align with its jumps.
    """
    pts, wts = composite_points(dim, cells, order)
    av = np.asarray(a(pts), dtype=float)
    if np.any(av <= 0):
        raise ValueError("scalar diffusion must be positive")
    Z = float(wts @ (1.0 / av))
    return OracleSolution(lambda x: 1.0 / (np.asarray(a(x), dtype=float) * Z), "closed form (1/a)/int(1/a)", order, Z)


def exact_dirichlet(u: PointFn) -> OracleSolution:
    return OracleSolution(u, "closed form manufactured", 0, setting="dirichlet")


def l2_error(u_h: PointFn, u_star: PointFn, dim: int = 2, cells: int = 8, order: int = 4) -> float:
    """Composite Gauss approximation of ||u_h - u*||_{L2(Y)}.

    Choose ``cells`` as a multiple of the mesh resolution of ``u_h`` so the
    rule does not straddle its element boundaries.
    """
    pts, wts = composite_points(dim, cells, order)
    diff = np.asarray(u_h(pts), dtype=float) - np.asarray(u_star(pts), dtype=float)
    return float(np.sqrt(wts @ diff**2))


# -- Miranda-Talenti ------------------------------------------------------


def miranda_talenti_check(v: PointFn, kind: str = "periodic", N_fd: Optional[int] = None, dim: int = 2):
    """Finite-difference values of (||D^2 v||, ||Delta v||) on Y.

    Pure second derivatives use the 3-point stencil at nodes, mixed ones the
    forward 4-point stencil at staggered points, so that summation by parts
    holds exactly on the grid. Periodic grids wrap; Dirichlet grids use the
    interior nodes and assume v = 0 on the boundary.
    """
    if kind not in ("periodic", "dirichlet"):
        raise ValueError(f"unknown kind {kind!r}")
    if N_fd is None:
        N_fd = 256 if dim == 2 else 64
    h = 1.0 / N_fd
    cell = h**dim
    if kind == "periodic":
        t = np.arange(N_fd) * h
    else:
        t = np.arange(N_fd + 1) * h
    grids = np.meshgrid(*([t] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    V = np.asarray(v(pts), dtype=float).reshape(grids[0].shape)

    if kind == "periodic":
        def dd(i):
            return (np.roll(V, -1, i) - 2 * V + np.roll(V, 1, i)) / h**2

        def mixed(i, j):
            dj = np.roll(V, -1, j) - V
            return (np.roll(dj, -1, i) - dj) / h**2

        pure = [dd(i) for i in range(dim)]
        mix = {(i, j): mixed(i, j) for i in range(dim) for j in range(i + 1, dim)}
    else:
        def dd(i):
            return (np.diff(V, 2, axis=i) / h**2)[tuple(slice(None) if k == i else slice(1, -1) for k in range(dim))]

        def mixed(i, j):
            d = np.diff(np.diff(V, axis=j), axis=i) / h**2
            return d[tuple(slice(None) if k in (i, j) else slice(1, -1) for k in range(dim))]

        pure = [dd(i) for i in range(dim)]
        mix = {(i, j): mixed(i, j) for i in range(dim) for j in range(i + 1, dim)}

    hess_sq = sum(np.sum(p**2) for p in pure) + 2 * sum(np.sum(m**2) for m in mix.values())
    lap = sum(pure)
    return float(np.sqrt(hess_sq * cell)), float(np.sqrt(np.sum(lap**2) * cell))


# -- weak-residual audit ---------------------------------------------------


@dataclass(frozen=True)
class ProbeFunction:
    value: PointFn
    grad: PointFn
    hess: PointFn
    label: str


def _periodic_mode(k, phase: float) -> ProbeFunction:
    k = np.asarray(k, dtype=float)
    kk = 2 * np.pi * k

    def arg(x):
        return x @ kk + phase

    return ProbeFunction(
        lambda x: np.cos(arg(x)),
        lambda x: -np.sin(arg(x))[:, None] * kk,
        lambda x: -np.cos(arg(x))[:, None, None] * np.outer(kk, kk),
        f"cos(2pi {k.astype(int).tolist()}.x + {phase:g})",
    )


def periodic_battery(dim: int = 2) -> list[ProbeFunction]:
    """Ten trigonometric modes with wavenumbers up to 2 per direction."""
    ks = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 0), (0, 2), (2, 1), (1, 2), (2, 2), (2, -1)]
    phases = [0.0, 0.3, 0.7, 1.1, 0.2, 0.9, 1.5, 0.4, 2.0, 0.6]
    if dim == 3:
        ks = [(1, 0, 0), (0, 1, 1), (1, 1, 1), (1, -1, 0), (2, 0, 1), (0, 2, 0), (2, 1, -1), (1, 2, 2), (2, 2, 0), (0, 0, 2)]
    return [_periodic_mode(k, p) for k, p in zip(ks, phases)]


def _sine_product(k) -> ProbeFunction:
    w = np.pi * np.asarray(k, dtype=float)
    dim = len(w)

    def factors(x):
        return np.sin(w * x), w * np.cos(w * x), -(w**2) * np.sin(w * x)

    def value(x):
        return np.prod(np.sin(w * x), axis=1)

    def grad(x):
        s, ds, _ = factors(x)
        g = np.empty_like(x)
        for i in range(dim):
            g[:, i] = ds[:, i] * np.prod(np.delete(s, i, axis=1), axis=1)
        return g

    def hess(x):
        s, ds, d2s = factors(x)
        H = np.empty((len(x), dim, dim))
        for i in range(dim):
            for j in range(dim):
                f = s.copy()
                if i == j:
                    f[:, i] = d2s[:, i]
                else:
                    f[:, i], f[:, j] = ds[:, i], ds[:, j]
                H[:, i, j] = np.prod(f, axis=1)
        return H

    return ProbeFunction(value, grad, hess, f"prod sin({np.asarray(k).tolist()} pi x)")


def dirichlet_battery(dim: int = 2) -> list[ProbeFunction]:
    """Ten products of sin(k pi x_i), vanishing on the boundary."""
    if dim == 2:
        ks = [(a, b) for a in (1, 2, 3) for b in (1, 2, 3)] + [(1, 4)]
    else:
        ks = [(a, b, c) for a in (1, 2) for b in (1, 2) for c in (1, 2)] + [(3, 1, 1), (1, 3, 2)]
    return [_sine_product(k) for k in ks]


def apply_L(coeffs: CoefficientField, phi: ProbeFunction, x: np.ndarray) -> np.ndarray:
    """L phi = -A:D^2 phi - b.grad phi."""
    A = coeffs.eval_A(x)
    b = coeffs.eval_b(x)
    return -np.einsum("mij,mij->m", A, phi.hess(x)) - np.einsum("mi,mi->m", b, phi.grad(x))


def weak_residual(
    density: PointFn, coeffs: CoefficientField, phi: ProbeFunction, setting: str = "periodic",
    cells: int = 8, order: int = 8,
) -> float:
    """(u, L phi) for the periodic problem, (u, L phi) - (f, phi) for the Dirichlet one."""
    pts, wts = composite_points(coeffs.dim, cells, order)
    val = wts @ (np.asarray(density(pts)) * apply_L(coeffs, phi, pts))
    if setting == "dirichlet":
        val -= wts @ (coeffs.eval_f(pts) * phi.value(pts))
    return float(val)
