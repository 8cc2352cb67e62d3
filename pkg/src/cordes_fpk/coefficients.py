"""Coefficient fields and Cordes-condition arithmetic.

Fields are vectorized: every callable takes an array of points with shape
``(m, n)`` and returns values for all ``m`` points at once.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

Array = np.ndarray
PointFn = Callable[[Array], Array]

FAMILIES = ("constant_identity", "constant_matrix", "checkerboard", "layered", "trig_drift", "table", "custom")

SYMMETRY_TOL = 1e-12
DRIFT_TOL = 1e-14
CONSEQUENCE_TOL = 1e-10


class CoefficientEvaluationError(ValueError):
    """A coefficient returned a non-finite value."""

    def __init__(self, what: str, point):
        self.point = np.asarray(point)
        super().__init__(f"non-finite {what} at x = {self.point.tolist()}")


class EllipticityError(ValueError):
    def __init__(self, message: str, point):
        self.point = np.asarray(point)
        super().__init__(f"{message} at x = {self.point.tolist()}")


class CordesConditionError(RuntimeError):
    """Raised by solvers when the Cordes gate fails; carries the report."""

    def __init__(self, report: "CordesReport"):
        self.report = report
        super().__init__(
            f"Cordes condition ({report.setting}) failed: delta_star = {report.delta_star:.6g} "
            f"<= threshold {report.delta_threshold:.6g}"
        )


def _as_points(x, dim: int) -> Array:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class CoefficientField:
    """Problem data on Y = (0,1)^n.

    ``A`` maps points to symmetric matrices, ``b`` to drift vectors. ``c`` is
    only used by the lower-order Cordes check; ``f`` and ``F`` are the
    Dirichlet sources (``f = -div F``).

    ``alignment`` is the number of equal slabs per axis on which the data is
    piecewise constant; meshes must use a multiple of it. ``analytic_delta_star``
    and ``analytic_eta`` are exact values shipped with built-in families.
    """

    dim: int
    A: PointFn
    b: Optional[PointFn] = None
    c: Optional[PointFn] = None
    f: Optional[PointFn] = None
    F: Optional[PointFn] = None
    family_tag: str = "custom"
    params: dict = field(default_factory=dict)
    alignment: Optional[int] = None
    analytic_delta_star: Optional[float] = None
    analytic_eta: Optional[int] = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"unsupported dimension {self.dim}; expected 2 or 3")
        if self.family_tag not in FAMILIES:
            raise ValueError(f"unknown family tag {self.family_tag!r}")

    def eval_A(self, x) -> Array:
        x = _as_points(x, self.dim)
        A = np.asarray(self.A(x), dtype=float).reshape(len(x), self.dim, self.dim)
        _check_finite(A.reshape(len(x), -1), x, "diffusion A")
        return A

    def eval_b(self, x) -> Array:
        x = _as_points(x, self.dim)
        if self.b is None:
            return np.zeros((len(x), self.dim))
        b = np.asarray(self.b(x), dtype=float).reshape(len(x), self.dim)
        _check_finite(b, x, "drift b")
        return b

    def eval_c(self, x) -> Array:
        x = _as_points(x, self.dim)
        if self.c is None:
            raise ValueError("reaction coefficient c is not defined for this field")
        c = np.broadcast_to(np.asarray(self.c(x), dtype=float), (len(x),)).copy()
        _check_finite(c[:, None], x, "reaction c")
        if np.any(c < 0):
            raise ValueError(f"reaction c must be nonnegative; c = {c.min():.3g} at x = {x[np.argmin(c)].tolist()}")
        return c

    def eval_f(self, x) -> Array:
        x = _as_points(x, self.dim)
        if self.f is None:
            raise ValueError("scalar source f is not defined for this field")
        return np.broadcast_to(np.asarray(self.f(x), dtype=float), (len(x),)).copy()

    def eval_F(self, x) -> Array:
        x = _as_points(x, self.dim)
        if self.F is None:
            raise ValueError("vector potential F is not defined for this field")
        return np.asarray(self.F(x), dtype=float).reshape(len(x), self.dim)

    def has_source(self) -> bool:
        return self.f is not None or self.F is not None

    def with_source(self, f: Optional[PointFn] = None, F: Optional[PointFn] = None) -> "CoefficientField":
        return CoefficientField(
            self.dim, self.A, self.b, self.c, f, F, self.family_tag, dict(self.params),
            self.alignment, self.analytic_delta_star, self.analytic_eta,
        )

    def scaled(self, t: float) -> "CoefficientField":
        """Field with (A, b) replaced by (tA, tb); sources are dropped."""
        if t <= 0:
            raise ValueError("scale must be positive")
        b = None if self.b is None else (lambda x, _b=self.b: t * np.asarray(_b(x), dtype=float))
        return CoefficientField(
            self.dim, lambda x, _A=self.A: t * np.asarray(_A(x), dtype=float), b, self.c, None, None,
            self.family_tag, dict(self.params), self.alignment, self.analytic_delta_star, self.analytic_eta,
        )


def _check_finite(values: Array, x: Array, what: str) -> None:
    bad = ~np.all(np.isfinite(values), axis=1)
    if np.any(bad):
        raise CoefficientEvaluationError(what, x[np.argmax(bad)])


def check_validity(coeffs: CoefficientField, samples) -> tuple[float, float]:
    """Verify symmetry and ellipticity of A on ``samples``; return (ell_lower, ell_upper)."""
    x = _as_points(samples, coeffs.dim)
    A = coeffs.eval_A(x)
    scale = np.maximum(np.abs(A).max(axis=(1, 2)), 1.0)
    asym = np.abs(A - A.transpose(0, 2, 1)).max(axis=(1, 2)) / scale
    if np.any(asym > SYMMETRY_TOL):
        k = int(np.argmax(asym))
        raise EllipticityError(f"A is not symmetric (relative asymmetry {asym[k]:.3g})", x[k])
    eig = np.linalg.eigvalsh(0.5 * (A + A.transpose(0, 2, 1)))
    if np.any(eig[:, 0] <= 0):
        k = int(np.argmin(eig[:, 0]))
        raise EllipticityError(f"A is not positive definite (eigenvalue {eig[k, 0]:.3g})", x[k])
    return float(eig[:, 0].min()), float(eig[:, -1].max())


def eval_gamma(coeffs: CoefficientField, x) -> Array:
    """Renormalization tr(A) / (|A|^2 + |b|^2) at each point, Frobenius norms."""
    A = coeffs.eval_A(x)
    b = coeffs.eval_b(x)
    tr = np.trace(A, axis1=1, axis2=2)
    return tr / (np.sum(A * A, axis=(1, 2)) + np.sum(b * b, axis=1))


@dataclass(frozen=True)
class CordesReport:
    setting: str
    delta_star: float
    delta_threshold: float
    eta: int
    nearness_const: Optional[float]
    max_cone_angle: float
    sample_count: int
    passed: bool
    delta_star_raw: float
    ell_lower: float
    ell_upper: float
    consequence_max: float
    consequence_ok: bool
    lambda_shift: Optional[float] = None
    delta_star_analytic: Optional[float] = None
    renormalization: Optional[Array] = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {
            "setting": self.setting,
            "delta_star": self.delta_star,
            "delta_threshold": self.delta_threshold,
            "eta": self.eta,
            "nearness_const": self.nearness_const,
            "max_cone_angle": self.max_cone_angle,
            "passed": self.passed,
        }


def _cone_angles(A: Array) -> Array:
    """Angle between the eigenvalue vector of A and (1, ..., 1).

    Uses the deviatoric part so that A proportional to I gives exactly 0.
    """
    n = A.shape[-1]
    tr = np.trace(A, axis1=1, axis2=2)
    dev = A - (tr / n)[:, None, None] * np.eye(n)
    return np.arctan2(np.sqrt(np.sum(dev * dev, axis=(1, 2))), tr / np.sqrt(n))


def _detect_eta(coeffs: CoefficientField, b: Array) -> int:
    if coeffs.analytic_eta is not None:
        return int(coeffs.analytic_eta)
    return int(np.any(np.linalg.norm(b, axis=1) > DRIFT_TOL))


def check_cordes(coeffs: CoefficientField, setting: str = "periodic", samples=None) -> CordesReport:
    """Sampled check of the FPK Cordes condition.

    ``delta_star`` is the sampled minimum, lowered to the family's analytic
    value when one is shipped. Periodic uses the threshold eta/(1 + 4 pi^2)
    and the Poincare constant 1/(2 pi); Dirichlet uses eta/(1 + pi^2) and 1/pi.
    """
    if setting not in ("periodic", "dirichlet"):
        raise ValueError(f"unknown setting {setting!r}")
    if samples is None:
        samples = default_samples(coeffs.dim)
    x = _as_points(samples, coeffs.dim)
    if len(x) == 0:
        raise ValueError("empty sample set")
    ell_lower, ell_upper = check_validity(coeffs, x)

    n = coeffs.dim
    A = coeffs.eval_A(x)
    b = coeffs.eval_b(x)
    tr = np.trace(A, axis1=1, axis2=2)
    denom = np.sum(A * A, axis=(1, 2)) + np.sum(b * b, axis=1)
    raw = float(np.min(tr**2 / denom - (n - 1)))
    delta_star = min(raw, 1.0)
    if coeffs.analytic_delta_star is not None:
        # samples can miss the worst point; the exact infimum is known
        delta_star = min(delta_star, coeffs.analytic_delta_star)

    eta = _detect_eta(coeffs, b)
    poincare_sq = (2 * np.pi) ** -2 if setting == "periodic" else np.pi**-2
    threshold = eta / (1.0 + 1.0 / poincare_sq)
    kappa = min((delta_star - threshold) * (1.0 + eta * poincare_sq), 1.0)

    gamma = tr / denom
    eye = np.eye(n)
    consequence = np.sum((eye - gamma[:, None, None] * A) ** 2, axis=(1, 2)) + np.sum((gamma[:, None] * b) ** 2, axis=1)
    cmax = float(consequence.max())

    return CordesReport(
        setting=setting,
        delta_star=delta_star,
        delta_threshold=threshold,
        eta=eta,
        nearness_const=kappa,
        max_cone_angle=float(_cone_angles(A).max()),
        sample_count=len(x),
        passed=bool(threshold < delta_star <= 1.0),
        delta_star_raw=raw,
        ell_lower=ell_lower,
        ell_upper=ell_upper,
        consequence_max=cmax,
        consequence_ok=bool(cmax <= 1.0 - delta_star + CONSEQUENCE_TOL),
        delta_star_analytic=coeffs.analytic_delta_star,
    )


def check_cordes_lower_order(coeffs: CoefficientField, lambda_shift: float, samples=None) -> CordesReport:
    """Sampled check of the Cordes-type condition with reaction term c >= 0.

    The renormalization s(x) is attached to the report as ``renormalization``.
    """
    if lambda_shift <= 0:
        raise ValueError("lambda_shift must be positive")
    if coeffs.c is None:
        raise ValueError("lower-order Cordes check requires a reaction coefficient c")
    if samples is None:
        samples = default_samples(coeffs.dim)
    x = _as_points(samples, coeffs.dim)
    if len(x) == 0:
        raise ValueError("empty sample set")
    ell_lower, ell_upper = check_validity(coeffs, x)

    n, lam = coeffs.dim, float(lambda_shift)
    A = coeffs.eval_A(x)
    b = coeffs.eval_b(x)
    c = coeffs.eval_c(x)
    num = np.trace(A, axis1=1, axis2=2) + c / lam
    denom = np.sum(A * A, axis=(1, 2)) + np.sum(b * b, axis=1) / (2 * lam) + c**2 / lam**2
    raw = float(np.min(num**2 / denom - n))
    delta_star = min(raw, 1.0)
    s = num / denom

    eye = np.eye(n)
    consequence = (
        np.sum((eye - s[:, None, None] * A) ** 2, axis=(1, 2))
        + np.sum((s[:, None] * b) ** 2, axis=1) / (2 * lam)
        + (lam - s * c) ** 2 / lam**2
    )
    cmax = float(consequence.max())
    return CordesReport(
        setting="lower_order",
        delta_star=delta_star,
        delta_threshold=0.0,
        eta=_detect_eta(coeffs, b),
        nearness_const=None,
        max_cone_angle=float(_cone_angles(A).max()),
        sample_count=len(x),
        passed=bool(0.0 < delta_star <= 1.0),
        delta_star_raw=raw,
        ell_lower=ell_lower,
        ell_upper=ell_upper,
        consequence_max=cmax,
        consequence_ok=bool(cmax <= 1.0 - delta_star + CONSEQUENCE_TOL),
        lambda_shift=lam,
        renormalization=s,
    )


def default_samples(dim: int, cells: int = 16, order: int = 2) -> Array:
    """Tensor Gauss points on a uniform grid, the default Cordes sample set."""
    from .grid_fem.quadrature import composite_points

    pts, _ = composite_points(dim, cells, order)
    return pts


# -- built-in families ------------------------------------------------------


def _const_matrix_fn(M: Array) -> PointFn:
    M = np.array(M, dtype=float)
    return lambda x: np.broadcast_to(M, (len(x),) + M.shape)


def _cordes_delta(A: Array, b: Array) -> float:
    n = A.shape[0]
    return float(min(np.trace(A) ** 2 / (np.sum(A * A) + np.sum(b * b)) - (n - 1), 1.0))


def constant_identity(dim: int = 2) -> CoefficientField:
    return CoefficientField(
        dim, _const_matrix_fn(np.eye(dim)), family_tag="constant_identity",
        analytic_delta_star=1.0, analytic_eta=0,
    )


def constant_matrix(A, b=None) -> CoefficientField:
    A = np.array(A, dtype=float)
    dim = A.shape[0]
    b = np.zeros(dim) if b is None else np.array(b, dtype=float)
    return CoefficientField(
        dim, _const_matrix_fn(A), _const_matrix_fn(b) if np.any(b) else None,
        family_tag="constant_matrix", params={"A": A.tolist(), "b": b.tolist()},
        analytic_delta_star=_cordes_delta(A, b), analytic_eta=int(np.any(b != 0)),
    )


def _scalar_diffusion(dim: int, a: Callable[[Array], Array]) -> PointFn:
    eye = np.eye(dim)
    return lambda x: np.asarray(a(x), dtype=float)[:, None, None] * eye


def _slab_index(t: Array, m: int) -> Array:
    return np.clip(np.floor(t * m).astype(int), 0, m - 1)


def checkerboard(values=(1.0, 2.0), dim: int = 2, split_axis: Optional[int] = None) -> CoefficientField:
    """Scalar diffusion a(x) I taking two values.

    With ``split_axis`` (1-based) Y is cut in half along that axis, value 0 on
    the lower half. Without it the 2^n sub-cubes alternate by parity.
    """
    lo, hi = (float(v) for v in values)
    if min(lo, hi) <= 0:
        raise ValueError("checkerboard values must be positive")
    if split_axis is not None and not 1 <= split_axis <= dim:
        raise ValueError(f"split_axis must lie in 1..{dim}")

    def a(x):
        if split_axis is not None:
            parity = _slab_index(x[:, split_axis - 1], 2)
        else:
            parity = np.sum(_slab_index(x, 2), axis=1) % 2
        return np.where(parity == 0, lo, hi)

    return CoefficientField(
        dim, _scalar_diffusion(dim, a), family_tag="checkerboard",
        params={"values": (lo, hi), "split_axis": split_axis, "a": a},
        alignment=2, analytic_delta_star=1.0, analytic_eta=0,
    )


def layered(profile, dim: int = 2) -> CoefficientField:
    """Scalar diffusion a(x_1) I, piecewise constant on len(profile) equal slabs in x_1."""
    prof = np.array(profile, dtype=float)
    if prof.ndim != 1 or len(prof) == 0 or np.any(prof <= 0):
        raise ValueError("layered profile must be a nonempty list of positive values")

    def a(x):
        return prof[_slab_index(x[:, 0], len(prof))]

    return CoefficientField(
        dim, _scalar_diffusion(dim, a), family_tag="layered",
        params={"profile": tuple(prof.tolist()), "a": a},
        alignment=len(prof), analytic_delta_star=1.0, analytic_eta=0,
    )


def trig_potential(alpha: float, dim: int):
    """V = alpha * prod sin(2 pi x_i) and its gradient."""
    k = 2 * np.pi

    def V(x):
        return alpha * np.prod(np.sin(k * x), axis=1)

    def grad_V(x):
        s = np.sin(k * x)
        c = np.cos(k * x)
        g = np.empty_like(x)
        for i in range(dim):
            others = np.prod(np.delete(s, i, axis=1), axis=1)
            g[:, i] = alpha * k * c[:, i] * others
        return g

    return V, grad_V


def trig_drift(alpha: float = 0.15, dim: int = 2) -> CoefficientField:
    """A = I, b = grad V with V = alpha prod sin(2 pi x_i); invariant density is e^V / Z."""
    V, grad_V = trig_potential(alpha, dim)
    bmax_sq = (2 * np.pi * alpha) ** 2
    return CoefficientField(
        dim, _const_matrix_fn(np.eye(dim)), grad_V, family_tag="trig_drift",
        params={"alpha": float(alpha), "V": V},
        analytic_delta_star=min(dim**2 / (dim + bmax_sq) - (dim - 1), 1.0),
        analytic_eta=int(alpha != 0),
    )


def table(path_or_rows, dim: Optional[int] = None) -> CoefficientField:
    """Piecewise-constant coefficients from cell-centered CSV samples.

    Header ``i,j[,k],a11,a12[,a13],a22[,a23,a33],b1,b2[,b3]``; one row per cell.
    """
    if isinstance(path_or_rows, (str, Path)):
        with open(path_or_rows, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = list(path_or_rows)
    if not rows:
        raise ValueError("coefficient table is empty")
    keys = set(rows[0])
    if dim is None:
        dim = 3 if "k" in keys else 2
    idx_keys = ["i", "j", "k"][:dim]
    a_keys = [f"a{r + 1}{c + 1}" for r in range(dim) for c in range(r, dim)]
    b_keys = [f"b{r + 1}" for r in range(dim)]
    expected = set(idx_keys + a_keys + b_keys)
    if keys != expected:
        raise ValueError(f"table header must be {','.join(idx_keys + a_keys + b_keys)}; got {','.join(rows[0])}")

    idx = np.array([[int(r[k]) for k in idx_keys] for r in rows])
    m = int(idx.max()) + 1
    if len(rows) != m**dim or idx.min() < 0:
        raise ValueError(f"table must list all {m}^{dim} cells exactly once")
    A = np.zeros((m,) * dim + (dim, dim))
    b = np.zeros((m,) * dim + (dim,))
    seen = np.zeros((m,) * dim, dtype=bool)
    for row, ix in zip(rows, idx):
        t = tuple(ix)
        if seen[t]:
            raise ValueError(f"duplicate table cell {t}")
        seen[t] = True
        for r in range(dim):
            for c in range(r, dim):
                A[t + (r, c)] = A[t + (c, r)] = float(row[f"a{r + 1}{c + 1}"])
            b[t + (r,)] = float(row[f"b{r + 1}"])

    def cell(x):
        return tuple(_slab_index(x[:, d], m) for d in range(dim))

    has_drift = bool(np.any(b != 0))
    return CoefficientField(
        dim, lambda x: A[cell(x)], (lambda x: b[cell(x)]) if has_drift else None,
        family_tag="table", params={"cells": m}, alignment=m, analytic_eta=int(has_drift),
    )


def sine_product(dim: int):
    """u*(x) = prod sin(pi x_i) with gradient and Hessian."""
    k = np.pi

    def u(x):
        return np.prod(np.sin(k * x), axis=1)

    def grad(x):
        s, c = np.sin(k * x), np.cos(k * x)
        g = np.empty_like(x)
        for i in range(dim):
            g[:, i] = k * c[:, i] * np.prod(np.delete(s, i, axis=1), axis=1)
        return g

    def hess(x):
        s, c = np.sin(k * x), np.cos(k * x)
        H = np.empty((len(x), dim, dim))
        for i in range(dim):
            for j in range(dim):
                if i == j:
                    H[:, i, i] = -(k**2) * u(x)
                else:
                    rest = np.prod(np.delete(s, [i, j], axis=1), axis=1) if dim > 2 else 1.0
                    H[:, i, j] = k**2 * c[:, i] * c[:, j] * rest
        return H

    return u, grad, hess


def manufactured_dirichlet(A=None, b=None, dim: int = 2, source: str = "F") -> CoefficientField:
    """Constant (A, b) with u* = prod sin(pi x_i) as exact Dirichlet solution.

    ``source="F"`` attaches both f and the analytic potential F = A grad u* - b u*;
    ``source="f"`` attaches only f, leaving F to be reconstructed.
    """
    A = np.eye(dim) if A is None else np.array(A, dtype=float)
    dim = A.shape[0]
    b = np.zeros(dim) if b is None else np.array(b, dtype=float)
    u, grad, hess = sine_product(dim)

    def f(x):
        return -np.einsum("ij,mij->m", A, hess(x)) + grad(x) @ b

    def F(x):
        return grad(x) @ A.T - u(x)[:, None] * b

    base = constant_matrix(A, b)
    field_ = base.with_source(f=f, F=F if source == "F" else None)
    return field_
