"""Built-in problems with known solutions, shared by the CLI and the tests."""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from . import coefficients as cf
from .fpk_solver import StudyProblem
from .oracle import exact_dirichlet, exact_periodic_gradient_drift, exact_periodic_scalar_diffusion
from .sparse_linalg import SolveConfig


def _aligned_cells(m: Optional[int]) -> int:
    return 8 if m is None else math.lcm(8, m)


def periodic_oracle(coeffs: cf.CoefficientField):
    """Oracle density for the periodic families that have one, else None."""
    tag = coeffs.family_tag
    if tag == "trig_drift":
        return exact_periodic_gradient_drift(coeffs.params["V"], coeffs.dim)
    if tag in ("checkerboard", "layered"):
        return exact_periodic_scalar_diffusion(coeffs.params["a"], coeffs.dim, cells=_aligned_cells(coeffs.alignment))
    if tag in ("constant_identity", "constant_matrix"):
        # constant coefficients: L* 1 = 0
        return exact_periodic_scalar_diffusion(lambda x: np.ones(len(x)), coeffs.dim)
    return None


def trig_drift_problem(alpha: float = 0.15, dim: int = 2, solve_config: Optional[SolveConfig] = None) -> StudyProblem:
    co = cf.trig_drift(alpha, dim)
    return StudyProblem(co, "periodic", periodic_oracle(co), solve_config=solve_config, name=f"trig_drift({alpha})")


def checkerboard_problem(values=(1.0, 2.0), dim: int = 2, split_axis=None, solve_config=None) -> StudyProblem:
    co = cf.checkerboard(values, dim, split_axis)
    return StudyProblem(co, "periodic", periodic_oracle(co), solve_config=solve_config, name="checkerboard")


def dirichlet_manufactured_problem(A=None, b=None, dim: int = 2, source: str = "F", solve_config=None) -> StudyProblem:
    co = cf.manufactured_dirichlet(A, b, dim, source)
    u, _, _ = cf.sine_product(co.dim)
    return StudyProblem(co, "dirichlet", exact_dirichlet(u), solve_config=solve_config, name="dirichlet_manufactured")
