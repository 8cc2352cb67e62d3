"""Tensor Gauss-Legendre rules on the unit cube and on uniform grids of it."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _gauss_1d(order: int):
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    t, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (t + 1.0), 0.5 * w


def gauss_rule(dim: int, order: int):
    """Points (q, dim) and weights (q,) of the tensor rule on [0,1]^dim.

    ``order`` is the number of points per direction; the rule integrates
    polynomials of degree 2*order - 1 in each variable exactly.
    """
    t, w = _gauss_1d(order)
    grids = np.meshgrid(*([t] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, wts


def composite_points(dim: int, cells: int, order: int):
    """Composite rule on ``cells``^dim congruent sub-cubes of Y.

    Returns points of shape (cells^dim * q, dim), grouped cell by cell, and
    matching weights that sum to 1.
    """
    ref, w = gauss_rule(dim, order)
    h = 1.0 / cells
    origins = np.stack(np.meshgrid(*([np.arange(cells)] * dim), indexing="ij"), axis=-1).reshape(-1, dim) * h
    pts = (origins[:, None, :] + h * ref[None, :, :]).reshape(-1, dim)
    wts = np.tile(w * h**dim, len(origins))
    return pts, wts


def integrate(fn, dim: int, cells: int = 8, order: int = 8) -> float:
    """Integrate a vectorized scalar function over Y with a composite Gauss rule."""
    pts, wts = composite_points(dim, cells, order)
    return float(np.dot(wts, np.asarray(fn(pts), dtype=float)))
