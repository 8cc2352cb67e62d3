from __future__ import annotations

import numpy as np

from .mesh import reference_corners


def shape_eval(dim: int, xi, h: float = 1.0):
    """Multilinear basis on a cube of side ``h``.

    ``xi`` holds reference coordinates in [0,1]^dim, shape (q, dim). Returns
    values of shape (q, 2^dim) and physical gradients of shape (q, 2^dim, dim).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    corners = reference_corners(dim)
    # 1D factors: xi for corner coordinate 1, 1 - xi for 0
    fac = np.where(corners[None, :, :] == 1, xi[:, None, :], 1.0 - xi[:, None, :])
    dfac = np.where(corners == 1, 1.0, -1.0)[None, :, :] * np.ones_like(fac)
    values = np.prod(fac, axis=2)
    grads = np.empty(fac.shape)
    for d in range(dim):
        others = np.prod(np.delete(fac, d, axis=2), axis=2)
        grads[:, :, d] = dfac[:, :, d] * others / h
    return values, grads
