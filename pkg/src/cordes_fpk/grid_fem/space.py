from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .mesh import Mesh
from .shape import shape_eval

PERIODIC = "periodic_zero_mean"
TANGENTIAL = "tangential_trace"


@dataclass(frozen=True)
class FeSpace:
    """Continuous multilinear vector fields on a mesh with a DOF constraint.

    ``dof_map[node, comp]`` is the global DOF of that nodal value, or -1 when
    the value is constrained to zero. DOFs are numbered component by component.
    For the periodic kind, ``constraint_vectors[c]`` holds the integrals of the
    component-c basis functions; the zero-mean condition is imposed at solve time.
    """

    mesh: Mesh
    kind: str
    dof_map: np.ndarray = field(repr=False)
    n_free: int
    constraint_vectors: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        """(n_cells, dim * 2^dim) global DOFs, local index = comp * 2^dim + corner."""
        nodes = self.mesh.cell_nodes
        return np.concatenate([self.dof_map[nodes, c] for c in range(self.dim)], axis=1)

    def nodal_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Expand a DOF vector to (n_nodes, dim) nodal values."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_free,):
            raise ValueError(f"expected {self.n_free} coefficients, got shape {coeffs.shape}")
        out = np.zeros(self.dof_map.shape)
        mask = self.dof_map >= 0
        out[mask] = coeffs[self.dof_map[mask]]
        return out

    def evaluate(self, coeffs: np.ndarray, x):
        """Values (m, dim) and Jacobians (m, dim, dim), ``J[:, i, k] = d_k w_i``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cell, xi = self.mesh.locate(x)
        nodal = self.nodal_values(coeffs)
        nodes = self.mesh.cell_nodes[self.mesh.cell_id(cell)]
        vals, grads = shape_eval(self.dim, xi, self.mesh.h)
        local = nodal[nodes]  # (m, 2^n, dim)
        values = np.einsum("ma,mai->mi", vals, local)
        jac = np.einsum("mak,mai->mik", grads, local)
        return values, jac

    def mean(self, coeffs: np.ndarray) -> np.ndarray:
        if self.constraint_vectors is None:
            raise ValueError("mean constraint only defined for the periodic space")
        return self.constraint_vectors @ coeffs

    def random_member(self, rng: np.random.Generator) -> np.ndarray:
        """Random DOF vector; periodic members are projected to zero mean."""
        w = rng.standard_normal(self.n_free)
        if self.kind == PERIODIC:
            per = self.mesh.N**self.dim
            w = w.reshape(self.dim, per)
            w -= w.mean(axis=1, keepdims=True)
            w = w.ravel()
        return w

    def interpolate(self, fn) -> np.ndarray:
        """Nodal interpolant of a vectorized vector field; constrained values dropped."""
        vals = np.asarray(fn(self.mesh.node_coords), dtype=float).reshape(self.mesh.n_nodes, self.dim)
        out = np.zeros(self.n_free)
        mask = self.dof_map >= 0
        out[self.dof_map[mask]] = vals[mask]
        return out


def _periodic_map(mesh: Mesh) -> np.ndarray:
    n, N = mesh.dim, mesh.N
    wrapped = mesh.node_multi_index % N
    pid = wrapped @ (N ** np.arange(n - 1, -1, -1))
    return np.stack([c * N**n + pid for c in range(n)], axis=1)


def _tangential_map(mesh: Mesh) -> np.ndarray:
    idx = mesh.node_multi_index
    on_face = (idx == 0) | (idx == mesh.N)  # (n_nodes, dim): node lies on face with normal e_i
    n = mesh.dim
    free = np.empty(on_face.shape, dtype=bool)
    for j in range(n):
        # component j must vanish on every face whose normal is not e_j
        free[:, j] = ~np.any(np.delete(on_face, j, axis=1), axis=1)
    dof_map = np.full(on_face.shape, -1, dtype=int)
    counter = 0
    for j in range(n):
        k = int(free[:, j].sum())
        dof_map[free[:, j], j] = np.arange(counter, counter + k)
        counter += k
    return dof_map


def build_space(mesh: Mesh, kind: str) -> FeSpace:
    if kind == PERIODIC:
        dof_map = _periodic_map(mesh)
        per = mesh.N**mesh.dim
        B = np.zeros((mesh.dim, mesh.dim * per))
        for c in range(mesh.dim):
            B[c, c * per:(c + 1) * per] = mesh.h**mesh.dim
        return FeSpace(mesh, kind, dof_map, mesh.dim * per, B)
    if kind == TANGENTIAL:
        dof_map = _tangential_map(mesh)
        return FeSpace(mesh, kind, dof_map, int(dof_map.max()) + 1)
    raise ValueError(f"unknown space kind {kind!r}; expected {PERIODIC!r} or {TANGENTIAL!r}")
