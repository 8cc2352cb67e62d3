from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Uniform tensor grid of Y = (0,1)^n with N cells per direction.

    Nodes and cells are numbered lexicographically with x_1 varying slowest.
    """

    dim: int
    N: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"unsupported dimension {self.dim}; expected 2 or 3")
        if self.N < 2:
            raise ValueError(f"need at least 2 cells per direction, got N = {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def n_nodes(self) -> int:
        return (self.N + 1) ** self.dim

    @property
    def n_cells(self) -> int:
        return self.N**self.dim

    @cached_property
    def node_multi_index(self) -> np.ndarray:
        grids = np.meshgrid(*([np.arange(self.N + 1)] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def node_coords(self) -> np.ndarray:
        return self.node_multi_index * self.h

    @cached_property
    def cell_multi_index(self) -> np.ndarray:
        grids = np.meshgrid(*([np.arange(self.N)] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def cell_origins(self) -> np.ndarray:
        return self.cell_multi_index * self.h

    @cached_property
    def cell_nodes(self) -> np.ndarray:
        """Global node ids of each cell, local order matching ``reference_corners``."""
        corners = reference_corners(self.dim)
        idx = self.cell_multi_index[:, None, :] + corners[None, :, :]
        return self.node_id(idx)

    def node_id(self, multi_index: np.ndarray) -> np.ndarray:
        strides = (self.N + 1) ** np.arange(self.dim - 1, -1, -1)
        return np.asarray(multi_index) @ strides

    def locate(self, x: np.ndarray):
        """Cell multi-index and reference coordinates of points in the closed cube."""
        x = np.asarray(x, dtype=float)
        cell = np.clip(np.floor(x * self.N).astype(int), 0, self.N - 1)
        return cell, x * self.N - cell

    def cell_id(self, cell_multi_index: np.ndarray) -> np.ndarray:
        strides = self.N ** np.arange(self.dim - 1, -1, -1)
        return np.asarray(cell_multi_index) @ strides


def reference_corners(dim: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(2)] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def build_mesh(dim: int, N: int) -> Mesh:
    return Mesh(dim, N)
