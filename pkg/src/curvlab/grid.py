"""Field containers on flat periodic grids.

Everything lives on the unit torus [0,1)^n sampled on a uniform lattice with
N nodes per axis. Arrays carry the grid axes first and the component axes
last, in C order and float64, so node (i_1, ..., i_n) maps to a flat index in
lexicographic order. That ordering is load-bearing: every reduction in the
package sums in this fixed order (numpy's pairwise scheme on the contiguous
flattened array), which makes results independent of how nodewise work is
parallelized.

Symmetric 2-tensors (metrics, Ricci) are stored packed: only the entries
g_ij with i <= j are kept, so g_ij == g_ji holds exactly by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import SingularMetric

LAMBDA_FLOOR = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic lattice on the unit torus: N**dim nodes, spacing 1/N."""

    dim: int
    resolution: int

    def __post_init__(self):
        if not 2 <= self.dim <= 4:
            raise ValueError(f"dim must be in [2, 4], got {self.dim}")
        if self.resolution < 8:
            raise ValueError(f"resolution must be >= 8, got {self.resolution}")
        if (1.0 / self.resolution) * self.resolution != 1.0:
            raise ValueError(
                f"N={self.resolution}: spacing*N must equal 1 exactly; "
                "use a power of two"
            )

    @property
    def spacing(self) -> float:
        return 1.0 / self.resolution

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.resolution,) * self.dim

    @property
    def num_nodes(self) -> int:
        return self.resolution**self.dim

    def axis_coordinates(self) -> np.ndarray:
        return np.arange(self.resolution) / self.resolution

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        x = self.axis_coordinates()
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))


@lru_cache(maxsize=None)
def sym_pairs(n: int) -> tuple[tuple[int, int], ...]:
    """Index pairs (i, j), i <= j, in the packed component order."""
    return tuple((i, j) for i in range(n) for j in range(i, n))


@lru_cache(maxsize=None)
def _sym_slots(n: int) -> np.ndarray:
    slots = np.zeros((n, n), dtype=np.intp)
    for s, (i, j) in enumerate(sym_pairs(n)):
        slots[i, j] = s
        slots[j, i] = s
    return slots


def pack_sym(mats: np.ndarray) -> np.ndarray:
    """Extract the upper triangle of (..., n, n) matrices into packed slots."""
    n = mats.shape[-1]
    idx = sym_pairs(n)
    rows = np.array([i for i, _ in idx])
    cols = np.array([j for _, j in idx])
    return np.ascontiguousarray(mats[..., rows, cols])


def unpack_sym(packed: np.ndarray, n: int) -> np.ndarray:
    """Expand packed symmetric components to full (..., n, n) matrices."""
    return np.ascontiguousarray(packed[..., _sym_slots(n)])


def _as_values(values, shape, what) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: values must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _as_values(self.values, self.grid.shape, "ScalarField")
        )


@dataclass(frozen=True, eq=False)
class VectorField:
    """Contravariant vector components, shape grid.shape + (n,)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        shape = self.grid.shape + (self.grid.dim,)
        object.__setattr__(
            self, "values", _as_values(self.values, shape, "VectorField")
        )


@dataclass(frozen=True, eq=False)
class SymTensorField:
    """Symmetric covariant 2-tensor, packed: shape grid.shape + (n(n+1)/2,)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.dim
        shape = self.grid.shape + (n * (n + 1) // 2,)
        object.__setattr__(
            self,
            "values",
            _as_values(self.values, shape, type(self).__name__),
        )

    @classmethod
    def from_matrices(cls, grid: GridSpec, mats: np.ndarray, **kw):
        """Build from full (..., n, n) matrices, symmetrizing first."""
        mats = np.asarray(mats, dtype=np.float64)
        sym = 0.5 * (mats + mats.swapaxes(-1, -2))
        return cls(grid, pack_sym(sym), **kw)

    @property
    def matrices(self) -> np.ndarray:
        """Full (..., n, n) view; mirror entries are exact copies."""
        return unpack_sym(self.values, self.grid.dim)

    def component(self, i: int, j: int) -> np.ndarray:
        return self.values[..., _sym_slots(self.grid.dim)[i, j]]


@dataclass(frozen=True, eq=False)
class MetricField(SymTensorField):
    """SPD symmetric 2-tensor; `contravariant` marks inverse-metric components."""

    contravariant: bool = False

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrices)

    def require_spd(self, lam_floor: float = LAMBDA_FLOOR) -> None:
        lam_min = float(self.eigenvalues()[..., 0].min())
        if lam_min < lam_floor:
            raise SingularMetric(
                f"smallest nodal eigenvalue {lam_min:.3e} below floor {lam_floor:.1e}"
            )


@dataclass(frozen=True, eq=False)
class ChristoffelField:
    """Connection coefficients gamma[..., k, i, j], symmetric in (i, j)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.dim
        shape = self.grid.shape + (n, n, n)
        object.__setattr__(
            self, "values", _as_values(self.values, shape, "ChristoffelField")
        )


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    """Ricci tensor, scalar curvature and the pointwise curvature monitors."""

    ricci: SymTensorField
    scalar: ScalarField
    ricci_norm_sq: ScalarField
    curv_proxy: ScalarField

    @property
    def grid(self) -> GridSpec:
        return self.scalar.grid


def flat_metric(grid: GridSpec) -> MetricField:
    """The product metric delta_ij of the unit torus."""
    return constant_metric(grid, np.eye(grid.dim))


def constant_metric(grid: GridSpec, mat) -> MetricField:
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim == 0:
        mat = float(mat) * np.eye(grid.dim)
    full = np.broadcast_to(mat, grid.shape + (grid.dim, grid.dim))
    return MetricField.from_matrices(grid, full)


def grid_sum(values: np.ndarray) -> float:
    """Reduction in the fixed lexicographic order (numpy pairwise on C layout)."""
    return float(np.sum(np.ascontiguousarray(values).reshape(-1)))
