"""Cell-centered grid primitives and finite-difference operators.

The computational domain is the unit square [0,1]^2 discretized into m-by-n
cells of size h_x * h_y.  Fields live at cell centers; with 0-based indices
the center of cell (i, j) sits at ((i + 1/2) h_x, (j + 1/2) h_y), where the
i axis runs along x and the j axis along y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    """Grid too small for the stencils, or a field does not fit its grid."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid on [0,1]^2 with m x n cells."""

    m: int
    n: int

    def __post_init__(self) -> None:
        if self.m < 3 or self.n < 3:
            raise GridError(f"grid must be at least 3x3, got {self.m}x{self.n}")

    @property
    def h_x(self) -> float:
        return 1.0 / self.m

    @property
    def h_y(self) -> float:
        return 1.0 / self.n

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (X, Y) coordinate arrays of shape (m, n)."""
        x = (np.arange(self.m) + 0.5) * self.h_x
        y = (np.arange(self.n) + 0.5) * self.h_y
        return np.meshgrid(x, y, indexing="ij")


def _check_values(spec: GridSpec, values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (spec.m, spec.n):
        raise GridError(
            f"{what} has shape {values.shape}, expected {(spec.m, spec.n)}"
        )
    # Infinities are permitted: a few fields carry +inf sentinels (the folding
    # indicator on boundary cells, PSNR for identical images).  NaN is always
    # a bug.
    if np.any(np.isnan(values)):
        raise GridError(f"{what} contains NaN entries")
    return values


@dataclass
class ScalarField:
    """m x n array of real values attached to a grid."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = _check_values(self.spec, self.values, "scalar field")

    @classmethod
    def full(cls, spec: GridSpec, value: float) -> "ScalarField":
        return cls(spec, np.full((spec.m, spec.n), float(value)))

    def copy(self) -> "ScalarField":
        return ScalarField(self.spec, self.values.copy())


@dataclass
class VectorField:
    """Two m x n component arrays (x and y components) attached to a grid."""

    spec: GridSpec
    comp1: np.ndarray
    comp2: np.ndarray

    def __post_init__(self) -> None:
        self.comp1 = _check_values(self.spec, self.comp1, "vector component 1")
        self.comp2 = _check_values(self.spec, self.comp2, "vector component 2")

    @classmethod
    def zeros(cls, spec: GridSpec) -> "VectorField":
        z = np.zeros((spec.m, spec.n))
        return cls(spec, z, z.copy())

    def copy(self) -> "VectorField":
        return VectorField(self.spec, self.comp1.copy(), self.comp2.copy())


def diff_x(values: np.ndarray, h: float) -> np.ndarray:
    """d/dx: central differences inside, one-sided on the first/last column."""
    out = np.empty_like(values)
    out[1:-1, :] = (values[2:, :] - values[:-2, :]) / (2.0 * h)
    out[0, :] = (values[1, :] - values[0, :]) / h
    out[-1, :] = (values[-1, :] - values[-2, :]) / h
    return out


def diff_y(values: np.ndarray, h: float) -> np.ndarray:
    """d/dy: central differences inside, one-sided on the first/last row."""
    out = np.empty_like(values)
    out[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2.0 * h)
    out[:, 0] = (values[:, 1] - values[:, 0]) / h
    out[:, -1] = (values[:, -1] - values[:, -2]) / h
    return out


def grad_central(v: ScalarField) -> VectorField:
    """Gradient with central interior stencils and one-sided boundaries."""
    spec = v.spec
    return VectorField(
        spec, diff_x(v.values, spec.h_x), diff_y(v.values, spec.h_y)
    )


def laplacian(v: ScalarField) -> ScalarField:
    """Five-point Laplacian.

    Boundary cells use mirrored ghost values (zero normal derivative), so
    constants map to zero everywhere.  The Dirichlet solver owns its own
    ghost convention and does not call this function on boundary cells.
    """
    spec = v.spec
    a = v.values
    padded = np.pad(a, 1, mode="edge")
    out = (padded[:-2, 1:-1] - 2.0 * a + padded[2:, 1:-1]) / spec.h_x**2
    out += (padded[1:-1, :-2] - 2.0 * a + padded[1:-1, 2:]) / spec.h_y**2
    return ScalarField(spec, out)


def vector_laplacian(u: VectorField) -> VectorField:
    """Componentwise five-point Laplacian."""
    spec = u.spec
    l1 = laplacian(ScalarField(spec, u.comp1)).values
    l2 = laplacian(ScalarField(spec, u.comp2)).values
    return VectorField(spec, l1, l2)
