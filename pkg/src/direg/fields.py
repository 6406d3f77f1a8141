"""Deformations, identity construction, and bilinear warping.

A deformation stores absolute coordinates: phi(i, j) is the point in [0,1]^2
that cell center (i, j) is mapped to.  Warping samples the template there by
bilinear interpolation; query points outside the hull of cell centers are
clamped, which keeps warping total and avoids artificial zero-padding edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, ScalarField, VectorField, grad_central


@dataclass
class Deformation:
    """Absolute coordinate map stored as a vector field."""

    phi: VectorField

    @property
    def spec(self) -> GridSpec:
        return self.phi.spec

    def copy(self) -> "Deformation":
        return Deformation(self.phi.copy())

    def plus(self, u: VectorField) -> "Deformation":
        """phi + u, a new deformation."""
        return Deformation(
            VectorField(self.spec, self.phi.comp1 + u.comp1, self.phi.comp2 + u.comp2)
        )


def identity_deformation(spec: GridSpec) -> Deformation:
    """Deformation mapping every cell center to itself."""
    X, Y = spec.cell_centers()
    return Deformation(VectorField(spec, X, Y))


def bilinear_sample(values: np.ndarray, spec: GridSpec,
                    px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Sample a cell-centered array at physical points (px, py), clamped."""
    gx = np.clip(px / spec.h_x - 0.5, 0.0, spec.m - 1.0)
    gy = np.clip(py / spec.h_y - 0.5, 0.0, spec.n - 1.0)
    i0 = np.minimum(np.floor(gx).astype(int), spec.m - 2)
    j0 = np.minimum(np.floor(gy).astype(int), spec.n - 2)
    fx = gx - i0
    fy = gy - j0
    v00 = values[i0, j0]
    v10 = values[i0 + 1, j0]
    v01 = values[i0, j0 + 1]
    v11 = values[i0 + 1, j0 + 1]
    return ((1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10
            + (1 - fx) * fy * v01 + fx * fy * v11)


def warp(T: ScalarField, phi: Deformation) -> ScalarField:
    """Deformed template: output(i, j) = T interpolated at phi(i, j)."""
    out = bilinear_sample(T.values, T.spec, phi.phi.comp1, phi.phi.comp2)
    return ScalarField(phi.spec, out)


def warped_gradient(T: ScalarField, phi: Deformation) -> VectorField:
    """Grid gradient of T sampled at the warped points.

    The gradient is computed once on the grid and then interpolated, so it
    agrees with differentiating the warp to first order.
    """
    g = grad_central(T)
    g1 = bilinear_sample(g.comp1, T.spec, phi.phi.comp1, phi.phi.comp2)
    g2 = bilinear_sample(g.comp2, T.spec, phi.phi.comp1, phi.phi.comp2)
    return VectorField(phi.spec, g1, g2)
