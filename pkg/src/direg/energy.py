"""Control functions, energy terms, and right-hand-side assembly.

The objective being minimized per outer iteration is

    data + smoothness(u) + penalty(f) + smoothness(f)
         + quadratic constraint penalty + proximal anchor,

with the constraint residual det(grad(phi + u)) - f.  All integrals are
midpoint-rule sums over cell centers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .fields import Deformation, warp, warped_gradient
from .grid import ScalarField, VectorField, diff_x, diff_y, grad_central
from .jacobian import jacobian_det

if TYPE_CHECKING:
    from .registration import SolverConfig

# floor applied to f before evaluating the control-function derivative, so a
# previous iterate that dips to zero cannot blow up the f-subproblem rhs
F_FLOOR = 1e-3


class PenaltyVariant(enum.Enum):
    PHI1 = "phi1"
    PHI2 = "phi2"


def phi(f, variant: PenaltyVariant):
    """Positivity control function: (f-1)^2/f or (f-1)*log(f); +inf for f <= 0."""
    f = np.asarray(f, dtype=float)
    out = np.full(f.shape, np.inf)
    pos = f > 0.0
    fp = f[pos]
    if variant is PenaltyVariant.PHI1:
        out[pos] = (fp - 1.0) ** 2 / fp
    else:
        out[pos] = (fp - 1.0) * np.log(fp)
    return out if out.ndim else float(out)


def dphi(f, variant: PenaltyVariant):
    """Derivative of the control function, with f floored at F_FLOOR."""
    f = np.maximum(np.asarray(f, dtype=float), F_FLOOR)
    if variant is PenaltyVariant.PHI1:
        out = 1.0 - 1.0 / f**2
    else:
        out = np.log(f) + 1.0 - 1.0 / f
    return out if out.ndim else float(out)


@dataclass
class EnergyBreakdown:
    data: float
    reg_u: float
    reg_phi: float
    reg_f: float
    constraint: float
    proximal: float

    @property
    def total(self) -> float:
        return (self.data + self.reg_u + self.reg_phi + self.reg_f
                + self.constraint + self.proximal)


def _grad_sq(values: np.ndarray, h_x: float, h_y: float) -> np.ndarray:
    return diff_x(values, h_x) ** 2 + diff_y(values, h_y) ** 2


def energy(T: ScalarField, R: ScalarField, phi_def: Deformation,
           u: VectorField, f: ScalarField, u_prev: VectorField,
           cfg: "SolverConfig", lam: float | None = None) -> EnergyBreakdown:
    """Full objective at (u, f) around deformation phi, midpoint quadrature."""
    spec = T.spec
    dA = spec.h_x * spec.h_y
    if lam is None:
        lam = cfg.lambda1

    phi_bar = phi_def.plus(u)
    resid = warp(T, phi_bar).values - R.values
    data = 0.5 * float(np.sum(resid**2)) * dA

    reg_u = 0.5 * cfg.tau1 * float(
        np.sum(_grad_sq(u.comp1, spec.h_x, spec.h_y)
               + _grad_sq(u.comp2, spec.h_x, spec.h_y))) * dA

    if np.any(f.values <= 0.0):
        reg_phi = np.inf
    else:
        reg_phi = cfg.tau2 * float(np.sum(phi(f.values, cfg.variant))) * dA
    reg_f = 0.5 * cfg.tau3 * float(
        np.sum(_grad_sq(f.values, spec.h_x, spec.h_y))) * dA

    c_resid = jacobian_det(phi_bar).values - f.values
    constraint = 0.5 * lam * float(np.sum(c_resid**2)) * dA

    proximal = 0.5 / cfg.gamma * float(
        np.sum((u.comp1 - u_prev.comp1) ** 2
               + (u.comp2 - u_prev.comp2) ** 2)) * dA

    return EnergyBreakdown(data, reg_u, reg_phi, reg_f, constraint, proximal)


def constraint_force(phi_bar: Deformation, f: ScalarField,
                     lam: float) -> VectorField:
    """lam * adjugate(grad phi_bar)^T * grad(det(grad phi_bar) - f).

    The adjugate is formed from the central differences of phi_bar, so no
    matrix inversion is needed and the expression stays defined even where
    the determinant changes sign.
    """
    spec = phi_bar.spec
    h_x, h_y = spec.h_x, spec.h_y
    c = jacobian_det(phi_bar).values - f.values
    cx = diff_x(c, h_x)
    cy = diff_y(c, h_y)
    p1, p2 = phi_bar.phi.comp1, phi_bar.phi.comp2
    p1x, p1y = diff_x(p1, h_x), diff_y(p1, h_y)
    p2x, p2y = diff_x(p2, h_x), diff_y(p2, h_y)
    force1 = lam * (p2y * cx - p2x * cy)
    force2 = lam * (-p1y * cx + p1x * cy)
    return VectorField(spec, force1, force2)


def assemble_u_rhs(T: ScalarField, R: ScalarField, phi_def: Deformation,
                   u_k: VectorField, f_k: ScalarField, cfg: "SolverConfig",
                   lam: float | None = None) -> VectorField:
    """Right-hand side of the linearized displacement equation at u_k."""
    if lam is None:
        lam = cfg.lambda1
    phi_bar = phi_def.plus(u_k)
    resid = warp(T, phi_bar).values - R.values
    grad_T = warped_gradient(T, phi_bar)
    det_force = constraint_force(phi_bar, f_k, lam)
    r1 = -resid * grad_T.comp1 + det_force.comp1 + u_k.comp1 / cfg.gamma
    r2 = -resid * grad_T.comp2 + det_force.comp2 + u_k.comp2 / cfg.gamma
    return VectorField(T.spec, r1, r2)


def assemble_f_rhs(phi_next: Deformation, f_k: ScalarField,
                   cfg: "SolverConfig", lam: float | None = None) -> ScalarField:
    """Right-hand side of the relaxation-function equation."""
    if lam is None:
        lam = cfg.lambda1
    det = jacobian_det(phi_next).values
    rhs = lam * det - cfg.tau2 * dphi(f_k.values, cfg.variant)
    return ScalarField(phi_next.spec, rhs)
