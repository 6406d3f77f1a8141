"""Outer penalty-splitting loop and the coarse-to-fine multilevel driver.

Per outer iteration: solve the two linearized displacement equations, add
the increment onto the deformation, untangle any folded cells, solve the
relaxation-function equation, grow the penalty weight, and test the energy
and displacement stopping rules.  The multilevel driver restricts the image
pair down a pyramid, registers coarsest-first, and prolongs the deformation
and relaxation function as the next level's initializer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import singledispatch

import numpy as np

from .energy import (EnergyBreakdown, PenaltyVariant, assemble_f_rhs,
                     assemble_u_rhs, dphi, energy)
from .fields import Deformation, identity_deformation, warp
from .grid import GridSpec, ScalarField, VectorField
from .jacobian import (CorrectionError, correct_deformation, folding_indicator,
                       jacobian_det)
from .linsolve import ScreenedPoissonProblem, SolverError, solve
from .metrics import MetricsReport, compute_metrics


class ConfigError(ValueError):
    """Invalid solver configuration."""


@dataclass(frozen=True)
class SolverConfig:
    tau1: float = 0.3
    tau2: float = 1e-2
    tau3: float = 1e-3
    lambda1: float = 0.8
    gamma: float = 18.0
    rho: float = 1.05
    levels: int = 3
    max_iter: int = 100
    eps_L: float = 1e-3
    eps_u: float = 1e-2
    variant: PenaltyVariant = PenaltyVariant.PHI1
    correction_eps: float = 1e-2
    correction: bool = True

    def __post_init__(self) -> None:
        if min(self.tau1, self.tau2, self.tau3) < 0:
            raise ConfigError("regularization weights must be >= 0")
        if self.tau1 <= 0:
            raise ConfigError("tau1 must be positive")
        # lambda1 = 0 is admitted: it yields the plain diffusion baseline
        if self.lambda1 < 0:
            raise ConfigError("lambda1 must be >= 0")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.rho <= 1.0:
            raise ConfigError(f"rho must be > 1, got {self.rho}")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.correction_eps <= 0:
            raise ConfigError("correction_eps must be positive")


@dataclass
class IterationRecord:
    level: int
    iteration: int
    lam: float
    energy: EnergyBreakdown
    det_mean: float


@dataclass
class RegistrationResult:
    phi_final: Deformation
    f_final: ScalarField
    warped: ScalarField
    trace: list[IterationRecord]
    metrics: MetricsReport
    level_traces: list[int] = field(default_factory=list)
    degraded: bool = False


def _solve_u(rhs: VectorField, cfg: SolverConfig, tol: float = 1e-8) -> VectorField:
    spec = rhs.spec
    a, c = cfg.tau1, 1.0 / cfg.gamma
    u1 = solve(ScreenedPoissonProblem(a, c, ScalarField(spec, rhs.comp1), 0.0), tol)
    u2 = solve(ScreenedPoissonProblem(a, c, ScalarField(spec, rhs.comp2), 0.0), tol)
    return VectorField(spec, u1.values, u2.values)


def _solve_f(phi_next: Deformation, f_k: ScalarField, cfg: SolverConfig,
             lam: float, tol: float = 1e-8) -> ScalarField:
    if lam == 0.0:
        # degenerate subproblem: nothing couples f to the deformation
        return f_k
    rhs = assemble_f_rhs(phi_next, f_k, cfg, lam)
    if cfg.tau3 == 0.0:
        # no diffusion: the equation is pointwise, lam*f = rhs
        return ScalarField(phi_next.spec, rhs.values / lam)
    return solve(ScreenedPoissonProblem(cfg.tau3, lam, rhs, 1.0), tol)


_LS_MAX_HALVINGS = 40


def dirpm(R: ScalarField, T: ScalarField, phi0: Deformation, f0: ScalarField,
          cfg: SolverConfig, level: int = 1) -> RegistrationResult:
    """Penalty-splitting registration on a single grid level.

    The deformation is kept as a fixed base map (the initializer, typically
    prolonged from the coarser level) plus a cumulative displacement that the
    outer loop updates.  Each iteration solves the screened displacement
    equation; because the screen operator is positive definite the resulting
    increment is a descent direction for the level energy, so a backtracking
    line search along it makes the outer loop monotone.  When no step length
    decreases the energy the iterate is stationary and the loop stops.
    """
    spec = R.spec
    if T.spec != spec or phi0.spec != spec or f0.spec != spec:
        raise ConfigError("all inputs must share one grid")

    phi_base = phi0.copy()
    f = f0.copy()
    u = VectorField.zeros(spec)
    lam = cfg.lambda1
    trace: list[IterationRecord] = []
    degraded = False

    e_ref: float | None = None
    step = 1.0
    for k in range(1, cfg.max_iter + 1):
        try:
            rhs = assemble_u_rhs(T, R, phi_base, u, f, cfg, lam)
            u_hat = _solve_u(rhs, cfg)
        except SolverError:
            degraded = True
            break

        e_old = energy(T, R, phi_base, u, f, u, cfg, lam)
        if e_ref is None:
            e_ref = max(abs(e_old.total), 1e-30)

        d1 = u_hat.comp1 - u.comp1
        d2 = u_hat.comp2 - u.comp2
        # warm-start the step length from the previous iteration
        s = min(1.0, 2.0 * step)
        u_new = None
        for _ in range(_LS_MAX_HALVINGS):
            cand = VectorField(spec, u.comp1 + s * d1, u.comp2 + s * d2)
            e_cand = energy(T, R, phi_base, cand, f, u, cfg, lam)
            if e_cand.total < e_old.total:
                if not cfg.correction:
                    u_new = cand
                    break
                # guard against steps that fold the grid outright; a short
                # enough step never folds because the level starts fold-free
                report = folding_indicator(phi_base.plus(cand))
                if report.R_min > 0.0:
                    u_new = cand
                    break
            s *= 0.5
        if u_new is None:
            # stationary point of the level energy: nothing left to gain
            break
        step = s

        phi_next = phi_base.plus(u_new)
        if cfg.correction:
            try:
                phi_next, _ = correct_deformation(phi_next, cfg.correction_eps)
            except CorrectionError as exc:
                phi_next = exc.best_phi
                degraded = True
            u_new = VectorField(spec,
                                phi_next.phi.comp1 - phi_base.phi.comp1,
                                phi_next.phi.comp2 - phi_base.phi.comp2)

        try:
            f_next = _solve_f(phi_next, f, cfg, lam)
        except SolverError:
            degraded = True
            break

        e_new = energy(T, R, phi_base, u_new, f_next, u, cfg, lam)
        det_mean = float(jacobian_det(phi_next).values.mean())
        trace.append(IterationRecord(level, k, lam, e_new, det_mean))

        du = np.sqrt(np.sum((u_new.comp1 - u.comp1) ** 2
                            + (u_new.comp2 - u.comp2) ** 2))
        u_scale = max(np.sqrt(np.sum(u.comp1**2 + u.comp2**2)),
                      np.sqrt(np.sum(u_new.comp1**2 + u_new.comp2**2)), 1e-30)

        f, u = f_next, u_new
        lam *= cfg.rho

        if degraded:
            break
        if abs(e_new.total - e_old.total) / e_ref <= cfg.eps_L:
            break
        if du / u_scale <= cfg.eps_u:
            break

    phi = phi_base.plus(u)
    warped = warp(T, phi)
    if not trace:
        # record at least the initial state so the trace is never empty
        e0 = energy(T, R, phi_base, u, f, u, cfg, lam)
        trace.append(IterationRecord(
            level, 0, lam, e0, float(jacobian_det(phi).values.mean())))
    return RegistrationResult(
        phi_final=phi,
        f_final=f,
        warped=warped,
        trace=trace,
        metrics=compute_metrics(T, R, warped, phi),
        level_traces=[len(trace)],
        degraded=degraded,
    )


class RestrictionError(ValueError):
    """Field dimensions not divisible as required by the grid transfer."""


def _restrict_array(values: np.ndarray) -> np.ndarray:
    m, n = values.shape
    if m % 2 or n % 2:
        raise RestrictionError(f"cannot halve odd dimensions {m}x{n}")
    return 0.25 * (values[0::2, 0::2] + values[1::2, 0::2]
                   + values[0::2, 1::2] + values[1::2, 1::2])


def _prolong_array(values: np.ndarray, fine: GridSpec) -> np.ndarray:
    """Bilinear interpolation of a coarse cell-centered array, clamped edges."""
    m, n = values.shape
    # fine center k maps to coarse index coordinate (k - 0.5)/2
    gx = np.clip((np.arange(fine.m) - 0.5) / 2.0, 0.0, m - 1.0)
    gy = np.clip((np.arange(fine.n) - 0.5) / 2.0, 0.0, n - 1.0)
    i0 = np.minimum(gx.astype(int), m - 2)
    j0 = np.minimum(gy.astype(int), n - 2)
    fx = (gx - i0)[:, None]
    fy = (gy - j0)[None, :]
    v00 = values[np.ix_(i0, j0)]
    v10 = values[np.ix_(i0 + 1, j0)]
    v01 = values[np.ix_(i0, j0 + 1)]
    v11 = values[np.ix_(i0 + 1, j0 + 1)]
    return ((1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10
            + (1 - fx) * fy * v01 + fx * fy * v11)


@singledispatch
def restrict(obj):
    raise TypeError(f"cannot restrict {type(obj).__name__}")


@restrict.register
def _(obj: ScalarField) -> ScalarField:
    coarse = _restrict_array(obj.values)
    return ScalarField(GridSpec(*coarse.shape), coarse)


@restrict.register
def _(obj: VectorField) -> VectorField:
    c1 = _restrict_array(obj.comp1)
    c2 = _restrict_array(obj.comp2)
    return VectorField(GridSpec(*c1.shape), c1, c2)


@restrict.register
def _(obj: Deformation) -> Deformation:
    # averaging absolute coordinates maps the fine identity to the coarse one
    return Deformation(restrict(obj.phi))


@singledispatch
def prolong(obj):
    raise TypeError(f"cannot prolong {type(obj).__name__}")


@prolong.register
def _(obj: ScalarField) -> ScalarField:
    fine = GridSpec(2 * obj.spec.m, 2 * obj.spec.n)
    return ScalarField(fine, _prolong_array(obj.values, fine))


@prolong.register
def _(obj: VectorField) -> VectorField:
    fine = GridSpec(2 * obj.spec.m, 2 * obj.spec.n)
    return VectorField(fine, _prolong_array(obj.comp1, fine),
                       _prolong_array(obj.comp2, fine))


@prolong.register
def _(obj: Deformation) -> Deformation:
    # Transfer the displacement rather than the raw coordinates: the clamped
    # edge extrapolation would otherwise flatten the coordinate map along the
    # boundary ring and drive its one-sided determinant to zero.
    coarse_id = identity_deformation(obj.spec)
    disp = VectorField(obj.spec,
                       obj.phi.comp1 - coarse_id.phi.comp1,
                       obj.phi.comp2 - coarse_id.phi.comp2)
    fine_disp = prolong(disp)
    fine_id = identity_deformation(fine_disp.spec)
    return fine_id.plus(fine_disp)


def multilevel_register(R: ScalarField, T: ScalarField,
                        cfg: SolverConfig) -> RegistrationResult:
    """Coarse-to-fine registration over cfg.levels grid levels."""
    spec = R.spec
    if T.spec != spec:
        raise ConfigError("reference and template must share one grid")
    factor = 2 ** (cfg.levels - 1)
    if spec.m % factor or spec.n % factor:
        raise ConfigError(
            f"image dimensions {spec.m}x{spec.n} not divisible by {factor} "
            f"for {cfg.levels} levels"
        )

    pyramid_R = [R]
    pyramid_T = [T]
    for _ in range(cfg.levels - 1):
        pyramid_R.append(restrict(pyramid_R[-1]))
        pyramid_T.append(restrict(pyramid_T[-1]))

    coarsest = pyramid_R[-1].spec
    phi = identity_deformation(coarsest)
    f = ScalarField.full(coarsest, 1.0)

    trace: list[IterationRecord] = []
    level_traces: list[int] = []
    degraded = False
    result = None
    for level in range(cfg.levels, 0, -1):
        R_l = pyramid_R[level - 1]
        T_l = pyramid_T[level - 1]
        result = dirpm(R_l, T_l, phi, f, cfg, level=level)
        trace.extend(result.trace)
        level_traces.extend(result.level_traces)
        degraded = degraded or result.degraded
        if level > 1:
            phi = prolong(result.phi_final)
            f = prolong(result.f_final)
            f.values[0, :] = 1.0
            f.values[-1, :] = 1.0
            f.values[:, 0] = 1.0
            f.values[:, -1] = 1.0

    assert result is not None
    result.trace = trace
    result.level_traces = level_traces
    result.degraded = degraded
    return result
