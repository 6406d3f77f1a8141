"""Screened-Poisson solver: -a*Lap(w) + c*w = rhs with Dirichlet walls.

The Dirichlet value is imposed on the physical boundary of [0,1]^2, half a
cell outside the outermost cell centers, through reflected ghost values
(ghost = 2*g - w_edge).  This keeps the scheme second-order accurate; pinning
the outermost cell centers instead would drop it to first order.

All m*n cells are unknowns.  The operator is symmetric positive definite and
is solved by sparse Cholesky-style LU factorization; factors are cached per
(grid, a, c) since the displacement subproblem reuses one operator for both
components across all outer iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import GridSpec, ScalarField


class SolverError(RuntimeError):
    """Linear solve failed the residual contract."""

    def __init__(self, message: str, last_iterate: ScalarField, residual: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


@dataclass
class ScreenedPoissonProblem:
    a: float
    c: float
    rhs: ScalarField
    boundary_value: float = 0.0

    def __post_init__(self) -> None:
        if not (self.a > 0.0 and self.c >= 0.0):
            raise ValueError(
                f"need a > 0 and c >= 0, got a={self.a}, c={self.c}"
            )


def _dirichlet_1d(n: int, h: float) -> sp.dia_matrix:
    """1D second-difference matrix with reflected-ghost Dirichlet walls."""
    main = np.full(n, 2.0)
    main[0] = main[-1] = 3.0
    off = -np.ones(n - 1)
    return sp.diags([main, off, off], [0, 1, -1]) / h**2


def build_operator(spec: GridSpec, a: float, c: float) -> sp.csc_matrix:
    """Sparse matrix of -a*Lap + c*I over all m*n cells, row-major in j."""
    Lx = _dirichlet_1d(spec.m, spec.h_x)
    Ly = _dirichlet_1d(spec.n, spec.h_y)
    Ix = sp.identity(spec.m)
    Iy = sp.identity(spec.n)
    A = a * (sp.kron(Lx, Iy) + sp.kron(Ix, Ly)) + c * sp.identity(spec.m * spec.n)
    return A.tocsc()


_FACTOR_CACHE: dict = {}
_FACTOR_CACHE_MAX = 32


def _factorization(spec: GridSpec, a: float, c: float):
    key = (spec.m, spec.n, a, c)
    solver = _FACTOR_CACHE.get(key)
    if solver is None:
        if len(_FACTOR_CACHE) >= _FACTOR_CACHE_MAX:
            _FACTOR_CACHE.clear()
        solver = spla.factorized(build_operator(spec, a, c))
        _FACTOR_CACHE[key] = solver
    return solver


def _boundary_contribution(problem: ScreenedPoissonProblem) -> np.ndarray:
    """Ghost fold-in: each wall-adjacent cell gains 2*a*g/h^2 on the rhs."""
    spec = problem.rhs.spec
    extra = np.zeros((spec.m, spec.n))
    g = problem.boundary_value
    extra[0, :] += 2.0 * problem.a * g / spec.h_x**2
    extra[-1, :] += 2.0 * problem.a * g / spec.h_x**2
    extra[:, 0] += 2.0 * problem.a * g / spec.h_y**2
    extra[:, -1] += 2.0 * problem.a * g / spec.h_y**2
    return extra


def apply_operator(problem: ScreenedPoissonProblem, w: ScalarField) -> np.ndarray:
    """(-a*Lap + c) w including the ghost fold-in, as an effective rhs array."""
    spec = w.spec
    A = build_operator(spec, problem.a, problem.c)
    out = A @ w.values.ravel()
    return out.reshape(spec.m, spec.n) - _boundary_contribution(problem)


def residual(problem: ScreenedPoissonProblem, w: ScalarField) -> float:
    """Relative residual norm ||A w - rhs||_2 / max(||rhs||_2, 1)."""
    r = apply_operator(problem, w) - problem.rhs.values
    return float(np.linalg.norm(r) / max(np.linalg.norm(problem.rhs.values), 1.0))


def solve(problem: ScreenedPoissonProblem, tol: float = 1e-8,
          max_iter: int | None = None) -> ScalarField:
    """Solve to the residual tolerance; direct factorization, one pass."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    spec = problem.rhs.spec
    rhs = problem.rhs.values + _boundary_contribution(problem)
    solver = _factorization(spec, problem.a, problem.c)
    w = ScalarField(spec, solver(rhs.ravel()).reshape(spec.m, spec.n))
    res = residual(problem, w)
    if not np.isfinite(res) or res > tol:
        raise SolverError(
            f"direct solve residual {res:.3e} exceeds tol {tol:.1e}", w, res
        )
    return w
