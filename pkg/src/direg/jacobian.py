"""Jacobian determinant, folding detection, and deformation correction.

Each interior cell o = (i, j) of a deformation splits its four-neighbor patch
into four signed triangles (o with each pair of adjacent axis neighbors).
The signed triangle area divided by the cell area h_x*h_y is the quantity
everything here is built from: the cell determinant is half their sum, and
their minimum flags twists that the determinant alone can miss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import Deformation
from .grid import ScalarField


class NeighborhoodError(IndexError):
    """Triangle ratios requested at a cell without a full 4-neighborhood."""


class CorrectionError(RuntimeError):
    """Deformation correction did not untangle the grid within the sweep cap."""

    def __init__(self, message: str, best_phi: Deformation, r_min: float):
        super().__init__(message)
        self.best_phi = best_phi
        self.r_min = r_min


@dataclass
class FoldingReport:
    """Folding indicator field with the derived sets and summary numbers."""

    R: ScalarField
    S: list = field(default_factory=list)
    P: list = field(default_factory=list)
    R_min: float = np.inf
    gfr: float = 0.0


def _ratio_arrays(phi: Deformation) -> np.ndarray:
    """All four triangle-area ratios, shape (4, m, n); +inf outside interior.

    Order: (o,b,d), (o,d,a), (o,a,c), (o,c,b) with b/a the +x/-x neighbors
    and d/c the +y/-y neighbors.
    """
    spec = phi.spec
    p1, p2 = phi.phi.comp1, phi.phi.comp2
    scale = 0.5 / (spec.h_x * spec.h_y)

    def edges(arr):
        o = arr[1:-1, 1:-1]
        return (arr[2:, 1:-1] - o, arr[:-2, 1:-1] - o,
                arr[1:-1, 2:] - o, arr[1:-1, :-2] - o)

    b1, a1, d1, c1 = edges(p1)
    b2, a2, d2, c2 = edges(p2)
    out = np.full((4, spec.m, spec.n), np.inf)
    out[0, 1:-1, 1:-1] = scale * (b1 * d2 - b2 * d1)
    out[1, 1:-1, 1:-1] = scale * (d1 * a2 - d2 * a1)
    out[2, 1:-1, 1:-1] = scale * (a1 * c2 - a2 * c1)
    out[3, 1:-1, 1:-1] = scale * (c1 * b2 - c2 * b1)
    return out


def triangle_ratios(phi: Deformation, i: int, j: int) -> tuple[float, float, float, float]:
    """The four signed-area ratios at interior cell (i, j), 0-based."""
    spec = phi.spec
    if not (1 <= i <= spec.m - 2 and 1 <= j <= spec.n - 2):
        raise NeighborhoodError(
            f"cell ({i},{j}) lacks a full 4-neighborhood on a "
            f"{spec.m}x{spec.n} grid"
        )
    p1, p2 = phi.phi.comp1, phi.phi.comp2
    scale = 0.5 / (spec.h_x * spec.h_y)
    o = np.array([p1[i, j], p2[i, j]])
    b = np.array([p1[i + 1, j], p2[i + 1, j]]) - o
    a = np.array([p1[i - 1, j], p2[i - 1, j]]) - o
    d = np.array([p1[i, j + 1], p2[i, j + 1]]) - o
    c = np.array([p1[i, j - 1], p2[i, j - 1]]) - o

    def cross(v, w):
        return v[0] * w[1] - v[1] * w[0]

    return (scale * cross(b, d), scale * cross(d, a),
            scale * cross(a, c), scale * cross(c, b))


def jacobian_det(phi: Deformation) -> ScalarField:
    """Cell-centered determinant; one-sided differences on the boundary."""
    from .grid import diff_x, diff_y

    spec = phi.spec
    dx1 = diff_x(phi.phi.comp1, spec.h_x)
    dy1 = diff_y(phi.phi.comp1, spec.h_y)
    dx2 = diff_x(phi.phi.comp2, spec.h_x)
    dy2 = diff_y(phi.phi.comp2, spec.h_y)
    return ScalarField(spec, dx1 * dy2 - dy1 * dx2)


def folding_indicator(phi: Deformation, eps: float = 1e-2) -> FoldingReport:
    """Per-cell minimum triangle ratio with flagged cells and folding points.

    Boundary cells keep a +inf sentinel: the displacement vanishes there so
    they are never correction candidates.
    """
    spec = phi.spec
    ratios = _ratio_arrays(phi)
    R = ratios.min(axis=0)
    interior = R[1:-1, 1:-1]
    r_min = float(interior.min())
    gfr = float(np.count_nonzero(interior < 0.0)) / (spec.m * spec.n)
    flagged = np.argwhere(R < eps)
    S = [(int(i), int(j)) for i, j in flagged]
    P = _candidate_points(S, spec.m, spec.n)
    return FoldingReport(ScalarField(spec, R), S, P, r_min, gfr)


def _candidate_points(S, m: int, n: int) -> list:
    """Folding-point candidates: flagged cells and their 4-neighbors, interior only."""
    points = set()
    for i, j in S:
        for p, q in ((i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if 1 <= p <= m - 2 and 1 <= q <= n - 2:
                points.add((p, q))
    return sorted(points)


def _cell_min_ratio(p1: np.ndarray, p2: np.ndarray, i: int, j: int,
                    scale: float) -> float:
    o1, o2 = p1[i, j], p2[i, j]
    b1, b2 = p1[i + 1, j] - o1, p2[i + 1, j] - o2
    a1, a2 = p1[i - 1, j] - o1, p2[i - 1, j] - o2
    d1, d2 = p1[i, j + 1] - o1, p2[i, j + 1] - o2
    c1, c2 = p1[i, j - 1] - o1, p2[i, j - 1] - o2
    return scale * min(b1 * d2 - b2 * d1, d1 * a2 - d2 * a1,
                       a1 * c2 - a2 * c1, c1 * b2 - c2 * b1)


def _folding_degrees(ratios: np.ndarray) -> dict:
    """Number of distinct negative-triangle edges incident to each vertex."""
    neg = np.argwhere(ratios < 0.0)
    edge_sets: dict = {}
    # neighbor pairs per ratio index, matching _ratio_arrays order
    pairs = (((1, 0), (0, 1)), ((0, 1), (-1, 0)),
             ((-1, 0), (0, -1)), ((0, -1), (1, 0)))
    edges = set()
    for k, i, j in neg:
        (di1, dj1), (di2, dj2) = pairs[k]
        o = (i, j)
        v1 = (i + di1, j + dj1)
        v2 = (i + di2, j + dj2)
        for e in ((o, v1), (o, v2), (v1, v2)):
            edges.add(tuple(sorted(e)))
    deg: dict = {}
    for e in edges:
        for v in e:
            deg[v] = deg.get(v, 0) + 1
    return deg


def correct_deformation(phi: Deformation, eps: float = 1e-2,
                        max_sweeps: int = 50) -> tuple[Deformation, float]:
    """Relocate folding key points until every interior cell has R >= eps.

    Key points are processed in decreasing folding degree (lexicographic tie
    break).  A point moves to the centroid of its four neighbors, then is
    bisected back toward its old position as far as the five adjacent cells'
    indicators allow, which keeps the image disturbance minimal.
    """
    spec = phi.spec
    scale = 0.5 / (spec.h_x * spec.h_y)

    ratios = _ratio_arrays(phi)
    R = ratios.min(axis=0)
    if float(R[1:-1, 1:-1].min()) >= eps:
        return phi, float(R[1:-1, 1:-1].min())

    work = phi.copy()
    p1, p2 = work.phi.comp1, work.phi.comp2

    def five_cell_min(i: int, j: int) -> float:
        worst = np.inf
        for p, q in ((i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if 1 <= p <= spec.m - 2 and 1 <= q <= spec.n - 2:
                worst = min(worst, _cell_min_ratio(p1, p2, p, q, scale))
        return worst

    for _ in range(max_sweeps):
        ratios = _ratio_arrays(work)
        R = ratios.min(axis=0)
        interior_min = float(R[1:-1, 1:-1].min())
        if interior_min >= eps:
            return work, interior_min
        flagged = [(int(i), int(j)) for i, j in np.argwhere(R < eps)]
        candidates = _candidate_points(flagged, spec.m, spec.n)
        deg = _folding_degrees(ratios)
        candidates.sort(key=lambda p: (-deg.get(p, 0), p))
        for i, j in candidates:
            if five_cell_min(i, j) >= eps:
                continue
            old1, old2 = p1[i, j], p2[i, j]
            cen1 = 0.25 * (p1[i - 1, j] + p1[i + 1, j] + p1[i, j - 1] + p1[i, j + 1])
            cen2 = 0.25 * (p2[i - 1, j] + p2[i + 1, j] + p2[i, j - 1] + p2[i, j + 1])
            p1[i, j], p2[i, j] = cen1, cen2
            if five_cell_min(i, j) >= eps:
                # pull back toward the old position while staying valid
                lo, hi = 0.0, 1.0
                for _ in range(20):
                    mid = 0.5 * (lo + hi)
                    p1[i, j] = old1 + mid * (cen1 - old1)
                    p2[i, j] = old2 + mid * (cen2 - old2)
                    if five_cell_min(i, j) >= eps:
                        hi = mid
                    else:
                        lo = mid
                p1[i, j] = old1 + hi * (cen1 - old1)
                p2[i, j] = old2 + hi * (cen2 - old2)
            # else: keep the centroid and let the next sweep continue

    ratios = _ratio_arrays(work)
    best = float(ratios.min(axis=0)[1:-1, 1:-1].min())
    raise CorrectionError(
        f"grid not untangled after {max_sweeps} sweeps (R_min={best:.3e})",
        work, best,
    )
