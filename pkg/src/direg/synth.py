"""Deterministic synthetic template/reference pairs for desk-scale runs.

All shapes are rasterized with a cosine ramp two cells wide on each side of
the analytic boundary, so image gradients stay bounded and the descent does
not stall on hard edges.  Generators are pure functions: same spec, same
bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, ScalarField

EXAMPLE_NAMES = ("circle_square", "disc_to_c", "big_small_circle",
                 "translated_blob")


@dataclass(frozen=True)
class ExampleSpec:
    name: str
    size: tuple[int, int]

    def __post_init__(self) -> None:
        if self.name not in EXAMPLE_NAMES:
            raise ValueError(
                f"unknown example {self.name!r}; choose from {EXAMPLE_NAMES}"
            )
        for s in self.size:
            if s < 32 or (s & (s - 1)) != 0:
                raise ValueError(f"size components must be powers of two >= 32, got {self.size}")


def _ramp(signed_dist: np.ndarray, width: float) -> np.ndarray:
    """0 outside, 1 inside, cosine transition over [-width, width]."""
    t = np.clip(signed_dist / width, -1.0, 1.0)
    return 0.5 * (1.0 + np.sin(0.5 * np.pi * t))


def _disc(X, Y, cx, cy, r, width):
    return _ramp(r - np.hypot(X - cx, Y - cy), width)


def _square(X, Y, cx, cy, half, width):
    # signed distance to an axis-aligned square boundary (positive inside)
    dx = np.abs(X - cx) - half
    dy = np.abs(Y - cy) - half
    outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
    inside = np.minimum(np.maximum(dx, dy), 0.0)
    return _ramp(-(outside + inside), width)


def generate(spec: ExampleSpec) -> tuple[ScalarField, ScalarField]:
    """Return (template, reference) with intensities in [0, 255]."""
    m, n = spec.size
    grid = GridSpec(m, n)
    X, Y = grid.cell_centers()
    width = 2.0 * max(grid.h_x, grid.h_y)

    if spec.name == "circle_square":
        # disc and square of equal area
        half = 0.25
        r = 2.0 * half / np.sqrt(np.pi)
        T = _disc(X, Y, 0.5, 0.5, r, width)
        R = _square(X, Y, 0.5, 0.5, half, width)
    elif spec.name == "disc_to_c":
        T = _disc(X, Y, 0.5, 0.5, 0.3, width)
        r_mid = np.hypot(X - 0.5, Y - 0.5)
        annulus = _ramp(0.35 - r_mid, width) * _ramp(r_mid - 0.15, width)
        theta = np.arctan2(Y - 0.5, X - 0.5)
        # open the annulus along +x to form the letter C; arc-length distance
        gap = _ramp(r_mid * (np.abs(theta) - 0.45), width)
        R = annulus * gap
    elif spec.name == "big_small_circle":
        T = _disc(X, Y, 0.5, 0.5, 0.3, width)
        R = _disc(X, Y, 0.5, 0.5, 0.12, width)
    else:  # translated_blob
        sigma = 0.12
        T = np.exp(-((X - 0.45) ** 2 + (Y - 0.5) ** 2) / (2 * sigma**2))
        R = np.exp(-((X - 0.55) ** 2 + (Y - 0.5) ** 2) / (2 * sigma**2))

    return (ScalarField(grid, 255.0 * T), ScalarField(grid, 255.0 * R))
