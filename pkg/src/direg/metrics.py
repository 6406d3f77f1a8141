"""Quantitative evaluation of a registration result.

Intensities are assumed to live on the [0, 255] scale for PSNR and SSIM;
the relative SSD is scale invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Deformation
from .grid import ScalarField
from .jacobian import folding_indicator, jacobian_det

SSIM_WINDOW = 8
SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2


class DegenerateImagePair(ValueError):
    """Template equals reference exactly: relative SSD is undefined."""


@dataclass
class MetricsReport:
    re_ssd: float
    ssim: float
    psnr: float
    det_mean: float
    det_min: float
    det_max: float
    r_min: float
    gfr: float


def re_ssd(T: ScalarField, R: ScalarField, warped: ScalarField) -> float:
    """Sum of squared differences after warping, relative to before."""
    denom = float(np.sum((T.values - R.values) ** 2))
    if denom == 0.0:
        raise DegenerateImagePair("T and R are identical, Re_SSD undefined")
    return float(np.sum((warped.values - R.values) ** 2)) / denom


def psnr(R: ScalarField, warped: ScalarField) -> float:
    """Peak signal-to-noise ratio in dB on the [0,255] scale; +inf if equal."""
    mse = float(np.mean((warped.values - R.values) ** 2))
    if mse == 0.0:
        return np.inf
    return 10.0 * np.log10(255.0**2 / mse)


def _window_stats(a: np.ndarray, w: int):
    """Mean and mean-of-square over all w-by-w windows, stride 1."""
    view = np.lib.stride_tricks.sliding_window_view(a, (w, w))
    mu = view.mean(axis=(-2, -1))
    musq = (view**2).mean(axis=(-2, -1))
    return mu, musq


def ssim(R: ScalarField, warped: ScalarField) -> float:
    """Mean local SSIM, uniform 8x8 windows with stride 1.

    Falls back to a single global window when the image is smaller than the
    window.
    """
    a = R.values
    b = warped.values
    w = SSIM_WINDOW
    if min(a.shape) < w:
        mu_a, sq_a = np.array([[a.mean()]]), np.array([[(a**2).mean()]])
        mu_b, sq_b = np.array([[b.mean()]]), np.array([[(b**2).mean()]])
        mu_ab = np.array([[(a * b).mean()]])
    else:
        mu_a, sq_a = _window_stats(a, w)
        mu_b, sq_b = _window_stats(b, w)
        view = np.lib.stride_tricks.sliding_window_view(a * b, (w, w))
        mu_ab = view.mean(axis=(-2, -1))
    var_a = sq_a - mu_a**2
    var_b = sq_b - mu_b**2
    cov = mu_ab - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def jacobian_stats(phi: Deformation) -> tuple[float, float, float, float, float]:
    """(det_mean, det_min, det_max, r_min, gfr).

    Determinant statistics run over all cells, one-sided boundary stencils
    included; the folding numbers come from the interior indicator.
    """
    det = jacobian_det(phi).values
    report = folding_indicator(phi)
    return (float(det.mean()), float(det.min()), float(det.max()),
            report.R_min, report.gfr)


def compute_metrics(T: ScalarField, R: ScalarField, warped: ScalarField,
                    phi: Deformation) -> MetricsReport:
    det_mean, det_min, det_max, r_min, gfr = jacobian_stats(phi)
    try:
        ressd = re_ssd(T, R, warped)
    except DegenerateImagePair:
        ressd = np.nan
    return MetricsReport(
        re_ssd=ressd,
        ssim=ssim(R, warped),
        psnr=psnr(R, warped),
        det_mean=det_mean,
        det_min=det_min,
        det_max=det_max,
        r_min=r_min,
        gfr=gfr,
    )
