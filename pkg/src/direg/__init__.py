"""2D diffeomorphic image registration with a relaxed Jacobian constraint."""

from .energy import (EnergyBreakdown, PenaltyVariant, assemble_f_rhs,
                     assemble_u_rhs, dphi, energy, phi)
from .fields import (Deformation, identity_deformation, warp,
                     warped_gradient)
from .grid import (GridSpec, ScalarField, VectorField, grad_central,
                   laplacian, vector_laplacian)
from .jacobian import (CorrectionError, FoldingReport, correct_deformation,
                       folding_indicator, jacobian_det, triangle_ratios)
from .linsolve import ScreenedPoissonProblem, SolverError, solve
from .metrics import (MetricsReport, jacobian_stats, psnr, re_ssd, ssim)
from .registration import (ConfigError, RegistrationResult, SolverConfig,
                           dirpm, multilevel_register, prolong, restrict)
from .synth import ExampleSpec, generate

__all__ = [
    "ConfigError", "CorrectionError", "Deformation", "EnergyBreakdown",
    "ExampleSpec", "FoldingReport", "GridSpec", "MetricsReport",
    "PenaltyVariant", "RegistrationResult", "ScalarField",
    "ScreenedPoissonProblem", "SolverConfig", "SolverError", "VectorField",
    "assemble_f_rhs", "assemble_u_rhs", "correct_deformation", "dirpm",
    "dphi", "energy", "folding_indicator", "generate", "grad_central",
    "identity_deformation", "jacobian_det", "jacobian_stats", "laplacian",
    "multilevel_register", "phi", "prolong", "psnr", "re_ssd", "restrict",
    "solve", "ssim", "triangle_ratios", "vector_laplacian", "warp",
    "warped_gradient",
]

__version__ = "0.1.0"
