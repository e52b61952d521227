"""Anisotropic repulsive-attractive interacting-particle toolkit."""

from .forces import ForceParams, LengthScales, compute_length_scales
from .tensor import (Circular, Homogeneous, PiecewiseGrid, RotationAngle,
                     SinusoidalAngle, TensorFieldSpec, tensor_at)
from .sim import (DomainSpec, ParticleState, SimConfig, SimResult, init_state,
                  min_image, rhs, simulate, step)
from .equilibria import (EllipseTuple, EquilibriumBranch, QuadratureSpec,
                         ellipse_branch, solve_ring_radius, stripe_condition)
from .discrete import (AnsatzSpec, StabilityReport, ansatz_residual, jacobian,
                       line_stability_threshold, solve_discrete_ellipse,
                       solve_discrete_ring, stability)
from .metrics import ClassifierConfig, PatternSummary, classify, fit_ellipse

__version__ = "0.1.0"

__all__ = [
    "AnsatzSpec", "Circular", "ClassifierConfig", "DomainSpec", "EllipseTuple",
    "EquilibriumBranch", "ForceParams", "Homogeneous", "LengthScales",
    "ParticleState", "PatternSummary", "PiecewiseGrid", "QuadratureSpec",
    "RotationAngle", "SimConfig", "SimResult", "SinusoidalAngle",
    "StabilityReport", "TensorFieldSpec", "ansatz_residual", "classify",
    "compute_length_scales", "ellipse_branch", "fit_ellipse", "init_state",
    "jacobian", "line_stability_threshold", "min_image", "rhs", "simulate",
    "solve_discrete_ellipse", "solve_discrete_ring", "solve_ring_radius",
    "stability", "step", "stripe_condition", "tensor_at",
]
