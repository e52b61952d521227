"""Scalar force coefficients and the anisotropic pair force.

The pair interaction combines a repulsion coefficient
``f_R(d) = (alpha d^2 + beta) exp(-e_R d)`` and an attraction coefficient
``f_A(d) = -gamma d exp(-e_A d)``.  The repulsive part acts along the
displacement vector, the attractive part along the tensor-transformed
displacement ``T d``, and everything is truncated at a hard spherical
cutoff.  The module also locates the two characteristic length scales of
the combined coefficient: ``d_a`` (zero crossing, repulsion below,
attraction above) and ``d_e`` (end of the strict-decrease interval, taken
as the argmin).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, NoSignChange

#: relative tolerance for the d_a root and the d_e argmin
LENGTH_SCALE_TOL = 1e-12


@dataclass(frozen=True)
class ForceParams:
    """Coefficients of the repulsion/attraction pair force.

    Defaults reproduce the reference parameter set (alpha=270, beta=0.1,
    gamma=35, e_A=95, e_R=100) with unscaled forces and a cutoff of 0.5
    domain units.  ``delta_A`` and ``delta_R`` scale the attraction and
    repulsion parts independently.
    """

    alpha: float = 270.0
    beta: float = 0.1
    gamma: float = 35.0
    e_A: float = 95.0
    e_R: float = 100.0
    delta_A: float = 1.0
    delta_R: float = 1.0
    cutoff: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "e_A", "e_R",
                     "delta_A", "delta_R", "cutoff"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidConfig(f"{name} must be finite and >= 0, got {v}")
        if not 0.0 <= self.delta_A <= 1.0:
            raise InvalidConfig(f"delta_A must lie in [0, 1], got {self.delta_A}")
        if not 0.0 <= self.delta_R <= 1.0:
            raise InvalidConfig(f"delta_R must lie in [0, 1], got {self.delta_R}")
        if self.cutoff <= 0.0:
            raise InvalidConfig(f"cutoff must be > 0, got {self.cutoff}")


@dataclass(frozen=True)
class LengthScales:
    """Characteristic lengths of the combined coefficient.

    ``d_a``: unique zero crossing (positive coefficient below, negative
    above).  ``d_e``: argmin of the coefficient; the coefficient is
    strictly decreasing on [0, d_e].
    """

    d_a: float
    d_e: float


def f_R(dist, params: ForceParams):
    """Repulsion coefficient ``(alpha d^2 + beta) exp(-e_R d)``, >= 0."""
    d = np.asarray(dist, dtype=float)
    out = (params.alpha * d * d + params.beta) * np.exp(-params.e_R * d)
    return out if out.ndim else float(out)


def f_A(dist, params: ForceParams):
    """Attraction coefficient ``-gamma d exp(-e_A d)``, <= 0 with f_A(0)=0."""
    d = np.asarray(dist, dtype=float)
    out = -params.gamma * d * np.exp(-params.e_A * d)
    return out if out.ndim else float(out)


def radial_coefficient(dist, chi: float, params: ForceParams, truncated: bool = False):
    """Signed force coefficient along a tensor eigendirection with eigenvalue chi.

    ``chi * delta_A * f_A + delta_R * f_R``; ``chi=1`` gives the coefficient
    along l.  With ``truncated=True`` the coefficient is zeroed at distances
    >= cutoff (the simulation convention); the default is the untruncated
    form used by the equilibrium integrals.
    """
    d = np.asarray(dist, dtype=float)
    out = chi * params.delta_A * f_A(d, params) + params.delta_R * f_R(d, params)
    if truncated:
        out = np.where(d >= params.cutoff, 0.0, out)
    return out if np.ndim(out) else float(out)


def total_force(d: np.ndarray, T: np.ndarray, params: ForceParams) -> np.ndarray:
    """Total pair force ``delta_A f_A(|d|) T d + delta_R f_R(|d|) d``.

    Returns the zero vector for ``|d| >= cutoff`` (hard spherical cutoff).
    """
    d = np.asarray(d, dtype=float)
    rho = float(np.hypot(d[0], d[1]))
    if rho >= params.cutoff:
        return np.zeros(2)
    fa = params.delta_A * f_A(rho, params)
    fr = params.delta_R * f_R(rho, params)
    return fa * (np.asarray(T, dtype=float) @ d) + fr * d


def compute_length_scales(params: ForceParams, rel_tol: float = LENGTH_SCALE_TOL) -> LengthScales:
    """Locate d_a (bisection) and d_e (golden section) on (0, cutoff).

    Raises :class:`NoSignChange` when the combined coefficient never
    crosses zero, e.g. for a purely repulsive configuration.
    """
    coef = lambda d: radial_coefficient(d, 1.0, params)
    grid = np.linspace(0.0, params.cutoff, 4097)
    vals = coef(grid)
    neg = np.nonzero(vals < 0.0)[0]
    if neg.size == 0 or neg[0] == 0:
        raise NoSignChange(
            "delta_A*f_A + delta_R*f_R has no positive-to-negative crossing "
            f"on (0, {params.cutoff})")
    lo, hi = grid[neg[0] - 1], grid[neg[0]]
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if coef(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    d_a = 0.5 * (lo + hi)

    # golden-section argmin on [d_a, cutoff]; the coefficient decreases
    # through d_a so the minimum lies to its right
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = d_a, params.cutoff
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = coef(c), coef(d)
    while b - a > rel_tol * max(abs(a), abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = coef(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = coef(d)
    d_e = 0.5 * (a + b)
    return LengthScales(d_a=d_a, d_e=d_e)
