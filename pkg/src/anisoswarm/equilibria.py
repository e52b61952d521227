"""Continuous equilibrium conditions: rings, ellipses, and stripes.

For a homogeneous tensor field with s = (0, 1) the candidate equilibria of
the mean-field dynamics reduce to one-dimensional integral conditions.
Writing ``c = delta_A f_A + delta_R f_R`` (untruncated; the cutoff only
applies in simulation):

* ring of radius R:
  ``int_0^pi c(R sqrt((1-cos phi)^2 + sin^2 phi)) (1 - cos phi) dphi = 0``
* ellipse with semi-axes (R, R+r), first condition:
  ``int_0^pi c(w1) R (1 - cos phi) w2 dphi = 0`` with
  ``w1 = sqrt(R^2 (1-cos phi)^2 + (R+r)^2 sin^2 phi)``,
  ``w2 = sqrt(R^2 sin^2 phi + (R+r)^2 cos^2 phi)``
* second ellipse condition, linear in chi:
  ``int_{pi/2}^{3pi/2} (chi dA fA + dR fR)(w3) (R+r)(1 - sin phi) w2 dphi``
  with ``w3 = sqrt(R^2 cos^2 phi + (R+r)^2 (1-sin phi)^2)``
* vertical stripe of width Delta: the first force component integrated
  over ``[x1, Delta - x1] x [-cutoff, cutoff]`` must vanish for every x1.

All integrals use composite Gauss-Legendre panels and are accepted only
when doubling the panel count moves the value by less than the
refinement tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (DegenerateDenominator, InvalidConfig, NoRoot,
                     QuadratureNotConverged)
from .forces import (ForceParams, LengthScales, compute_length_scales, f_A,
                     f_R, radial_coefficient)


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule with a panel-doubling convergence check."""

    panels: int = 64
    nodes_per_panel: int = 8
    refinement_tol: float = 1e-10

    def __post_init__(self):
        if self.panels < 1 or self.nodes_per_panel < 2:
            raise InvalidConfig("need panels >= 1 and nodes_per_panel >= 2")
        if self.refinement_tol < 0:
            raise InvalidConfig("refinement_tol must be >= 0")


DEFAULT_QUADRATURE = QuadratureSpec()


@lru_cache(maxsize=64)
def _leggauss(nodes: int):
    return np.polynomial.legendre.leggauss(nodes)


def _graded_edges(a: float, b: float, panels: int, points) -> np.ndarray:
    """Uniform panel edges plus geometric cascades toward the given points.

    The ellipse integrands develop boundary layers of width ~ R/(R+r) at
    known angles; cascades (halving widths down to rounding level) keep the
    composite rule accurate uniformly as the layer shrinks with R.
    """
    edges = {float(x) for x in np.linspace(a, b, panels + 1)}
    h = (b - a) / panels
    for p in points:
        if not a <= p <= b:
            continue
        edges.add(float(p))
        w = h
        for _ in range(52):
            w *= 0.5
            if w < 1e-16 * (b - a):
                break
            for q in (p - w, p + w):
                if a < q < b:
                    edges.add(float(q))
    return np.array(sorted(edges))


def _rule_from_edges(edges: np.ndarray, nodes: int):
    xg, wg = _leggauss(nodes)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return x, w


def _panel_rule(a: float, b: float, panels: int, nodes: int, points=()):
    """Nodes and weights of the composite rule on [a, b]."""
    if points:
        return _rule_from_edges(_graded_edges(a, b, panels, points), nodes)
    return _rule_from_edges(np.linspace(a, b, panels + 1), nodes)


def integrate_checked(f, a: float, b: float, quad: QuadratureSpec,
                      refine_toward=()) -> float:
    """Integrate a vectorized integrand, verifying panel-doubling stability.

    The change under doubling is measured against the integral of |f|; a
    near-zero value at a root of the condition cannot demand relative
    accuracy beyond the integrand mass (the remaining change there is
    rounding noise, which bracketing root finders absorb).
    """
    x1, w1 = _panel_rule(a, b, quad.panels, quad.nodes_per_panel, refine_toward)
    i1 = float(np.sum(w1 * f(x1)))
    x2, w2 = _panel_rule(a, b, 2 * quad.panels, quad.nodes_per_panel, refine_toward)
    y2 = f(x2)
    i2 = float(np.sum(w2 * y2))
    l1 = float(np.sum(np.abs(w2 * y2)))
    scale = max(l1, 1e-300)
    if abs(i2 - i1) > quad.refinement_tol * scale:
        raise QuadratureNotConverged(
            f"doubling panels moved the integral by {abs(i2 - i1):.3e} "
            f"(tol {quad.refinement_tol:.1e} * {scale:.3e})")
    return i2


def _scales(params: ForceParams, scales: LengthScales | None) -> LengthScales:
    return scales if scales is not None else compute_length_scales(params)


# ---------------------------------------------------------------------------
# ring conditions

def ring_G(R: float, params: ForceParams,
           quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Left-hand side of the ring equilibrium condition at radius R."""
    if R <= 0:
        raise InvalidConfig(f"ring radius must be > 0, got {R}")

    def integrand(phi):
        chord = R * np.sqrt((1.0 - np.cos(phi)) ** 2 + np.sin(phi) ** 2)
        return radial_coefficient(chord, 1.0, params) * (1.0 - np.cos(phi))

    return integrate_checked(integrand, 0.0, math.pi, quad)


def ring_vertical_G(R: float, chi: float, params: ForceParams,
                    quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Vertical counterpart of the ring condition (must also vanish when chi < 1)."""

    def integrand(phi):
        chord = R * np.sqrt(np.cos(phi) ** 2 + (1.0 - np.sin(phi)) ** 2)
        return radial_coefficient(chord, chi, params) * (1.0 - np.sin(phi))

    return integrate_checked(integrand, 0.5 * math.pi, 1.5 * math.pi, quad)


def _bisect_then_secant(f, lo: float, hi: float, flo: float, fhi: float,
                        bracket_width: float = 1e-10) -> float:
    """Refine a sign-change bracket by bisection, then polish with secant."""
    while hi - lo > bracket_width:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    x0, x1 = lo, hi
    f0, f1 = flo, fhi
    for _ in range(60):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not lo <= x2 <= hi:
            break
        x0, f0, x1 = x1, f1, x2
        f1 = f(x1)
        if f1 == 0.0 or abs(x1 - x0) <= 4.0 * np.finfo(float).eps * abs(x1):
            break
    return x1


def solve_ring_radius(params: ForceParams,
                      quad: QuadratureSpec = DEFAULT_QUADRATURE,
                      scales: LengthScales | None = None) -> float:
    """Unique ring radius in (d_a/2, d_e/2] where the ring condition vanishes."""
    try:
        sc = _scales(params, scales)
    except Exception as exc:
        raise NoRoot(f"no length scales, hence no ring radius: {exc}") from exc
    lo, hi = 0.5 * sc.d_a, 0.5 * sc.d_e
    g = lambda R: ring_G(R, params, quad)
    flo, fhi = g(lo), g(hi)
    if not (flo > 0.0 > fhi):
        raise NoRoot(
            f"ring condition does not change sign on ({lo:.6g}, {hi:.6g}]: "
            f"G(lo)={flo:.3e}, G(hi)={fhi:.3e}")
    return _bisect_then_secant(g, lo, hi, flo, fhi)


# ---------------------------------------------------------------------------
# ellipse conditions

def _w123(phi, R, r):
    w1 = np.sqrt(R ** 2 * (1.0 - np.cos(phi)) ** 2 + (R + r) ** 2 * np.sin(phi) ** 2)
    w2 = np.sqrt(R ** 2 * np.sin(phi) ** 2 + (R + r) ** 2 * np.cos(phi) ** 2)
    w3 = np.sqrt(R ** 2 * np.cos(phi) ** 2 + (R + r) ** 2 * (1.0 - np.sin(phi)) ** 2)
    return w1, w2, w3


def ellipse_G(R: float, r: float, params: ForceParams,
              quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """First ellipse condition (horizontal force balance at the minor vertex)."""
    if R < 0 or r < 0:
        raise InvalidConfig("R and r must be >= 0")

    def integrand(phi):
        w1, w2, _ = _w123(phi, R, r)
        return radial_coefficient(w1, 1.0, params) * R * (1.0 - np.cos(phi)) * w2

    # w2 and w1 develop layers of width ~ R/(R+r) at pi/2 and pi
    return integrate_checked(integrand, 0.0, math.pi, quad,
                             refine_toward=(0.5 * math.pi, math.pi))


def _ellipse_H_parts(R: float, r: float, params: ForceParams,
                     quad: QuadratureSpec):
    """Attraction- and repulsion-weighted halves of the second condition."""

    def base(phi):
        _, w2, w3 = _w123(phi, R, r)
        return w3, (R + r) * (1.0 - np.sin(phi)) * w2

    def ia(phi):
        w3, weight = base(phi)
        return params.delta_A * f_A(w3, params) * weight

    def ib(phi):
        w3, weight = base(phi)
        return params.delta_R * f_R(w3, params) * weight

    lo, hi = 0.5 * math.pi, 1.5 * math.pi
    ends = (lo, hi)
    return (integrate_checked(ia, lo, hi, quad, refine_toward=ends),
            integrate_checked(ib, lo, hi, quad, refine_toward=ends))


def ellipse_H(R: float, r: float, chi: float, params: ForceParams,
              quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Second ellipse condition (vertical force balance at the major vertex)."""
    A, B = _ellipse_H_parts(R, r, params, quad)
    return chi * A + B


def chi_for_tuple(R: float, r: float, params: ForceParams,
                  quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """The unique chi making the second condition vanish at (R, r).

    The condition is linear in chi, so chi = -B/A with A the attraction-
    and B the repulsion-weighted integral.  Values outside [0, 1] are
    returned as computed; containment is only guaranteed on the branch.
    """
    A, B = _ellipse_H_parts(R, r, params, quad)
    if abs(A) <= 1e-15 * max(abs(B), 1e-300):
        raise DegenerateDenominator(
            f"attraction-weighted integral {A!r} too small at (R={R}, r={r})")
    return -B / A


def solve_trivial_r(params: ForceParams,
                    quad: QuadratureSpec = DEFAULT_QUADRATURE,
                    scales: LengthScales | None = None) -> float:
    """Length of the degenerate (zero minor axis) ellipse state.

    Root of ``int_0^pi c(r |sin phi|) (1 - cos phi) |cos phi| dphi`` in
    (d_a, d_e); the integrand is positive up to d_a, and a negative value
    at d_e is required (long-range attraction dominating).
    """
    try:
        sc = _scales(params, scales)
    except Exception as exc:
        raise NoRoot(f"no length scales, hence no trivial state: {exc}") from exc

    def gbar(r):
        def integrand(phi):
            return (radial_coefficient(r * np.abs(np.sin(phi)), 1.0, params)
                    * (1.0 - np.cos(phi)) * np.abs(np.cos(phi)))
        # |cos phi| has a kink at pi/2; keep an edge there
        return integrate_checked(integrand, 0.0, math.pi, quad,
                                 refine_toward=(0.5 * math.pi,))

    flo = gbar(sc.d_a)
    if flo <= 0.0:
        raise NoRoot(f"expected positive condition value at d_a, got {flo:.3e}")
    fhi = gbar(sc.d_e)
    if fhi >= 0.0:
        raise NoRoot(
            f"condition value {fhi:.3e} at d_e is not negative; "
            "no trivial ellipse state")
    return _bisect_then_secant(gbar, sc.d_a, sc.d_e, flo, fhi)


def solve_ellipse_R(r: float, params: ForceParams,
                    quad: QuadratureSpec = DEFAULT_QUADRATURE,
                    scales: LengthScales | None = None,
                    grid_points: int = 1000) -> float:
    """Largest positive root R of the first ellipse condition for given r.

    The search box keeps the integrand argument below d_e, i.e.
    ``R <= R_e = min(d_e / 2, d_e - r)``.  Raises :class:`NoRoot` when only
    the trivial state exists (r beyond the branch).
    """
    sc = _scales(params, scales)
    if not 0.0 <= r < sc.d_e:
        raise InvalidConfig(f"r must lie in [0, d_e={sc.d_e:.6g}), got {r}")
    R_e = min(0.5 * sc.d_e, sc.d_e - r)

    # bracket scan at fixed resolution (no convergence check; the polish
    # below uses the checked evaluator); the lowest point sits essentially
    # at zero because the root runs into R = 0 as r approaches the branch end
    phi, w = _panel_rule(0.0, math.pi, 2 * quad.panels, quad.nodes_per_panel,
                         points=(0.5 * math.pi, math.pi))
    grid = np.linspace(R_e, R_e * 1e-9, grid_points)
    w1 = np.sqrt(grid[:, None] ** 2 * (1.0 - np.cos(phi)) ** 2
                 + (grid[:, None] + r) ** 2 * np.sin(phi) ** 2)
    w2 = np.sqrt(grid[:, None] ** 2 * np.sin(phi) ** 2
                 + (grid[:, None] + r) ** 2 * np.cos(phi) ** 2)
    vals = np.sum(w * radial_coefficient(w1, 1.0, params)
                  * grid[:, None] * (1.0 - np.cos(phi)) * w2, axis=1)
    bracket = None
    for i in range(grid_points - 1):
        if vals[i] < 0.0 <= vals[i + 1]:
            bracket = (grid[i + 1], grid[i], vals[i + 1], vals[i])
            break
    if bracket is None:
        raise NoRoot(f"no nontrivial ellipse for r={r!r}; only the trivial state")
    lo, hi, flo, fhi = bracket
    g = lambda R: ellipse_G(R, r, params, quad)
    return _bisect_then_secant(g, lo, hi, flo, fhi)


# ---------------------------------------------------------------------------
# the (R, r, chi) branch

def eccentricity(R: float, r: float) -> float:
    """sqrt(1 - (R/(R+r))^2); zero for a ring, one for the degenerate state."""
    if R + r <= 0.0:
        return 0.0
    ratio = R / (R + r)
    return math.sqrt(max(0.0, 1.0 - ratio * ratio))


@dataclass(frozen=True)
class EllipseTuple:
    """One point of the equilibrium branch: semi-axes (R, R+r), chi, eccentricity."""

    R: float
    r: float
    chi: float | None
    eccentricity: float

    @property
    def chi_in_range(self) -> bool:
        return self.chi is not None and 0.0 <= self.chi <= 1.0


@dataclass(frozen=True)
class EquilibriumBranch:
    """Branch from the ring (R_bar, 0) to the degenerate state (0, r_bar).

    Along the list r strictly increases, R strictly decreases, and chi
    strictly decreases (so chi increases along decreasing r).
    """

    tuples: tuple

    def __post_init__(self):
        ts = tuple(self.tuples)
        if len(ts) < 2:
            raise InvalidConfig("a branch needs at least two tuples")
        for a, b in zip(ts, ts[1:]):
            if not (a.r < b.r and a.R > b.R):
                raise InvalidConfig(
                    f"branch monotonicity violated between r={a.r} and r={b.r}")
            if a.chi is not None and b.chi is not None and not a.chi > b.chi:
                raise InvalidConfig(
                    f"chi must strictly decrease along the branch at r={b.r}")
        object.__setattr__(self, "tuples", ts)


def ellipse_branch(params: ForceParams, n_points: int = 32,
                   quad: QuadratureSpec = DEFAULT_QUADRATURE) -> EquilibriumBranch:
    """Sample the branch on n_points values of r in [0, r_bar), plus the endpoint."""
    if n_points < 2:
        raise InvalidConfig("n_points must be >= 2")
    sc = compute_length_scales(params)
    r_bar = solve_trivial_r(params, quad, sc)
    tuples = []
    for i in range(n_points):
        r = r_bar * i / n_points
        R = solve_ellipse_R(r, params, quad, sc)
        chi = chi_for_tuple(R, r, params, quad)
        tuples.append(EllipseTuple(R=R, r=r, chi=chi,
                                   eccentricity=eccentricity(R, r)))
    chi_bar = chi_for_tuple(0.0, r_bar, params, quad)
    tuples.append(EllipseTuple(R=0.0, r=r_bar, chi=chi_bar, eccentricity=1.0))
    return EquilibriumBranch(tuples=tuple(tuples))


def export_branch_csv(path, branch: EquilibriumBranch, params: ForceParams,
                      quad: QuadratureSpec = DEFAULT_QUADRATURE) -> None:
    """Write `r,R,chi,eccentricity,residual_G,residual_H` rows (17 digits)."""
    fmt = lambda x: format(float(x), ".17g")
    lines = ["r,R,chi,eccentricity,residual_G,residual_H"]
    for tup in branch.tuples:
        res_g = ellipse_G(tup.R, tup.r, params, quad)
        res_h = ellipse_H(tup.R, tup.r, tup.chi, params, quad) if tup.chi is not None else float("nan")
        lines.append(",".join(fmt(v) for v in
                              (tup.r, tup.R, tup.chi, tup.eccentricity, res_g, res_h)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# stripe pattern

def _strip_first_component(a: float, b: float, params: ForceParams,
                           quad: QuadratureSpec) -> float:
    """First force component integrated over [a, b] x [-cutoff, cutoff].

    The first row of T = diag(1, chi) is (1, 0), so chi drops out of this
    component.  The y-extent is truncated at the cutoff where the simulated
    force vanishes identically; with the reference exponents the
    untruncated tail is far below the refinement tolerance.
    """
    cut = params.cutoff

    def value(panels):
        x, wx = _panel_rule(a, b, panels, quad.nodes_per_panel)
        y, wy = _panel_rule(-cut, cut, panels, quad.nodes_per_panel)
        rho = np.hypot(x[:, None], y[None, :])
        fx = (params.delta_A * f_A(rho, params)
              + params.delta_R * f_R(rho, params)) * x[:, None]
        total = float(wx @ fx @ wy)
        l1 = float(np.abs(wx) @ np.abs(fx) @ np.abs(wy))
        return total, l1

    i1, _ = value(quad.panels)
    i2, l1 = value(2 * quad.panels)
    scale = max(l1, 1e-300)
    if abs(i2 - i1) > quad.refinement_tol * scale:
        raise QuadratureNotConverged(
            f"stripe integral moved by {abs(i2 - i1):.3e} under panel doubling")
    return i2


def stripe_condition(delta: float, x1: float, params: ForceParams, chi: float,
                     quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Stripe equilibrium defect: first force component over [x1, Delta-x1] x R.

    A vertical stripe of width Delta is an equilibrium only if this
    vanishes for every x1 in [0, Delta/2); generically it does not.
    """
    if delta <= 0:
        raise InvalidConfig(f"delta must be > 0, got {delta}")
    if not 0.0 <= x1 <= 0.5 * delta:
        raise InvalidConfig(f"x1 must lie in [0, delta/2], got {x1}")
    if not 0.0 <= chi <= 1.0:
        raise InvalidConfig(f"chi must lie in [0, 1], got {chi}")
    if x1 == 0.5 * delta:
        return 0.0
    return _strip_first_component(x1, delta - x1, params, quad)
