"""Discrete N-particle ansatz residuals, parameter solves, and stability.

The ring, ellipse, and vertical-line ansatz place N particles by the same
generators the simulator uses.  A configuration is an equilibrium when
the summed pair force on every particle vanishes; for the ring/ellipse
ansatz symmetry reduces this to the first force component at particle 0
(independent of chi) plus a chi-linear vertical condition at the quarter
point N/4.  Stability is classified from the eigenvalues of the exact
Jacobian of the N-particle right-hand side, with modes whose real part is
within ``eps_zero`` of zero excluded as symmetry (zero) modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (DegenerateDenominator, InvalidConfig, NoBracket, NoRoot,
                     NotDivisibleBy4, PairAtCutoff, ResidualTooLarge)
from .forces import ForceParams, compute_length_scales, f_A, f_R
from .sim import (TORUS, DomainSpec, ParticleState, ellipse_positions,
                  line_positions, rhs, ring_positions)
from .tensor import Homogeneous, TensorFieldSpec, tensor_at, tensor_gradient

STABLE = "Stable"
UNSTABLE = "Unstable"
MARGINAL = "Marginal"


@dataclass(frozen=True)
class AnsatzSpec:
    """Ring(R), Ellipse(R, r), or vertical Line through the center."""

    kind: str
    n_particles: int
    center: tuple = (0.5, 0.5)
    R: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ring", "ellipse", "line"):
            raise InvalidConfig(f"ansatz kind must be ring/ellipse/line, got {self.kind!r}")
        if self.n_particles < 2:
            raise InvalidConfig("ansatz needs at least 2 particles")

    def positions(self) -> np.ndarray:
        if self.kind == "ring":
            return ring_positions(self.center, self.R, self.n_particles)
        if self.kind == "ellipse":
            return ellipse_positions(self.center, self.R, self.r, self.n_particles)
        return line_positions(self.center, self.n_particles)


def _field(chi: float) -> TensorFieldSpec:
    return TensorFieldSpec(chi=chi, direction=Homogeneous())


def ansatz_residual(spec: AnsatzSpec, chi: float, params: ForceParams,
                    domain: DomainSpec) -> float:
    """Max over particles of |sum_k F|, i.e. N times the max speed."""
    state = ParticleState(t=0.0, positions=spec.positions())
    v = rhs(state, _field(chi), params, domain)
    return float(spec.n_particles * np.abs(v).max())


# ---------------------------------------------------------------------------
# ansatz parameter solves (plane geometry; all pair distances << cutoff)

def _ring_first_component(R: float, N: int, params: ForceParams) -> tuple:
    """(Re, Im) of the summed force on particle 0 of the ring ansatz.

    Displacements are x_0 - x_k (force-on-particle convention), so the
    horizontal component is positive when repulsion dominates, matching the
    sign structure of the continuous ring condition.
    """
    theta = 2.0 * np.pi * np.arange(1, N) / N
    dx = R * (1.0 - np.cos(theta))
    dy = -R * np.sin(theta)
    rho = np.hypot(dx, dy)
    c = params.delta_A * f_A(rho, params) + params.delta_R * f_R(rho, params)
    return float(np.sum(c * dx)), float(np.sum(c * dy))


def _ellipse_first_component(R: float, r: float, N: int, params: ForceParams) -> float:
    theta = 2.0 * np.pi * np.arange(1, N) / N
    dx = R * (1.0 - np.cos(theta))
    dy = -(R + r) * np.sin(theta)
    rho = np.hypot(dx, dy)
    c = params.delta_A * f_A(rho, params) + params.delta_R * f_R(rho, params)
    return float(np.sum(c * dx))


def _bracketed_newton(f, lo: float, hi: float, flo: float, fhi: float,
                      fd_scale: float = 1e-6) -> float:
    """Newton iteration with central-difference slope, safeguarded by the bracket."""
    x = 0.5 * (lo + hi)
    for _ in range(100):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx > 0.0) == (flo > 0.0):
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
        h = fd_scale * max(abs(x), lo)
        slope = (f(x + h) - f(x - h)) / (2.0 * h)
        x_new = x - fx / slope if slope != 0.0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 8.0 * np.finfo(float).eps * abs(x_new):
            return x_new
        x = x_new
    return x


def solve_discrete_ring(N: int, params: ForceParams,
                        scales=None) -> float:
    """Radius where the ring ansatz balances (chi = 1).

    Root of the first force component at particle 0 on (d_a/2, d_e/2]; the
    second component vanishes by symmetry (checked to 1e-14).
    """
    try:
        sc = scales if scales is not None else compute_length_scales(params)
    except Exception as exc:
        raise NoRoot(f"no length scales, hence no discrete ring: {exc}") from exc
    lo, hi = 0.5 * sc.d_a, 0.5 * sc.d_e
    g = lambda R: _ring_first_component(R, N, params)[0]
    flo, fhi = g(lo), g(hi)
    if not (flo > 0.0 > fhi):
        raise NoRoot(
            f"discrete ring condition has no sign change on ({lo:.6g}, {hi:.6g}]")
    root = _bracketed_newton(g, lo, hi, flo, fhi)
    im = _ring_first_component(root, N, params)[1]
    assert abs(im) <= 1e-14, f"vertical ring component {im!r} should vanish by symmetry"
    return root


def solve_discrete_ellipse(N: int, r: float, params: ForceParams,
                           scales=None) -> tuple:
    """(R, chi) of the discrete ellipse ansatz for a given elongation r.

    R solves the chi-independent horizontal condition at particle 0; chi
    follows from the chi-linear vertical condition at the quarter point,
    which requires N divisible by 4.  These are the necessary conditions
    at the symmetry particles; for r > 0 the equiangular ansatz is a
    near-equilibrium (intermediate particles keep an O(r) force), exactly
    as for the ring only at r = 0.
    """
    if N % 4 != 0:
        raise NotDivisibleBy4(f"quarter-point evaluation needs 4 | N, got N={N}")
    try:
        sc = scales if scales is not None else compute_length_scales(params)
    except Exception as exc:
        raise NoRoot(f"no length scales, hence no discrete ellipse: {exc}") from exc
    if not 0.0 <= r < sc.d_e:
        raise InvalidConfig(f"r must lie in [0, d_e={sc.d_e:.6g}), got {r}")
    R_e = min(0.5 * sc.d_e, sc.d_e - r)
    grid = np.linspace(R_e, R_e / 1000.0, 1000)
    g = lambda R: _ellipse_first_component(R, r, N, params)
    vals = np.array([g(R) for R in grid])
    bracket = None
    for i in range(len(grid) - 1):
        if vals[i] < 0.0 <= vals[i + 1]:
            bracket = (grid[i + 1], grid[i], vals[i + 1], vals[i])
            break
    if bracket is None:
        raise NoRoot(f"no discrete ellipse for r={r!r} at N={N}")
    lo, hi, flo, fhi = bracket
    R = _bracketed_newton(g, lo, hi, flo, fhi)

    # vertical condition at the quarter point: chi * A + B = 0
    j = N // 4
    theta = 2.0 * np.pi * np.arange(N) / N
    px = R * np.cos(theta)
    py = (R + r) * np.sin(theta)
    dx = np.delete(px[j] - px, j)
    dy = np.delete(py[j] - py, j)
    rho = np.hypot(dx, dy)
    A = params.delta_A * float(np.sum(f_A(rho, params) * dy))
    B = params.delta_R * float(np.sum(f_R(rho, params) * dy))
    if abs(A) <= 1e-15 * max(abs(B), 1e-300):
        raise DegenerateDenominator(
            f"attraction sum {A!r} too small at (R={R}, r={r}, N={N})")
    return R, -B / A


# ---------------------------------------------------------------------------
# Jacobian of the right-hand side

def _check_pairs_at_cutoff(rho: np.ndarray, params: ForceParams) -> None:
    """Reject states with a pair at the cutoff when the truncation jump matters.

    The hard cutoff makes the force discontinuous at |d| = cutoff with jump
    |c(cutoff)| * cutoff.  When that jump is below 1e-16 of the overall
    coefficient scale (true for the reference exponents) the derivative is
    well defined numerically and such pairs are treated as outside.
    """
    near = np.abs(rho - params.cutoff) < 1e-12
    if not np.any(near):
        return
    probe = np.linspace(0.0, params.cutoff, 257)
    cmax = float(np.max(np.abs(params.delta_A * f_A(probe, params)
                               + params.delta_R * f_R(probe, params))))
    jump = abs(params.delta_A * f_A(params.cutoff, params)
               + params.delta_R * f_R(params.cutoff, params)) * params.cutoff
    if jump > 1e-16 * max(cmax * params.cutoff, 1e-300):
        raise PairAtCutoff(
            f"{int(near.sum())} pair(s) within 1e-12 of the cutoff where the "
            f"force jump {jump:.3e} is not negligible")


def jacobian(state: ParticleState, field_spec: TensorFieldSpec,
             params: ForceParams, domain: DomainSpec, mode: str = "analytic",
             fd_step: float = 1e-8) -> np.ndarray:
    """2N x 2N derivative of the right-hand side at the given state.

    ``mode='analytic'`` assembles closed-form force and tensor-field
    derivatives; ``mode='fd'`` uses central differences with per-coordinate
    step ``fd_step * max(1, |x_i|)``.
    """
    pos = state.positions
    if domain.is_torus:
        pos = pos - np.floor(pos)
    n = pos.shape[0]
    d = pos[:, None, :] - pos[None, :, :]
    if domain.is_torus:
        d = d - np.floor(d + 0.5)
    rho = np.hypot(d[..., 0], d[..., 1])
    off = ~np.eye(n, dtype=bool)
    _check_pairs_at_cutoff(rho[off], params)

    if mode == "fd":
        return _jacobian_fd(state, field_spec, params, domain, fd_step)
    if mode != "analytic":
        raise InvalidConfig(f"jacobian mode must be 'analytic' or 'fd', got {mode!r}")

    np.fill_diagonal(rho, np.inf)
    inside = rho < params.cutoff
    # coefficients evaluated at the true distance (0 included: the dyadic
    # terms vanish there and f_A(0) = 0, f_R(0) = beta are the correct limits)
    rho_c = np.where(inside, rho, 1.0)
    ea, er = params.e_A, params.e_R
    fa = -params.gamma * rho_c * np.exp(-ea * rho_c)
    fr = (params.alpha * rho_c ** 2 + params.beta) * np.exp(-er * rho_c)
    dfa = (-params.gamma + params.gamma * ea * rho_c) * np.exp(-ea * rho_c)
    dfr = (2.0 * params.alpha * rho_c
           - er * (params.alpha * rho_c ** 2 + params.beta)) * np.exp(-er * rho_c)

    tmats = tensor_at(field_spec, pos)
    if tmats.ndim == 2:
        tmats = np.broadcast_to(tmats, (n, 2, 2))
    td = np.einsum("jab,jkb->jka", tmats, d)
    dhat = d / np.where(rho_c > 0.0, rho_c, 1.0)[..., None]
    eye = np.eye(2)
    DF = (params.delta_A * (dfa[..., None, None] * td[..., :, None] * dhat[..., None, :]
                            + fa[..., None, None] * tmats[:, None, :, :])
          + params.delta_R * (dfr[..., None, None] * d[..., :, None] * dhat[..., None, :]
                              + fr[..., None, None] * eye))
    DF = np.where(inside[..., None, None], DF, 0.0)

    J = -DF / n
    diag = DF.sum(axis=1) / n
    if not field_spec.is_homogeneous:
        # moving x_j also moves T(x_j): add (1/N) dA sum_k f_A (dT/dx_j) d_jk
        gradT = tensor_gradient(field_spec, pos)  # (n, a, c, b)
        fad = params.delta_A * fa[..., None] * d
        fad = np.where(inside[..., None], fad, 0.0)
        diag += np.einsum("jacb,jkc->jab", gradT, fad) / n
    J[np.arange(n), np.arange(n)] = diag
    return J.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def _jacobian_fd(state, field_spec, params, domain, fd_step):
    pos = state.positions
    n = pos.shape[0]
    J = np.empty((2 * n, 2 * n))
    for col in range(2 * n):
        i, c = divmod(col, 2)
        h = fd_step * max(1.0, abs(pos[i, c]))
        plus = pos.copy()
        plus[i, c] += h
        minus = pos.copy()
        minus[i, c] -= h
        vp = rhs(ParticleState(t=0.0, positions=plus), field_spec, params,
                 domain, accel="brute")
        vm = rhs(ParticleState(t=0.0, positions=minus), field_spec, params,
                 domain, accel="brute")
        J[:, col] = ((vp - vm) / (2.0 * h)).ravel()
    return J


# ---------------------------------------------------------------------------
# linear stability

@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    max_real_nonzero: float
    n_zero_modes: int
    classification: str

    @property
    def is_stable(self) -> bool:
        return self.classification == STABLE


def stability(spec: AnsatzSpec, chi: float, params: ForceParams,
              domain: DomainSpec, eps_zero: float = 1e-8,
              residual_gate: float = 1e-8) -> StabilityReport:
    """Eigenvalue classification of the linearized dynamics at an ansatz.

    Expected symmetry (zero) modes: 2 translations on the torus or plane
    with a homogeneous field, plus the rotation mode for the chi = 1 ring
    on the plane.
    """
    res = ansatz_residual(spec, chi, params, domain)
    if res > residual_gate:
        raise ResidualTooLarge(
            f"ansatz residual {res:.3e} exceeds gate {residual_gate:.1e}")
    state = ParticleState(t=0.0, positions=spec.positions())
    J = jacobian(state, _field(chi), params, domain, mode="analytic")
    lam = scipy.linalg.eigvals(J)
    re = lam.real
    zero = np.abs(re) <= eps_zero
    nonzero = re[~zero]
    max_real = float(nonzero.max()) if nonzero.size else 0.0
    if max_real < -eps_zero:
        cls = STABLE
    elif max_real > eps_zero:
        cls = UNSTABLE
    else:
        cls = MARGINAL
    return StabilityReport(eigenvalues=lam, max_real_nonzero=max_real,
                           n_zero_modes=int(zero.sum()), classification=cls)


def line_stability_threshold(N: int, params: ForceParams,
                             tol_chi: float = 0.01,
                             center=(0.5, 0.5), eps_zero: float = 1e-8) -> float:
    """Largest chi (to width tol_chi) for which the vertical line is stable.

    Bisection on the sign of the leading nonzero real part between chi = 0
    (must be stable) and chi = 1 (must be unstable), on the torus.
    """
    spec = AnsatzSpec(kind="line", n_particles=N, center=center)
    report = lambda chi: stability(spec, chi, params, TORUS, eps_zero=eps_zero)
    lo, hi = 0.0, 1.0
    r_lo, r_hi = report(lo), report(hi)
    if not (r_lo.max_real_nonzero < 0.0 < r_hi.max_real_nonzero):
        raise NoBracket(
            f"line not stable at chi=0 ({r_lo.classification}) or not "
            f"unstable at chi=1 ({r_hi.classification}) for N={N}")
    while hi - lo > tol_chi:
        mid = 0.5 * (lo + hi)
        if report(mid).max_real_nonzero < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def export_stability_csv(path, rows) -> None:
    """Write (chi, StabilityReport) rows as `chi,max_real_nonzero,n_zero_modes,classification`."""
    fmt = lambda x: format(float(x), ".17g")
    lines = ["chi,max_real_nonzero,n_zero_modes,classification"]
    for chi, rep in rows:
        lines.append(f"{fmt(chi)},{fmt(rep.max_real_nonzero)},"
                     f"{rep.n_zero_modes},{rep.classification}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
