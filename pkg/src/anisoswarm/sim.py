"""N-particle dynamics on the unit torus or the plane.

The velocity of particle j is the mean over k != j of the pair force
evaluated at the minimum-image displacement x_j - x_k and the tensor field
sampled at x_j.  Integration is explicit Euler at fixed dt or an embedded
Dormand-Prince 5(4) pair with a standard step controller.

Reproducibility contract
------------------------
* Randomness comes from numpy's counter-based Philox (4x64) bit generator
  keyed by the config seed.  Normal deviates use the Marsaglia polar
  method on uniform pairs; consumption order is particle 0 (x, y),
  particle 1 (x, y), ...  Perturbation deviates are drawn after the
  initial-position draws with the same ordering.
* Pair accumulation runs over the neighbor index k in ascending order for
  every target particle j, whichever spatial data structure produced the
  candidates, so brute-force and cell-list evaluation agree bitwise and
  results do not depend on the number of threads.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

import numba
from numba import njit, prange

# the portable built-in scheduler avoids probing TBB/OpenMP; per-particle
# accumulation is order-fixed, so the layer cannot affect results
if os.environ.get("NUMBA_THREADING_LAYER") is None:
    numba.config.THREADING_LAYER = "workqueue"

from .errors import FileError, InvalidConfig, StepSizeUnderflow
from .forces import ForceParams
from .tensor import TensorFieldSpec, tensor_at

TERMINATION_T_END = "ReachedTEnd"
TERMINATION_STATIONARY = "Stationary"


@dataclass(frozen=True)
class DomainSpec:
    """Unit torus (periodic, side 1) or the unbounded plane."""

    kind: str = "torus"

    def __post_init__(self):
        if self.kind not in ("torus", "plane"):
            raise InvalidConfig(f"domain kind must be 'torus' or 'plane', got {self.kind!r}")

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"


TORUS = DomainSpec("torus")
PLANE = DomainSpec("plane")


@dataclass(frozen=True)
class ParticleState:
    """Positions of N particles at time t (torus coordinates in [0, 1))."""

    t: float
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 2:
            raise InvalidConfig(f"positions must have shape (N>=2, 2), got {pos.shape}")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]


# ---------------------------------------------------------------------------
# integrators and initial conditions

@dataclass(frozen=True)
class EulerFixed:
    pass


@dataclass(frozen=True)
class DormandPrinceAdaptive:
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6


@dataclass(frozen=True)
class Gaussian:
    """Normal positions around ``mean`` with per-axis standard deviation."""

    mean: tuple = (0.5, 0.5)
    sigma: float | tuple = 0.005


@dataclass(frozen=True)
class UniformRandom:
    pass


@dataclass(frozen=True)
class RingEquiangular:
    center: tuple = (0.5, 0.5)
    radius: float = 0.005


@dataclass(frozen=True)
class EllipseEquiangular:
    center: tuple = (0.5, 0.5)
    radius: float = 0.005      # minor semi-axis R
    elongation: float = 0.0    # major semi-axis is radius + elongation


@dataclass(frozen=True)
class LineUniform:
    center: tuple = (0.5, 0.5)


@dataclass(frozen=True)
class FromFile:
    path: str = ""


@dataclass(frozen=True)
class SimConfig:
    n_particles: int = 600
    dt: float = 0.2
    integrator: object = field(default_factory=EulerFixed)
    t_end: float = 2000.0
    stationarity_tol: float = 1e-9
    seed: int = 0
    initial: object = field(default_factory=Gaussian)
    perturbation_delta: float = 0.0
    snapshot_every: int = 0

    def __post_init__(self):
        if self.n_particles < 2:
            raise InvalidConfig(f"n_particles must be >= 2, got {self.n_particles}")
        if not self.dt > 0:
            raise InvalidConfig(f"dt must be > 0, got {self.dt}")
        if not self.t_end > 0:
            raise InvalidConfig(f"t_end must be > 0, got {self.t_end}")
        if self.stationarity_tol < 0:
            raise InvalidConfig("stationarity_tol must be >= 0")
        if self.perturbation_delta < 0:
            raise InvalidConfig("perturbation_delta must be >= 0")
        if self.snapshot_every < 0:
            raise InvalidConfig("snapshot_every must be >= 0")


# ---------------------------------------------------------------------------
# position generators (shared with the discrete-ansatz module)

def ring_positions(center, radius: float, n: int) -> np.ndarray:
    """Particle k at center + radius * (cos, sin)(2 pi k / n), k = 0..n-1."""
    theta = 2.0 * np.pi * np.arange(n) / n
    c = np.asarray(center, dtype=float)
    return np.column_stack([c[0] + radius * np.cos(theta),
                            c[1] + radius * np.sin(theta)])


def ellipse_positions(center, radius: float, elongation: float, n: int) -> np.ndarray:
    """Equiangular ellipse: minor semi-axis along x, major (radius+elongation) along y."""
    theta = 2.0 * np.pi * np.arange(n) / n
    c = np.asarray(center, dtype=float)
    return np.column_stack([c[0] + radius * np.cos(theta),
                            c[1] + (radius + elongation) * np.sin(theta)])


def line_positions(center, n: int) -> np.ndarray:
    """Vertical line: particle k (k = 1..n) offset (2k-1)/(2n) above the center."""
    k = np.arange(1, n + 1, dtype=float)
    c = np.asarray(center, dtype=float)
    return np.column_stack([np.full(n, c[0]), c[1] + (2.0 * k - 1.0) / (2.0 * n)])


def _polar_normals(rng, n: int) -> np.ndarray:
    """n standard bivariate normals via the Marsaglia polar method.

    One accepted uniform pair yields the (x, y) deviate of one particle;
    pairs are consumed in particle order.
    """
    out = np.empty((n, 2))
    for i in range(n):
        while True:
            u = 2.0 * rng.random() - 1.0
            v = 2.0 * rng.random() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                break
        m = math.sqrt(-2.0 * math.log(s) / s)
        out[i, 0] = u * m
        out[i, 1] = v * m
    return out


def min_image(d, domain: DomainSpec):
    """Wrap displacement components to [-0.5, 0.5) on the torus; identity on the plane."""
    d = np.asarray(d, dtype=float)
    if not domain.is_torus:
        return d.copy()
    return d - np.floor(d + 0.5)


def _wrap(pos: np.ndarray, domain: DomainSpec) -> np.ndarray:
    if not domain.is_torus:
        return pos
    return pos - np.floor(pos)


def init_state(config: SimConfig, domain: DomainSpec) -> ParticleState:
    """Build the initial state; deterministic for a given seed."""
    n = config.n_particles
    rng = np.random.Generator(np.random.Philox(config.seed))
    init = config.initial
    if isinstance(init, Gaussian):
        sigma = np.broadcast_to(np.asarray(init.sigma, dtype=float), (2,))
        if np.any(sigma < 0):
            raise InvalidConfig(f"Gaussian sigma must be >= 0, got {init.sigma}")
        pos = np.asarray(init.mean, dtype=float) + sigma * _polar_normals(rng, n)
    elif isinstance(init, UniformRandom):
        pos = rng.random((n, 2))
    elif isinstance(init, RingEquiangular):
        if init.radius < 0:
            raise InvalidConfig("ring radius must be >= 0")
        pos = ring_positions(init.center, init.radius, n)
    elif isinstance(init, EllipseEquiangular):
        if init.radius < 0 or init.elongation < 0:
            raise InvalidConfig("ellipse radius and elongation must be >= 0")
        pos = ellipse_positions(init.center, init.radius, init.elongation, n)
    elif isinstance(init, LineUniform):
        pos = line_positions(init.center, n)
    elif isinstance(init, FromFile):
        pos = read_positions_csv(init.path)
        if pos.shape[0] != n:
            raise InvalidConfig(
                f"{init.path} holds {pos.shape[0]} particles, config wants {n}")
    else:
        raise InvalidConfig(f"unknown initial condition {init!r}")
    if config.perturbation_delta > 0.0:
        pos = pos + config.perturbation_delta * _polar_normals(rng, n)
    return ParticleState(t=0.0, positions=_wrap(pos, domain))


# ---------------------------------------------------------------------------
# right-hand side

@njit(parallel=True, cache=True)
def _rhs_brute(pos, tmats, alpha, beta, gamma, e_a, e_r, d_a, d_r, cutoff, torus):
    n = pos.shape[0]
    out = np.empty((n, 2))
    c2 = cutoff * cutoff
    for j in prange(n):
        xj = pos[j, 0]
        yj = pos[j, 1]
        t00 = tmats[j, 0, 0]
        t01 = tmats[j, 0, 1]
        t10 = tmats[j, 1, 0]
        t11 = tmats[j, 1, 1]
        ax = 0.0
        ay = 0.0
        for k in range(n):
            if k == j:
                continue
            dx = xj - pos[k, 0]
            dy = yj - pos[k, 1]
            if torus:
                dx -= np.floor(dx + 0.5)
                dy -= np.floor(dy + 0.5)
            rho2 = dx * dx + dy * dy
            if rho2 >= c2:
                continue
            rho = np.sqrt(rho2)
            fa = -gamma * rho * np.exp(-e_a * rho)
            fr = (alpha * rho2 + beta) * np.exp(-e_r * rho)
            ca = d_a * fa
            cr = d_r * fr
            ax += ca * (t00 * dx + t01 * dy) + cr * dx
            ay += ca * (t10 * dx + t11 * dy) + cr * dy
        out[j, 0] = ax / n
        out[j, 1] = ay / n
    return out


@njit(parallel=True, cache=True)
def _rhs_cells(pos, tmats, alpha, beta, gamma, e_a, e_r, d_a, d_r, cutoff,
               m, order, starts):
    # torus-only cell list; candidate indices are sorted per target so the
    # accumulation order matches _rhs_brute exactly
    n = pos.shape[0]
    out = np.empty((n, 2))
    c2 = cutoff * cutoff
    for j in prange(n):
        xj = pos[j, 0]
        yj = pos[j, 1]
        t00 = tmats[j, 0, 0]
        t01 = tmats[j, 0, 1]
        t10 = tmats[j, 1, 0]
        t11 = tmats[j, 1, 1]
        cx = int(xj * m)
        if cx >= m:
            cx = m - 1
        cy = int(yj * m)
        if cy >= m:
            cy = m - 1
        cand = np.empty(n, np.int64)
        nc = 0
        for oy in range(-1, 2):
            gy = (cy + oy) % m
            for ox in range(-1, 2):
                gx = (cx + ox) % m
                cell = gy * m + gx
                for p in range(starts[cell], starts[cell + 1]):
                    cand[nc] = order[p]
                    nc += 1
        cand = np.sort(cand[:nc])
        ax = 0.0
        ay = 0.0
        for idx in range(nc):
            k = cand[idx]
            if k == j:
                continue
            dx = xj - pos[k, 0]
            dy = yj - pos[k, 1]
            dx -= np.floor(dx + 0.5)
            dy -= np.floor(dy + 0.5)
            rho2 = dx * dx + dy * dy
            if rho2 >= c2:
                continue
            rho = np.sqrt(rho2)
            fa = -gamma * rho * np.exp(-e_a * rho)
            fr = (alpha * rho2 + beta) * np.exp(-e_r * rho)
            ca = d_a * fa
            cr = d_r * fr
            ax += ca * (t00 * dx + t01 * dy) + cr * dx
            ay += ca * (t10 * dx + t11 * dy) + cr * dy
        out[j, 0] = ax / n
        out[j, 1] = ay / n
    return out


def _tensor_matrices(field_spec: TensorFieldSpec, pos: np.ndarray) -> np.ndarray:
    if field_spec.is_homogeneous:
        T = tensor_at(field_spec, pos[0])
        return np.broadcast_to(T, (pos.shape[0], 2, 2)).copy()
    return tensor_at(field_spec, pos)


def rhs(state: ParticleState, field_spec: TensorFieldSpec, params: ForceParams,
        domain: DomainSpec, accel: str = "auto") -> np.ndarray:
    """Velocities (1/N) sum_k F(min_image(x_j - x_k), T(x_j)) for every j.

    ``accel`` selects the pair enumeration: 'brute', 'cells', or 'auto'
    (cell list on the torus when at least 3 cells fit per axis).  The
    result is bitwise independent of the choice.
    """
    if domain.is_torus and params.cutoff > 0.5:
        raise InvalidConfig("cutoff must be <= 0.5 on the unit torus")
    pos = _wrap(np.ascontiguousarray(state.positions), domain)
    tmats = np.ascontiguousarray(_tensor_matrices(field_spec, pos))
    m = int(1.0 / params.cutoff) if domain.is_torus else 0
    use_cells = {"auto": domain.is_torus and m >= 3,
                 "cells": True,
                 "brute": False}[accel]
    if use_cells:
        if not domain.is_torus or m < 3:
            raise InvalidConfig("cell list requires a torus domain with cutoff <= 1/3")
        cx = np.minimum((pos[:, 0] * m).astype(np.int64), m - 1)
        cy = np.minimum((pos[:, 1] * m).astype(np.int64), m - 1)
        cell_id = cy * m + cx
        order = np.argsort(cell_id, kind="stable")
        starts = np.searchsorted(cell_id[order], np.arange(m * m + 1))
        return _rhs_cells(pos, tmats, params.alpha, params.beta, params.gamma,
                          params.e_A, params.e_R, params.delta_A, params.delta_R,
                          params.cutoff, m, order, starts)
    return _rhs_brute(pos, tmats, params.alpha, params.beta, params.gamma,
                      params.e_A, params.e_R, params.delta_A, params.delta_R,
                      params.cutoff, domain.is_torus)


# ---------------------------------------------------------------------------
# time stepping

_DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
_DP_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
          11.0 / 84.0, 0.0)
_DP_B4 = (5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
          -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0)
_H_MIN = 1e-14


def _dopri_attempt(pos, h, field_spec, params, domain, k1):
    """One trial Dormand-Prince step; returns (err_norm, y5)."""
    k = [k1]
    for i in range(1, 7):
        stage = pos.copy()
        for m, a in enumerate(_DP_A[i]):
            if a != 0.0:
                stage += (h * a) * k[m]
        k.append(rhs(ParticleState(t=0.0, positions=_wrap(stage, domain)),
                     field_spec, params, domain))
    y5 = pos.copy()
    y4 = pos.copy()
    for m in range(7):
        if _DP_B5[m] != 0.0:
            y5 += (h * _DP_B5[m]) * k[m]
        if _DP_B4[m] != 0.0:
            y4 += (h * _DP_B4[m]) * k[m]
    return y5, y4


def _dopri_error(pos, y5, y4, abs_tol, rel_tol):
    scale = abs_tol + rel_tol * np.maximum(np.abs(pos), np.abs(y5))
    return float(np.sqrt(np.mean(((y5 - y4) / scale) ** 2)))


def _dopri_advance(pos, t, t_target, h, field_spec, params, domain, integ,
                   on_accept=None):
    """Advance positions to exactly t_target with adaptive substeps.

    ``on_accept(t, pos, v)`` may return True to stop early (stationarity).
    Returns (pos, h, n_accepted, stopped_early).
    """
    n_acc = 0
    while t < t_target - 1e-12 * max(1.0, abs(t_target)):
        h = min(h, t_target - t)
        if h < _H_MIN:
            raise StepSizeUnderflow(f"adaptive substep fell to {h!r} at t={t!r}")
        k1 = rhs(ParticleState(t=t, positions=pos), field_spec, params, domain)
        while True:
            y5, y4 = _dopri_attempt(pos, h, field_spec, params, domain, k1)
            err = _dopri_error(pos, y5, y4, integ.abs_tol, integ.rel_tol)
            fac = 0.9 * (max(err, 1e-16)) ** -0.2
            if err <= 1.0:
                t = t + h
                pos = _wrap(y5, domain)
                h = h * min(5.0, max(0.2, fac))
                n_acc += 1
                break
            h = h * min(1.0, max(0.2, fac))
            if h < _H_MIN:
                raise StepSizeUnderflow(f"adaptive substep fell to {h!r} at t={t!r}")
        if on_accept is not None and on_accept(t, pos, k1):
            return pos, h, n_acc, True
    return pos, h, n_acc, False


def step(state: ParticleState, config: SimConfig, field_spec: TensorFieldSpec,
         params: ForceParams, domain: DomainSpec) -> ParticleState:
    """Advance the state by exactly config.dt."""
    integ = config.integrator
    if isinstance(integ, EulerFixed):
        v = rhs(state, field_spec, params, domain)
        return ParticleState(t=state.t + config.dt,
                             positions=_wrap(state.positions + config.dt * v, domain))
    pos, _, _, _ = _dopri_advance(state.positions.copy(), 0.0, config.dt,
                                  config.dt, field_spec, params, domain, integ)
    return ParticleState(t=state.t + config.dt, positions=pos)


@dataclass
class SimResult:
    snapshots: list
    termination: str
    n_steps: int
    max_speed_final: float
    wall_seconds: float

    @property
    def final(self) -> ParticleState:
        return self.snapshots[-1]


def simulate(config: SimConfig, field_spec: TensorFieldSpec, params: ForceParams,
             domain: DomainSpec) -> SimResult:
    """Integrate to t_end (or stationarity), recording snapshots.

    The initial state is always recorded; later snapshots are taken every
    ``snapshot_every`` steps (0 disables intermediate snapshots) and the
    final state is appended.  With the adaptive integrator a "step" is an
    accepted substep and dt serves as the initial step-size guess.
    """
    wall0 = time.perf_counter()
    state = init_state(config, domain)
    snapshots = [state]
    integ = config.integrator
    tol = config.stationarity_tol

    def _maybe_snapshot(n_steps, st):
        if config.snapshot_every and n_steps % config.snapshot_every == 0:
            snapshots.append(st)

    if isinstance(integ, EulerFixed):
        termination = TERMINATION_T_END
        n_steps = 0
        v = rhs(state, field_spec, params, domain)
        while True:
            if tol > 0.0 and float(np.abs(v).max()) < tol:
                termination = TERMINATION_STATIONARY
                break
            if state.t >= config.t_end - 1e-12 * config.t_end:
                break
            dt = min(config.dt, config.t_end - state.t)
            state = ParticleState(t=state.t + dt,
                                  positions=_wrap(state.positions + dt * v, domain))
            n_steps += 1
            _maybe_snapshot(n_steps, state)
            v = rhs(state, field_spec, params, domain)
        max_speed = float(np.abs(v).max())
    else:
        def on_accept(t, pos, k1):
            # k1 holds the velocities at the start of the accepted step,
            # which is what the stationarity criterion samples
            on_accept.n += 1
            st = ParticleState(t=t, positions=pos)
            on_accept.last = st
            _maybe_snapshot(on_accept.n, st)
            return tol > 0.0 and float(np.abs(k1).max()) < tol

        on_accept.n = 0
        on_accept.last = state
        v0 = rhs(state, field_spec, params, domain)
        if tol > 0.0 and float(np.abs(v0).max()) < tol:
            termination = TERMINATION_STATIONARY
            n_steps = 0
        else:
            pos, _, n_steps, stopped = _dopri_advance(
                state.positions.copy(), 0.0, config.t_end, config.dt,
                field_spec, params, domain, integ, on_accept=on_accept)
            state = ParticleState(t=on_accept.last.t if stopped else config.t_end,
                                  positions=pos)
            termination = TERMINATION_STATIONARY if stopped else TERMINATION_T_END
        max_speed = float(np.abs(rhs(state, field_spec, params, domain)).max())

    if snapshots[-1] is not state:
        snapshots.append(state)
    return SimResult(snapshots=snapshots, termination=termination,
                     n_steps=n_steps, max_speed_final=max_speed,
                     wall_seconds=time.perf_counter() - wall0)


# ---------------------------------------------------------------------------
# file formats

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(path, snapshots) -> None:
    """Write snapshots as `t,id,x,y` rows with 17 significant digits."""
    lines = ["t,id,x,y"]
    for snap in snapshots:
        t = _fmt(snap.t)
        for i, (x, y) in enumerate(snap.positions):
            lines.append(f"{t},{i},{_fmt(x)},{_fmt(y)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_positions_csv(path) -> np.ndarray:
    """Read positions from a `t,id,x,y` CSV; returns the last snapshot, by id."""
    try:
        with open(path) as fh:
            header = fh.readline().strip()
            if header.split(",") != ["t", "id", "x", "y"]:
                raise FileError(f"{path}: expected header 't,id,x,y', got {header!r}")
            rows = [line.split(",") for line in fh.read().split()]
    except OSError as exc:
        raise FileError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise FileError(f"{path}: no data rows")
    try:
        data = [(float(t), int(i), float(x), float(y)) for t, i, x, y in rows]
    except ValueError as exc:
        raise FileError(f"{path}: malformed row: {exc}") from exc
    t_last = data[-1][0]
    snap = {i: (x, y) for t, i, x, y in data if t == t_last}
    if sorted(snap) != list(range(len(snap))):
        raise FileError(f"{path}: particle ids are not 0..N-1")
    return np.array([snap[i] for i in range(len(snap))])


def write_summary_json(path, result: SimResult) -> None:
    payload = {
        "termination": result.termination,
        "t_final": result.final.t,
        "max_speed_final": result.max_speed_final,
        "n_steps": result.n_steps,
        "wall_seconds": result.wall_seconds,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
