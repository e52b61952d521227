"""Stress tensor fields T(x) = chi s(x) (x) s(x) + l(x) (x) l(x).

A field is described by the anisotropy parameter ``chi`` in [0, 1] plus a
direction field giving the unit vector ``s(x)`` (smallest-stress
direction).  The orthonormal partner is fixed as ``l = rotate(s, -pi/2) =
(s_2, -s_1)``; since l only enters through ``l (x) l`` any perpendicular
choice is equivalent.  Four direction families are provided: a spatially
homogeneous field, a circular field around a center, a sinusoidally
varying angle, and a gridded field loaded from CSV with bilinear
interpolation.

Each direction family implements ``s_at(points)`` (unit vectors) and
``ds_dx(points)`` (spatial Jacobian of s, used by analytic linearization).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FileError, InvalidConfig, NotUnit

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RotationAngle:
    """Angle in [0, 2 pi) with its rotation matrix."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])


def angle_from_s(s_tilde) -> RotationAngle:
    """Rotation angle theta with ``R_theta (0, 1) = s_tilde``.

    Uses the branch rule ``theta = arccos(s_2)`` when ``s_1 < 0`` and
    ``2 pi - arccos(s_2)`` otherwise.  Raises :class:`NotUnit` when the
    input is not a unit vector to within 1e-9.
    """
    s = np.asarray(s_tilde, dtype=float)
    norm = float(np.hypot(s[0], s[1]))
    if abs(norm - 1.0) > 1e-9:
        raise NotUnit(f"|s| = {norm!r} is not 1 within 1e-9")
    s2 = min(1.0, max(-1.0, float(s[1])))
    if s[0] < 0.0:
        theta = math.acos(s2)
    else:
        theta = TWO_PI - math.acos(s2)
    return RotationAngle(theta)


def _perp(s: np.ndarray) -> np.ndarray:
    """l = rotate(s, -pi/2), applied along the last axis."""
    return np.stack([s[..., 1], -s[..., 0]], axis=-1)


@dataclass(frozen=True)
class Homogeneous:
    """Constant direction field: s = R_theta (0, 1) everywhere."""

    theta: float = 0.0

    def s_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = np.array([-math.sin(self.theta), math.cos(self.theta)])
        return np.broadcast_to(s, x.shape).copy()

    def ds_dx(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (2,))


@dataclass(frozen=True)
class Circular:
    """s tangent to circles around ``center`` (counterclockwise)."""

    center: tuple = (0.5, 0.5)

    def _rel(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x - np.asarray(self.center, dtype=float)

    def s_at(self, x: np.ndarray) -> np.ndarray:
        single = np.asarray(x).ndim == 1
        rel = self._rel(x)
        rho = np.hypot(rel[..., 0], rel[..., 1])
        safe = np.where(rho > 0.0, rho, 1.0)
        s = np.stack([-rel[..., 1] / safe, rel[..., 0] / safe], axis=-1)
        # undefined at the center; pick the reference direction there
        s = np.where(rho[..., None] > 0.0, s, np.array([0.0, 1.0]))
        return s[0] if single else s

    def ds_dx(self, x: np.ndarray) -> np.ndarray:
        single = np.asarray(x).ndim == 1
        rel = self._rel(x)
        u, v = rel[..., 0], rel[..., 1]
        rho2 = u * u + v * v
        safe = np.where(rho2 > 0.0, rho2, 1.0)
        rho3 = safe ** 1.5
        # s = (-v, u)/rho; rows are components of s, columns d/dx, d/dy
        out = np.empty(rel.shape[:-1] + (2, 2))
        out[..., 0, 0] = u * v / rho3
        out[..., 0, 1] = -u * u / rho3
        out[..., 1, 0] = v * v / rho3
        out[..., 1, 1] = -u * v / rho3
        out = np.where(rho2[..., None, None] > 0.0, out, 0.0)
        return out[0] if single else out


@dataclass(frozen=True)
class SinusoidalAngle:
    """Direction angle theta(x) = amplitude * sin(2 pi k . x) from vertical."""

    amplitude: float = 0.5
    wavevector: tuple = (1.0, 0.0)

    def _theta(self, x):
        k = np.asarray(self.wavevector, dtype=float)
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.sin(TWO_PI * (x @ k))

    def s_at(self, x: np.ndarray) -> np.ndarray:
        th = self._theta(x)
        return np.stack([-np.sin(th), np.cos(th)], axis=-1)

    def ds_dx(self, x: np.ndarray) -> np.ndarray:
        k = np.asarray(self.wavevector, dtype=float)
        x = np.asarray(x, dtype=float)
        th = self._theta(x)
        dth = (self.amplitude * TWO_PI * np.cos(TWO_PI * (x @ k)))[..., None] * k
        ds_dth = np.stack([-np.cos(th), -np.sin(th)], axis=-1)
        return ds_dth[..., :, None] * dth[..., None, :]


@dataclass(frozen=True)
class PiecewiseGrid:
    """Unit vectors sampled on a regular lattice, bilinearly interpolated.

    Interpolated vectors are renormalized (bilinear interpolation does not
    preserve norms).  Coordinates outside the lattice are clamped to it.
    """

    xs: np.ndarray
    ys: np.ndarray
    vectors: np.ndarray  # shape (len(ys), len(xs), 2)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        vec = np.asarray(self.vectors, dtype=float)
        if xs.size < 2 or ys.size < 2:
            raise InvalidConfig("grid needs at least 2 nodes per axis")
        for name, arr in (("x", xs), ("y", ys)):
            step = np.diff(arr)
            if step.min() <= 0 or np.ptp(step) > 1e-9 * step.mean():
                raise InvalidConfig(f"grid {name} coordinates are not a regular lattice")
        if vec.shape != (ys.size, xs.size, 2):
            raise InvalidConfig(f"vector grid shape {vec.shape} does not match lattice")
        norms = np.hypot(vec[..., 0], vec[..., 1])
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise InvalidConfig("grid vectors must have unit norm")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "vectors", vec)

    @classmethod
    def from_csv(cls, path) -> "PiecewiseGrid":
        """Load a `x,y,sx,sy` CSV sampled on a regular lattice."""
        try:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None or [h.strip() for h in header] != ["x", "y", "sx", "sy"]:
                    raise FileError(f"{path}: expected header 'x,y,sx,sy', got {header}")
                rows = [[float(v) for v in row] for row in reader if row]
        except OSError as exc:
            raise FileError(f"cannot read direction grid {path}: {exc}") from exc
        except ValueError as exc:
            raise FileError(f"{path}: non-numeric grid entry: {exc}") from exc
        data = np.asarray(rows, dtype=float)
        xs = np.unique(data[:, 0])
        ys = np.unique(data[:, 1])
        if data.shape[0] != xs.size * ys.size:
            raise FileError(f"{path}: rows do not fill a complete lattice")
        vec = np.full((ys.size, xs.size, 2), np.nan)
        ix = np.searchsorted(xs, data[:, 0])
        iy = np.searchsorted(ys, data[:, 1])
        vec[iy, ix, 0] = data[:, 2]
        vec[iy, ix, 1] = data[:, 3]
        if np.any(np.isnan(vec)):
            raise FileError(f"{path}: duplicate or missing lattice nodes")
        try:
            return cls(xs=xs, ys=ys, vectors=vec)
        except InvalidConfig as exc:
            raise FileError(f"{path}: {exc}") from exc

    def _locate(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        hx = self.xs[1] - self.xs[0]
        hy = self.ys[1] - self.ys[0]
        fx = np.clip((pts[:, 0] - self.xs[0]) / hx, 0.0, self.xs.size - 1 - 1e-12)
        fy = np.clip((pts[:, 1] - self.ys[0]) / hy, 0.0, self.ys.size - 1 - 1e-12)
        i = fx.astype(int)
        j = fy.astype(int)
        return i, j, fx - i, fy - j, hx, hy

    def _raw(self, x):
        i, j, tx, ty, hx, hy = self._locate(x)
        v00 = self.vectors[j, i]
        v10 = self.vectors[j, i + 1]
        v01 = self.vectors[j + 1, i]
        v11 = self.vectors[j + 1, i + 1]
        tx = tx[:, None]
        ty = ty[:, None]
        raw = ((1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10
               + (1 - tx) * ty * v01 + tx * ty * v11)
        draw_dx = ((v10 - v00) * (1 - ty) + (v11 - v01) * ty) / hx
        draw_dy = ((v01 - v00) * (1 - tx) + (v11 - v10) * tx) / hy
        return raw, draw_dx, draw_dy

    def s_at(self, x: np.ndarray) -> np.ndarray:
        single = np.asarray(x).ndim == 1
        raw, _, _ = self._raw(x)
        s = raw / np.hypot(raw[:, 0], raw[:, 1])[:, None]
        return s[0] if single else s

    def ds_dx(self, x: np.ndarray) -> np.ndarray:
        single = np.asarray(x).ndim == 1
        raw, draw_dx, draw_dy = self._raw(x)
        norm = np.hypot(raw[:, 0], raw[:, 1])
        s = raw / norm[:, None]
        # d(v/|v|) = (I - s s^T)/|v| dv
        proj = np.eye(2) - s[:, :, None] * s[:, None, :]
        out = np.empty((raw.shape[0], 2, 2))
        out[:, :, 0] = np.einsum("nab,nb->na", proj, draw_dx) / norm[:, None]
        out[:, :, 1] = np.einsum("nab,nb->na", proj, draw_dy) / norm[:, None]
        return out[0] if single else out


@dataclass(frozen=True)
class TensorFieldSpec:
    """Anisotropy chi plus a direction field for s(x)."""

    chi: float = 1.0
    direction: object = field(default_factory=Homogeneous)

    def __post_init__(self):
        if not 0.0 <= self.chi <= 1.0:
            raise InvalidConfig(f"chi must lie in [0, 1], got {self.chi}")

    @property
    def is_homogeneous(self) -> bool:
        return isinstance(self.direction, Homogeneous)


def tensor_at(spec: TensorFieldSpec, x) -> np.ndarray:
    """Evaluate T(x) = chi s(x) (x) s(x) + l(x) (x) l(x).

    Accepts a single point (returns 2x2) or an (N, 2) batch (returns
    (N, 2, 2)).  The result is symmetric with eigenvalues {chi, 1}.
    """
    s = spec.direction.s_at(x)
    l = _perp(s)
    ss = s[..., :, None] * s[..., None, :]
    ll = l[..., :, None] * l[..., None, :]
    return spec.chi * ss + ll


def tensor_gradient(spec: TensorFieldSpec, x) -> np.ndarray:
    """Spatial gradient dT/dx with shape (..., 2, 2, 2), last axis = x-component."""
    s = spec.direction.s_at(x)
    ds = spec.direction.ds_dx(x)  # (..., 2 comp, 2 deriv)
    l = _perp(s)
    dl = np.stack([ds[..., 1, :], -ds[..., 0, :]], axis=-2)
    out = spec.chi * (ds[..., :, None, :] * s[..., None, :, None]
                      + s[..., :, None, None] * ds[..., None, :, :])
    out += (dl[..., :, None, :] * l[..., None, :, None]
            + l[..., :, None, None] * dl[..., None, :, :])
    return out


def rotate_homogeneous(spec: TensorFieldSpec, theta) -> TensorFieldSpec:
    """Rotate a homogeneous field: the new s is R_theta applied to the old one."""
    if not spec.is_homogeneous:
        raise InvalidConfig("rotate_homogeneous requires a Homogeneous direction")
    angle = theta.theta if isinstance(theta, RotationAngle) else float(theta)
    return TensorFieldSpec(chi=spec.chi,
                           direction=Homogeneous(theta=(spec.direction.theta + angle) % TWO_PI))
