"""Quantitative descriptors of final particle states.

``fit_ellipse`` recovers semi-axes from second moments (sqrt of twice the
covariance eigenvalues, exact in expectation for the equiangular ansatz
distributions), ``cluster_count`` counts connected components of the
link-radius graph with union-find, and ``classify`` maps a state to one of
Ring / Ellipse / VerticalLine / Clusters / Dispersed.  All thresholds sit
in :class:`ClassifierConfig`; they are heuristics, exposed so callers can
tighten or relax them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import Degenerate, InvalidConfig
from .sim import DomainSpec


@dataclass(frozen=True)
class ClassifierConfig:
    link_radius: float = 0.02
    vertical_extent_min: float = 0.9
    horizontal_std_max: float = 0.01
    ring_eccentricity_max: float = 0.1
    ring_radial_spread_max: float = 0.1
    ellipse_eccentricity_min: float = 0.1
    boundary_distance_max: float = 0.1
    boundary_samples: int = 512


@dataclass(frozen=True)
class PatternSummary:
    pattern_class: str
    center: tuple
    fitted_R: float
    fitted_r: float
    eccentricity: float
    vertical_extent: float
    cluster_count: int

    def to_json_dict(self) -> dict:
        return {
            "class": self.pattern_class,
            "center": list(self.center),
            "fitted_R": self.fitted_R,
            "fitted_r": self.fitted_r,
            "eccentricity": self.eccentricity,
            "vertical_extent": self.vertical_extent,
            "cluster_count": self.cluster_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def _cov_axes(rel: np.ndarray):
    """Semi-axes (minor b, major a) and eigenvectors of centered positions."""
    cov = rel.T @ rel / rel.shape[0]
    lam, vec = np.linalg.eigh(cov)
    lam = np.maximum(lam, 0.0)
    if lam[1] <= 1e-30:
        raise Degenerate("positions have no spatial extent")
    b = math.sqrt(2.0 * lam[0])
    a = math.sqrt(2.0 * lam[1])
    return b, a, vec


def fit_ellipse(positions: np.ndarray):
    """(center, fitted_R, fitted_r, orientation) from position second moments.

    ``fitted_R`` is the minor semi-axis, ``fitted_R + fitted_r`` the major;
    orientation is the major-axis angle in [0, pi) from the +x axis.
    Raises :class:`Degenerate` when all points coincide.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 5:
        raise InvalidConfig(f"need an (N>=5, 2) position array, got {pos.shape}")
    center = pos.mean(axis=0)
    b, a, vec = _cov_axes(pos - center)
    orientation = math.atan2(vec[1, 1], vec[0, 1]) % math.pi
    return center, b, a - b, orientation


def cluster_count(positions: np.ndarray, link_radius: float,
                  domain: DomainSpec = DomainSpec("torus")) -> int:
    """Connected components of the graph linking pairs closer than link_radius."""
    if link_radius <= 0:
        raise InvalidConfig("link_radius must be > 0")
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    d = pos[:, None, :] - pos[None, :, :]
    if domain.is_torus:
        d = d - np.floor(d + 0.5)
    close = np.hypot(d[..., 0], d[..., 1]) < link_radius
    ii, jj = np.nonzero(np.triu(close, k=1))

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(ii.tolist(), jj.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(x) for x in range(n)})


def _circular_mean(coords: np.ndarray) -> float:
    ang = 2.0 * math.pi * coords
    return (math.atan2(np.sin(ang).mean(), np.cos(ang).mean())
            / (2.0 * math.pi)) % 1.0


def _wrap_center(positions: np.ndarray, domain: DomainSpec) -> np.ndarray:
    if domain.is_torus:
        return np.array([_circular_mean(positions[:, 0]),
                         _circular_mean(positions[:, 1])])
    return positions.mean(axis=0)


def _vertical_extent(y: np.ndarray, domain: DomainSpec) -> float:
    if not domain.is_torus:
        return float(np.ptp(y))
    ys = np.sort(y % 1.0)
    gaps = np.diff(np.concatenate([ys, [ys[0] + 1.0]]))
    return float(1.0 - gaps.max())


def _boundary_distance(rel: np.ndarray, b: float, a: float, vec: np.ndarray,
                       samples: int) -> float:
    """Mean distance to the fitted ellipse boundary, relative to the major axis.

    The boundary is sampled as a polyline, which stays well defined for the
    degenerate (segment) case b -> 0.
    """
    loc = rel @ vec  # columns: minor, major
    t = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    boundary = np.column_stack([b * np.cos(t), a * np.sin(t)])
    diff = loc[:, None, :] - boundary[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1]).min(axis=1)
    return float(dist.mean() / a)


def classify(positions: np.ndarray, domain: DomainSpec = DomainSpec("torus"),
             config: ClassifierConfig = ClassifierConfig()) -> PatternSummary:
    """Classify a particle state; invariant under torus translations."""
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 5:
        raise InvalidConfig(f"need an (N>=5, 2) position array, got {pos.shape}")
    center = _wrap_center(pos, domain)
    rel = pos - center
    if domain.is_torus:
        rel = rel - np.floor(rel + 0.5)

    extent = _vertical_extent(pos[:, 1], domain)
    clusters = cluster_count(pos, config.link_radius, domain)
    try:
        b, a, vec = _cov_axes(rel - rel.mean(axis=0))
    except Degenerate:
        b = a = 0.0
        vec = np.eye(2)
    ecc = math.sqrt(max(0.0, 1.0 - (b / a) ** 2)) if a > 0 else 0.0
    fitted_R, fitted_r = b, a - b

    h_std = float(rel[:, 0].std())
    if extent >= config.vertical_extent_min and h_std < config.horizontal_std_max:
        cls = "VerticalLine"
    elif clusters == 1 and a > 0:
        radii = np.hypot(rel[:, 0], rel[:, 1])
        radial_spread = float(radii.std() / radii.mean()) if radii.mean() > 0 else math.inf
        on_boundary = (_boundary_distance(rel, b, a, vec, config.boundary_samples)
                       < config.boundary_distance_max)
        if ecc < config.ring_eccentricity_max and radial_spread < config.ring_radial_spread_max:
            cls = "Ring"
        elif ecc >= config.ellipse_eccentricity_min and on_boundary:
            cls = "Ellipse"
        else:
            cls = "Dispersed"
    elif clusters >= 2:
        cls = "Clusters"
    else:
        cls = "Dispersed"
    return PatternSummary(pattern_class=cls, center=tuple(center),
                          fitted_R=fitted_R, fitted_r=fitted_r,
                          eccentricity=ecc, vertical_extent=extent,
                          cluster_count=clusters)
