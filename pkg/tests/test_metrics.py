import json
import math

import numpy as np
import pytest

from anisoswarm.equilibria import eccentricity
from anisoswarm.errors import Degenerate, InvalidConfig
from anisoswarm.metrics import (ClassifierConfig, classify, cluster_count,
                                fit_ellipse)
from anisoswarm.sim import PLANE, TORUS, ellipse_positions, line_positions, ring_positions


def test_fit_ellipse_recovers_ring_radius():
    pos = ring_positions((0.5, 0.5), 0.0017, 600)
    center, fitted_R, fitted_r, _ = fit_ellipse(pos)
    # oracle: the second moment of the equiangular ring is R^2/2 per axis,
    # so both fitted semi-axes equal R
    np.testing.assert_allclose(center, [0.5, 0.5], atol=1e-12)
    assert fitted_R == pytest.approx(0.0017, rel=0.01)
    assert fitted_R + fitted_r == pytest.approx(0.0017, rel=0.01)
    b, a = fitted_R, fitted_R + fitted_r
    assert math.sqrt(1 - (b / a) ** 2) < 0.05


def test_fit_ellipse_orientation_vertical():
    pos = ellipse_positions((0.5, 0.5), 0.001, 0.002, 400)
    _, _, _, orientation = fit_ellipse(pos)
    assert abs(orientation - math.pi / 2) <= math.radians(1.0)


def test_fit_ellipse_matches_ansatz_eccentricity():
    for n in (200, 600):
        R, r = 0.0012, 0.002
        pos = ellipse_positions((0.5, 0.5), R, r, n)
        _, fitted_R, fitted_r, _ = fit_ellipse(pos)
        fitted_ecc = math.sqrt(1 - (fitted_R / (fitted_R + fitted_r)) ** 2)
        assert fitted_ecc == pytest.approx(eccentricity(R, r), rel=0.02)


def test_fit_ellipse_degenerate_for_identical_points():
    with pytest.raises(Degenerate):
        fit_ellipse(np.full((10, 2), 0.25))


def test_fit_ellipse_needs_five_points():
    with pytest.raises(InvalidConfig):
        fit_ellipse(np.random.rand(4, 2))


def test_cluster_count_single_ring():
    pos = ring_positions((0.5, 0.5), 0.0017, 600)
    # consecutive ring neighbors are ~2 pi R / N apart, far below the link radius
    assert cluster_count(pos, 0.02, TORUS) == 1


def test_cluster_count_two_rings():
    a = ring_positions((0.3, 0.5), 0.005, 50)
    b = ring_positions((0.6, 0.5), 0.005, 50)
    assert cluster_count(np.vstack([a, b]), 0.05, TORUS) == 2


def test_cluster_count_isolated_points():
    grid = np.stack(np.meshgrid(np.linspace(0.05, 0.95, 5),
                                np.linspace(0.05, 0.95, 5)), axis=-1).reshape(-1, 2)
    assert cluster_count(grid, 0.05, TORUS) == 25


def test_cluster_count_monotone_in_link_radius():
    rng = np.random.default_rng(6)
    pos = rng.random((120, 2))
    counts = [cluster_count(pos, lr, TORUS) for lr in (0.01, 0.03, 0.1, 0.3)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_cluster_count_respects_torus_wrap():
    pos = np.array([[0.001, 0.5], [0.999, 0.5], [0.5, 0.5], [0.5, 0.52]])
    assert cluster_count(pos, 0.05, TORUS) == 2
    assert cluster_count(pos, 0.05, PLANE) == 3


def test_classify_line_ansatz():
    pos = line_positions((0.5, 0.5), 400) % 1.0
    summary = classify(pos, TORUS)
    assert summary.pattern_class == "VerticalLine"
    assert summary.vertical_extent > 0.99


def test_classify_ring_ansatz():
    pos = ring_positions((0.5, 0.5), 0.0017, 600)
    summary = classify(pos, TORUS)
    assert summary.pattern_class == "Ring"
    assert summary.fitted_R == pytest.approx(0.0017, rel=0.02)
    assert summary.cluster_count == 1


def test_classify_thin_ellipse():
    pos = ellipse_positions((0.5, 0.5), 0.001, 0.004, 600)
    summary = classify(pos, TORUS)
    assert summary.pattern_class == "Ellipse"
    assert summary.eccentricity > 0.9


def test_classify_degenerate_segment_as_ellipse():
    # the trivial branch endpoint: zero minor axis, arcsine-distributed
    pos = ellipse_positions((0.5, 0.5), 0.0, 0.0065, 600)
    summary = classify(pos, TORUS)
    assert summary.pattern_class == "Ellipse"
    assert summary.eccentricity == pytest.approx(1.0, abs=1e-6)


def test_classify_uniform_random_not_structured():
    for seed in (0, 1, 2):
        pos = np.random.default_rng(seed).random((600, 2))
        summary = classify(pos, TORUS)
        assert summary.pattern_class not in ("Ring", "Ellipse", "VerticalLine")
        assert summary.pattern_class in ("Dispersed", "Clusters")
        if summary.pattern_class == "Clusters":
            assert summary.cluster_count > 10


def test_classify_two_blobs_as_clusters():
    a = ring_positions((0.25, 0.5), 0.003, 100)
    b = ring_positions((0.75, 0.5), 0.003, 100)
    summary = classify(np.vstack([a, b]), TORUS)
    assert summary.pattern_class == "Clusters"
    assert summary.cluster_count == 2


def test_classify_invariant_under_torus_translation():
    pos = ellipse_positions((0.5, 0.5), 0.001, 0.003, 300)
    base = classify(pos, TORUS)
    for shift in ((0.5, 0.0), (0.0, 0.5), (0.497, 0.702)):
        moved = (pos + np.asarray(shift)) % 1.0
        summary = classify(moved, TORUS)
        assert summary.pattern_class == base.pattern_class
        assert summary.eccentricity == pytest.approx(base.eccentricity, abs=1e-9)
        assert summary.cluster_count == base.cluster_count


def test_pattern_summary_json_field_names():
    pos = ring_positions((0.5, 0.5), 0.0017, 600)
    payload = json.loads(classify(pos, TORUS).to_json())
    assert set(payload) == {"class", "center", "fitted_R", "fitted_r",
                            "eccentricity", "vertical_extent", "cluster_count"}
    assert payload["class"] == "Ring"
    assert payload["cluster_count"] >= 1


def test_classifier_thresholds_are_configurable():
    pos = ellipse_positions((0.5, 0.5), 0.001, 0.004, 600)
    strict = ClassifierConfig(ellipse_eccentricity_min=0.999)
    assert classify(pos, TORUS, strict).pattern_class != "Ellipse"
