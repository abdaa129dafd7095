import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfxl.errors import ConfigError
from cfxl.geometry import (
    FieldRegion,
    Panel,
    TopologyConfig,
    antenna_positions,
    classify_field_region,
    edof_planar,
    fresnel_distance,
    generate_topology,
    rayleigh_distance,
    topology_summary,
)

# -- field-boundary formulas ------------------------------------------------


def test_rayleigh_distance_known_value():
    assert rayleigh_distance(10.0, 0.1) == 2000.0


def test_fresnel_distance_known_value():
    # 0.62 * sqrt(1000 / 0.1) = 62 exactly
    assert fresnel_distance(10.0, 0.1) == pytest.approx(62.0, abs=1e-12)


def test_edof_matches_aperture_product():
    # pi * a * b / wavelength^2, recomputed independently
    assert edof_planar(2.25, 2.25, 0.1) == pytest.approx(
        math.pi * 2.25 * 2.25 / 0.01, rel=1e-15
    )


def test_zero_aperture_degenerates():
    assert rayleigh_distance(0.0, 0.1) == 0.0
    assert fresnel_distance(0.0, 0.1) == 0.0
    assert edof_planar(0.0, 1.0, 0.1) == 0.0


@pytest.mark.parametrize("func", [rayleigh_distance, fresnel_distance])
def test_boundary_formulas_reject_bad_wavelength(func):
    with pytest.raises(ValueError):
        func(1.0, 0.0)
    with pytest.raises(ValueError):
        func(1.0, -0.1)


@given(st.floats(0.01, 50.0), st.floats(0.001, 1.0))
def test_rayleigh_scales_quadratically(aperture, wavelength):
    d1 = rayleigh_distance(aperture, wavelength)
    d2 = rayleigh_distance(2.0 * aperture, wavelength)
    assert d2 == pytest.approx(4.0 * d1, rel=1e-12)


@given(st.floats(0.01, 10.0), st.floats(0.01, 10.0), st.floats(0.001, 1.0))
def test_edof_symmetric_in_sides(a, b, wavelength):
    assert edof_planar(a, b, wavelength) == pytest.approx(
        edof_planar(b, a, wavelength), rel=1e-12
    )


def test_classification_boundaries_belong_to_farther_region():
    aperture, lam = 10.0, 0.1
    d_fresnel = fresnel_distance(aperture, lam)
    d_rayleigh = rayleigh_distance(aperture, lam)
    assert classify_field_region(d_fresnel, aperture, lam) is FieldRegion.RADIATIVE_NEAR_FIELD
    assert classify_field_region(d_rayleigh, aperture, lam) is FieldRegion.FAR_FIELD
    assert classify_field_region(d_fresnel - 1e-9, aperture, lam) is FieldRegion.REACTIVE_NEAR_FIELD
    assert classify_field_region(d_rayleigh - 1e-6, aperture, lam) is FieldRegion.RADIATIVE_NEAR_FIELD


@given(st.lists(st.floats(0.0, 5000.0), min_size=2, max_size=20))
def test_region_index_monotone_in_distance(distances):
    distances = sorted(distances)
    regions = [int(classify_field_region(d, 10.0, 0.1)) for d in distances]
    assert all(a <= b for a, b in zip(regions, regions[1:]))


# -- panels ------------------------------------------------------------------


def test_two_element_panel_positions():
    panel = Panel(rows=2, cols=1, spacing=0.05, center=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0))
    pos = antenna_positions(panel)
    np.testing.assert_allclose(sorted(pos[:, 0]), [-0.025, 0.025], atol=1e-15)
    np.testing.assert_allclose(pos[:, 1:], 0.0, atol=1e-15)


def test_panel_diagonal_nine_by_nine():
    panel = Panel(rows=9, cols=9, spacing=0.05, center=(0, 0, 0), normal=(1, 0, 0))
    assert panel.diagonal == pytest.approx(0.05 * math.hypot(8, 8), rel=1e-12)


def test_panel_positions_centered_on_center():
    panel = Panel(rows=3, cols=4, spacing=0.05, center=(2.0, -1.0, 5.0), normal=(0, 1, 0))
    pos = antenna_positions(panel)
    assert pos.shape == (12, 3)
    np.testing.assert_allclose(pos.mean(axis=0), [2.0, -1.0, 5.0], atol=1e-12)


def test_panel_neighbor_spacing():
    panel = Panel(rows=2, cols=3, spacing=0.07, center=(0, 0, 0), normal=(0, 0, 1))
    pos = antenna_positions(panel)
    # nearest-neighbor distance equals the configured spacing everywhere
    d = np.linalg.norm(pos[None] - pos[:, None], axis=-1)
    d[d == 0] = np.inf
    np.testing.assert_allclose(d.min(axis=1), 0.07, rtol=1e-12)


def test_panel_lies_in_plane_orthogonal_to_normal():
    normal = np.array([1.0, 2.0, 3.0]) / math.sqrt(14)
    panel = Panel(rows=4, cols=4, spacing=0.05, center=(0, 0, 0), normal=tuple(normal))
    pos = antenna_positions(panel)
    np.testing.assert_allclose(pos @ normal, 0.0, atol=1e-12)


def test_panel_validation():
    with pytest.raises(ValueError):
        Panel(rows=0, cols=2, spacing=0.05, center=(0, 0, 0), normal=(0, 0, 1))
    with pytest.raises(ValueError):
        Panel(rows=1, cols=1, spacing=-0.1, center=(0, 0, 0), normal=(0, 0, 1))
    with pytest.raises(ValueError):
        Panel(rows=1, cols=1, spacing=0.05, center=(0, 0, 0), normal=(0, 0, 0))


# -- topology sampling -------------------------------------------------------


def test_generate_topology_is_deterministic():
    config = TopologyConfig(num_bs=2, num_ue=3)
    t1 = generate_topology(config, 7)
    t2 = generate_topology(config, 7)
    np.testing.assert_array_equal(t1.ue_antenna_positions, t2.ue_antenna_positions)
    np.testing.assert_array_equal(t1.bs_antenna_positions, t2.bs_antenna_positions)


def test_generate_topology_seed_changes_ue_drops():
    config = TopologyConfig(num_bs=1, num_ue=3)
    t1 = generate_topology(config, 0)
    t2 = generate_topology(config, 1)
    assert not np.allclose(t1.ue_centers, t2.ue_centers)
    # BS grid placement does not depend on the seed
    np.testing.assert_array_equal(t1.bs_centers, t2.bs_centers)


def test_topology_dimensions_and_heights():
    config = TopologyConfig(
        num_bs=2, bs_rows=3, bs_cols=3, num_ue=4, ue_rows=1, ue_cols=2, area_side=200.0
    )
    topo = generate_topology(config, 3)
    assert topo.bs_antenna_positions.shape == (2, 9, 3)
    assert topo.ue_antenna_positions.shape == (8, 3)
    assert topo.num_streams == 8
    np.testing.assert_allclose(topo.bs_centers[:, 2], config.bs_height)
    np.testing.assert_allclose(topo.ue_centers[:, 2], config.ue_height)
    assert np.all(topo.ue_centers[:, :2] >= 0)
    assert np.all(topo.ue_centers[:, :2] <= 200.0)


def test_stream_to_ue_mapping():
    topo = generate_topology(TopologyConfig(num_ue=3, ue_rows=1, ue_cols=2), 0)
    assert [topo.stream_to_ue(s) for s in range(6)] == [0, 0, 1, 1, 2, 2]


def test_config_validation_reports_field_paths():
    with pytest.raises(ConfigError, match="num_bs"):
        TopologyConfig(num_bs=0)
    with pytest.raises(ConfigError, match="area_side"):
        TopologyConfig(area_side=-5.0)
    with pytest.raises(ConfigError, match="wavelength"):
        TopologyConfig(wavelength=0.0)


def test_stream_budget_enforced():
    # 3 single-antenna streams cannot fit a 1x2 antenna budget
    config = TopologyConfig(num_bs=1, bs_rows=1, bs_cols=2, num_ue=3, ue_rows=1, ue_cols=1)
    with pytest.raises(ConfigError, match="streams"):
        generate_topology(config, 0)


def test_topology_summary_keys():
    topo = generate_topology(TopologyConfig(num_bs=1, num_ue=2), 0)
    summary = topology_summary(topo)
    for key in ("num_bs", "num_ue", "num_streams", "wavelength_m", "bs_panel_diagonal_m"):
        assert key in summary
