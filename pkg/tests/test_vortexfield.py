import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from lgomit.params import TWO_PI, SystemParams
from lgomit.steadystate import steady_state
from lgomit.vortexfield import (
    CAVITY_FWM,
    DRIVE_BACKGROUND,
    REFLECTED_DRIVE,
    REFLECTED_PROBE,
    FieldComponent,
    count_maxima,
    count_petals,
    count_ring_periods,
    decompose_output,
    expected_power,
    intensity_pgm,
    overlap_radius,
    phase_pgm,
    render_spot,
    to_pgm,
)

W = 10e-6


def resonant(l=4, **drive):
    return SystemParams().replace(
        cavity={"cavity_oam": l, "detuning_mode": "resonant"}, drive=drive or {}
    )


def test_component_invariants():
    with pytest.raises(ValueError):
        FieldComponent(complex("nan"), 1, "x")
    with pytest.raises(ValueError):
        FieldComponent(1.0, 2, DRIVE_BACKGROUND)
    assert FieldComponent(1.0, -6, "x").radial_oam_index == 6


def test_fwm_component_vanishes_without_fwm_source():
    p = resonant().replace(atoms={"enabled": False})
    comps = decompose_output(p, steady_state(p), "all_resonant")
    (fwm,) = [c for c in comps if c.label == CAVITY_FWM]
    assert fwm.amplitude == 0


def test_no_reflected_components_without_reflectivity():
    p = resonant(mirror_reflectivity=0.0)
    labels = {c.label for c in decompose_output(p, steady_state(p), "all_resonant")}
    assert not labels & {REFLECTED_PROBE, REFLECTED_DRIVE}


def test_scenarios_differ_by_reflected_drive():
    p = resonant()
    ss = steady_state(p)
    on = [c.label for c in decompose_output(p, ss, "all_resonant")]
    off = [c.label for c in decompose_output(p, ss, "off_resonant")]
    assert set(on) - set(off) == {REFLECTED_DRIVE}
    with pytest.raises(ValueError):
        decompose_output(p, ss, "sideways")


def test_resonant_output_is_dominated_by_counter_rotating_vortices():
    p = resonant(4)
    comps = decompose_output(p, steady_state(p), "all_resonant")
    vortices = {}
    for c in comps:
        if c.oam != 0:
            vortices[c.oam] = vortices.get(c.oam, 0) + c.amplitude
    top = sorted(vortices, key=lambda m: abs(vortices[m]), reverse=True)[:2]
    assert sorted(top) == [-8, 8]


def test_single_vortex_ring_and_phase_winding():
    img = render_spot([FieldComponent(1.0, 4, "v")], W, n=256)
    assert img.petal_count == 0 and img.ring_period_count == 0
    np.testing.assert_allclose(img.ring_radius_m, W * math.sqrt(2), rtol=2e-3)
    theta = np.linspace(0, 2 * np.pi, 2001)
    from lgomit.vortexfield import field_at

    winding = np.unwrap(np.angle(field_at(img.components, W, theta, W)))
    np.testing.assert_allclose((winding[-1] - winding[0]) / (2 * np.pi), 4, atol=1e-9)
    assert img.phase.max() <= math.pi and img.phase.min() > -math.pi


@pytest.mark.parametrize("l", [4, 5])
def test_equal_counter_rotating_vortices(l):
    comps = [FieldComponent(1.0, 2 * l, "a"), FieldComponent(1.0, -2 * l, "b")]
    img = render_spot(comps, W, n=128)
    assert img.petal_count == 4 * l


def test_weak_loop_component_gives_delta_ell_periods():
    l, dl = 4, 2
    comps = [FieldComponent(1.0, 2 * l, "a"), FieldComponent(0.05, 2 * l + dl, "b")]
    img = render_spot(comps, W, n=128)
    r = overlap_radius(2 * l, 2 * l + dl, W)
    assert count_ring_periods(img, radius_m=r) == dl
    assert count_petals(img, radius_m=r) == dl


def test_count_maxima_synthetic():
    theta = 2 * np.pi * np.arange(512) / 512
    assert count_maxima(np.cos(3 * theta) ** 2 * 0 + (1 + np.cos(3 * theta))) == 3
    assert count_maxima(np.ones(512)) == 0
    with pytest.raises(ValueError):
        count_maxima(np.zeros(512))


def test_global_phase_invariance():
    comps = [FieldComponent(1.0, 8, "a"), FieldComponent(0.4 + 0.2j, -8, "b"), FieldComponent(-0.3, 0, DRIVE_BACKGROUND)]
    rotated = [FieldComponent(c.amplitude * np.exp(0.77j), c.oam, c.label) for c in comps]
    a, b = render_spot(comps, W, n=128), render_spot(rotated, W, n=128)
    np.testing.assert_allclose(a.intensity, b.intensity, rtol=1e-12, atol=1e-12 * a.intensity.max())
    assert a.petal_count == b.petal_count


def test_rotation_covariance():
    comps = [FieldComponent(1.0, 6, "a"), FieldComponent(0.7, -6, "b")]
    a = render_spot(comps, W, n=128)
    b = render_spot(comps, W, n=128, rotation_rad=math.pi / 2)
    # a quarter turn of the azimuth maps pixel (i, j) onto its 90-degree rotation
    np.testing.assert_allclose(np.rot90(b.intensity, k=1), a.intensity, rtol=1e-9, atol=1e-12)
    assert a.petal_count == b.petal_count == 12


def test_parseval_power():
    comps = [
        FieldComponent(1.0, 8, "a"),
        FieldComponent(0.5 - 0.2j, -8, "b"),
        FieldComponent(0.3j, 10, "c"),
        FieldComponent(-0.6, 0, DRIVE_BACKGROUND),
    ]
    img = render_spot(comps, W, n=512, extent_w=5.0)
    dx = img.x_m[1] - img.x_m[0]
    total = trapezoid(trapezoid(img.intensity, dx=dx, axis=1), dx=dx)
    np.testing.assert_allclose(total, expected_power(comps, W), rtol=0.01)


def test_minimal_grid_and_invalid_grids():
    img = render_spot([FieldComponent(1.0, 2, "a")], W, n=64)
    assert img.intensity.shape == (64, 64)
    with pytest.raises(ValueError):
        render_spot([FieldComponent(1.0, 2, "a")], W, n=32)
    with pytest.raises(ValueError):
        render_spot([FieldComponent(1.0, 2, "a")], W, extent_w=0.0)


def test_pgm_encoding():
    values = np.array([[0.0, 1.0], [2.0, 4.0]])
    data = to_pgm(values, 0.0, 4.0)
    header = b"P5\n2 2\n255\n"
    assert data.startswith(header)
    assert list(data[len(header):]) == [128, 255, 0, 64]
    img = render_spot([FieldComponent(1.0, 3, "a")], W, n=64)
    assert len(intensity_pgm(img)) == len(b"P5\n64 64\n255\n") + 64 * 64
    assert phase_pgm(img).startswith(b"P5\n64 64\n255\n")


def test_resonant_spot_pipeline_counts():
    for l in (4, 5, 6):
        p = resonant(l)
        img = render_spot(decompose_output(p, steady_state(p), "all_resonant"), W, n=128)
        assert img.petal_count == 4 * l == img.ring_period_count
