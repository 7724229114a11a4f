import cmath
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from lgomit.lgmode import (
    AtomDistribution,
    LGProfile,
    ensemble_sum,
    envelope_norm_sq,
    envelope_peak_radius,
    lg_envelope,
    lg_field,
    loop_phase,
    parity_reduced_loop_phase,
    rabi_at,
)

W = 10e-6


def test_envelope_on_axis():
    assert lg_envelope(0.0, LGProfile(2, W)) == 0.0
    assert lg_envelope(0.0, LGProfile(0, W, 3.5)) == 3.5


def test_envelope_peak_location_and_height():
    rho = np.linspace(0, 4 * W, 40001)
    for l in range(0, 9):
        env = lg_envelope(rho, LGProfile(l, W, 2.0))
        assert abs(rho[np.argmax(env)] - envelope_peak_radius(l, W)) <= rho[1]
        np.testing.assert_allclose(env.max(), 2.0, rtol=1e-6)
    assert envelope_peak_radius(2, W) == pytest.approx(W)


def test_envelope_large_charge_is_finite():
    env = lg_envelope(np.linspace(0, 10 * W, 101), LGProfile(200, W))
    assert np.all(np.isfinite(env)) and env.max() <= 1.0


def test_envelope_norm_matches_quadrature():
    rho = np.linspace(0, 12 * W, 200001)
    for l in (0, 1, 4, 9):
        env = lg_envelope(rho, LGProfile(l, W))
        numeric = trapezoid(2 * np.pi * rho * env**2, rho)
        np.testing.assert_allclose(numeric, envelope_norm_sq(l, W), rtol=1e-8)


def test_field_phases():
    prof0 = LGProfile(0, W)
    assert lg_field(W, 1.234, prof0).imag == 0
    env = lg_envelope(W, LGProfile(2, W))
    np.testing.assert_allclose(lg_field(W, math.pi / 2, LGProfile(2, W)), -env, atol=1e-15)
    e1 = lg_envelope(W, LGProfile(1, W))
    np.testing.assert_allclose(
        lg_field(W, math.pi / 3, LGProfile(1, W)), e1 * complex(math.cos(math.pi / 3), math.sin(math.pi / 3)), rtol=1e-15
    )


def test_loop_phase_examples():
    np.testing.assert_allclose(loop_phase(0, 4, math.pi / 2), 1.0, atol=1e-14)
    np.testing.assert_allclose(loop_phase(2, 2, math.pi / 2), -1.0, atol=1e-14)
    np.testing.assert_allclose(loop_phase(1, 2, math.pi / 2), 1j, atol=1e-14)


def test_loop_phase_is_unimodular():
    rng = np.random.default_rng(1)
    for _ in range(200):
        dl, l = (int(v) for v in rng.integers(-50, 50, 2))
        theta = rng.uniform(-10, 10)
        z = loop_phase(dl, l, theta)
        assert abs(abs(z) - 1) < 1e-14
        assert abs(z * z.conjugate() - 1) < 1e-14


def test_loop_phase_literal_form_and_parity_reduction():
    for l in range(-6, 7):
        for dl in range(-4, 5):
            z = loop_phase(dl, l, math.pi / 2)
            np.testing.assert_allclose(z, cmath.exp(1j * (dl + 2 * l) * math.pi / 2), atol=1e-13)
            if l % 2 == 0 or dl % 2:
                np.testing.assert_allclose(z, parity_reduced_loop_phase(dl, l), atol=1e-13)


def test_lumped_sum_of_constant():
    dist = AtomDistribution(lumped_coupling_rad_s=7.0)
    assert ensemble_sum(dist, lambda rho, g: 2.0 - 1j) == 7.0 * (2.0 - 1j)
    assert ensemble_sum(AtomDistribution(), lambda rho, g: 1.0) == 0


def test_radial_line_sums():
    one = AtomDistribution(mode="radial_line", radial_samples=((3e-6, 1.0),))
    f = lambda rho, g: complex(rho * 1e6, g)
    assert ensemble_sum(one, f) == f(3e-6, 1.0)
    two = AtomDistribution(mode="radial_line", radial_samples=((1e-6, 2.0), (5e-6, 2.0)))
    assert ensemble_sum(two, f) == pytest.approx(2.0 * f(1e-6, 2.0) + 2.0 * f(5e-6, 2.0), rel=1e-15)


def test_ensemble_sum_is_linear():
    dist = AtomDistribution(mode="radial_line", radial_samples=((1e-6, 1.5), (4e-6, 0.5), (9e-6, 2.0)))
    f = lambda rho, g: np.exp(-rho / W) * (1 + 1j * g)
    h = lambda rho, g: rho * g
    combo = ensemble_sum(dist, lambda rho, g: 3 * f(rho, g) - 2j * h(rho, g))
    np.testing.assert_allclose(combo, 3 * ensemble_sum(dist, f) - 2j * ensemble_sum(dist, h), rtol=1e-14)


def test_invalid_distributions():
    with pytest.raises(ValueError):
        AtomDistribution(mode="cloud")
    with pytest.raises(ValueError):
        ensemble_sum(AtomDistribution(mode="radial_line"), lambda rho, g: 1.0)


def test_rabi_at_peak_radius():
    peaks = (1.0, 2.0, 3.0)
    vals = rabi_at(envelope_peak_radius(2, W), peaks, (0, 2, 2), W)
    np.testing.assert_allclose(vals[1:], (2.0, 3.0), rtol=1e-14)
    assert vals[0] < 1.0
