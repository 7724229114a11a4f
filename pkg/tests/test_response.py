import math

import numpy as np
import pytest

from lgomit.params import TWO_PI, SystemParams
from lgomit.response import (
    absorption_fwhm,
    closed_form_uv,
    delta_a_pm,
    extremal_delay,
    group_delay,
    output_spectrum,
    probe_grid,
    spectrum_for,
)
from lgomit.steadystate import operating_point, steady_state

W_PHI = TWO_PI * 35e6


def bare():
    return SystemParams().replace(
        cavity={"cavity_oam": 0, "detuning_mode": "fixed", "cavity_detuning_rad_s": 0.0},
        atoms={"enabled": False},
    )


def test_bare_cavity_fluctuation():
    p = bare()
    kappa = p.cavity.cavity_decay_rad_s
    grid = np.linspace(-3 * kappa, 3 * kappa, 101)
    plus, _ = delta_a_pm(p, steady_state(p), grid)
    np.testing.assert_allclose(plus, 1 / (kappa - 1j * grid), rtol=1e-14)


def test_bare_cavity_quadratures_and_delay():
    p = bare()
    kappa = p.cavity.cavity_decay_rad_s
    grid = probe_grid(0.0, 2 * kappa, 2001)
    s = spectrum_for(p, grid)
    i = len(grid) // 2
    assert s.u_p[i] == pytest.approx(2.0, rel=1e-14)
    assert abs(s.v_p[i]) < 1e-14
    assert s.t_p[i] == pytest.approx(-1.0, rel=1e-14)
    np.testing.assert_allclose(s.tau_a[i], 2 / kappa, rtol=1e-5)
    np.testing.assert_allclose(s.t_p, 1 - s.u_p - 1j * s.v_p, rtol=0, atol=1e-15)


def test_omit_dip_in_fluctuation_amplitude():
    p = SystemParams().replace(atoms={"enabled": False})
    grid = W_PHI + np.array([-2e5, 0.0, 2e5])
    plus, _ = delta_a_pm(p, steady_state(p), grid)
    assert abs(plus[1]) < abs(plus[0]) and abs(plus[1]) < abs(plus[2])


def test_omit_invariant():
    p = SystemParams().replace(atoms={"enabled": False})
    ss = steady_state(p)
    g2n = p.couplings.G ** 2 * ss.n_c
    kappa, gam = p.cavity.cavity_decay_rad_s, p.mirror.damping_rad_s
    assert g2n / (kappa * gam) > 10
    off = 10 * (g2n / kappa + gam)
    s = output_spectrum(p, ss, np.array([W_PHI - off, W_PHI, W_PHI + off]))
    assert s.u_p[1] < 0.5 * min(s.u_p[0], s.u_p[2])


def test_spectrum_independent_of_loop_charge_without_fwm(fig4_params):
    a, b, z = fig4_params.atoms.rabi_peak_rad_s
    base = fig4_params.replace(atoms={"rabi_peak_rad_s": (0.0, b, z)})
    grid = W_PHI + np.linspace(-1e5, 1e5, 51)
    ref = spectrum_for(base, grid)
    for dl, theta in ((1, 0.3), (2, math.pi / 2), (5, 2.0)):
        q = base.replace(atoms={"oam": (dl, 0, 0), "azimuth_rad": theta})
        np.testing.assert_array_equal(spectrum_for(q, grid).u_p, ref.u_p)


def test_charge_shifts_preserving_loop_charge_leave_spectrum_unchanged(fig4_params):
    grid = W_PHI + np.linspace(-1e5, 1e5, 51)
    a = spectrum_for(fig4_params.replace(atoms={"oam": (2, 1, 1)}), grid)
    for shifted in ((5, 4, 1), (2, 4, 4), (-1, -2, 1)):
        b = spectrum_for(fig4_params.replace(atoms={"oam": shifted}), grid)
        np.testing.assert_array_equal(a.u_p, b.u_p)
        np.testing.assert_array_equal(a.v_p, b.v_p)


def test_gain_with_loop_charge_two(fig4_params):
    grid = W_PHI + np.linspace(-2e3, 2e3, 41)
    s = spectrum_for(fig4_params.replace(atoms={"oam": (2, 0, 0)}), grid)
    assert np.min(s.u_p) < 0


def test_closed_form_sum_rule_and_coincidence(fig4_params):
    ss = steady_state(fig4_params)
    grid = W_PHI + np.linspace(-2e5, 2e5, 401)
    u0, v0 = closed_form_uv(fig4_params, grid, 0, ss.n_c)
    u2, v2 = closed_form_uv(fig4_params, grid, 2, ss.n_c)
    a, b, z = fig4_params.atoms.rabi_peak_rad_s
    nofwm = fig4_params.replace(atoms={"rabi_peak_rad_s": (0.0, b, z)})
    ub, vb = closed_form_uv(nofwm, grid, 0, ss.n_c)
    np.testing.assert_allclose(u0 + u2 - 2 * ub, 0, atol=1e-9 * np.max(np.abs(ub)))
    np.testing.assert_allclose(v0 + v2 - 2 * vb, 0, atol=1e-9 * np.max(np.abs(vb)))
    for dl in (1, 2):
        u, v = closed_form_uv(nofwm, grid, dl, ss.n_c)
        np.testing.assert_array_equal(u, ub)
        np.testing.assert_array_equal(v, vb)


def test_closed_form_preconditions():
    p = SystemParams().replace(cavity={"cavity_oam": 41})
    with pytest.raises(ValueError, match="even l"):
        closed_form_uv(p, np.array([W_PHI]), 0, 1.0)
    with pytest.raises(ValueError):
        closed_form_uv(SystemParams(), np.array([W_PHI]), 3, 1.0)


def test_group_delay_methods_agree_on_smooth_phase():
    x = np.linspace(-5, 5, 20001)
    e_t = 2 / (1 - 1j * x) * 0.7
    theta, a, b, ok = group_delay(x, e_t.real, e_t.imag)
    assert ok.all()
    np.testing.assert_allclose(a, b, atol=1e-6 * np.max(np.abs(a)))


def test_group_delay_marks_undefined_phase():
    x = np.linspace(-1, 1, 5)
    u = np.ones(5)
    v = np.zeros(5)
    _, a, b, ok = group_delay(x, u, v)
    assert not ok.any()
    assert np.all(np.isnan(b))


def test_grid_refinement_changes_extremum_little(fig4_params):
    p = fig4_params.replace(atoms={"oam": (2, 0, 0)})
    taus = []
    for n in (20001, 40001):
        s = spectrum_for(p, probe_grid(W_PHI, 0.006 * W_PHI, n, TWO_PI * 30))
        taus.append(np.nanmin(np.where(s.phase_defined, s.tau_a, np.nan)))
    assert abs(taus[1] / taus[0] - 1) < 0.01


def test_probe_grid_shapes():
    g = probe_grid(1.0, 0.5, 11)
    np.testing.assert_allclose(g[[0, 5, -1]], [0.5, 1.0, 1.5])
    h = probe_grid(1.0, 0.5, 11, core=1e-3)
    assert h[5] == 1.0 and h[0] == pytest.approx(0.5) and h[-1] == pytest.approx(1.5)
    assert np.all(np.diff(h) > 0)
    with pytest.raises(ValueError):
        probe_grid(0.0, 1.0, 2)


def test_output_spectrum_needs_increasing_grid():
    p = bare()
    with pytest.raises(ValueError):
        output_spectrum(p, steady_state(p), np.array([1.0, 0.0]))


def test_extremal_delay_power_trend(fig4_params):
    offsets = probe_grid(0.0, 0.006 * W_PHI, 8001, TWO_PI * 30)
    rows = extremal_delay(fig4_params, offsets, "power", [0.02, 0.05, 0.1, 0.2], threads=2)
    assert [r.value for r in rows] == [0.02, 0.05, 0.1, 0.2]
    assert np.all(np.diff([r.tau_max for r in rows]) < 0)
    (one,) = extremal_delay(fig4_params, offsets, "oam", [40])
    assert one.value == 40
    with pytest.raises(ValueError):
        extremal_delay(fig4_params, offsets, "detuning", [1.0])


def test_absorption_fwhm_of_lorentzian():
    x = np.linspace(-10, 10, 20001)
    np.testing.assert_allclose(absorption_fwhm(x, 1 / (1 + x**2)), 2.0, rtol=1e-6)
    with pytest.raises(ValueError):
        absorption_fwhm(x, 1 / (1 + (x / 20) ** 2))


def test_metadata_records_branch(fig4_params):
    s = spectrum_for(fig4_params, W_PHI + np.linspace(-1.0, 1.0, 3))
    assert s.metadata["branch_index"] == 0
    assert s.metadata["delta_ell"] == 0
    op = operating_point(fig4_params)
    assert op.kappa_prime > 0
