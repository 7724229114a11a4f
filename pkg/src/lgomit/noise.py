"""Classical noise figures of the rotating mirror and Purcell-modified rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .params import K_B, MirrorParams, SystemParams, zero_point_angle


def psd_angular(omega, temperature_K: float, mirror: MirrorParams):
    """Thermal angular-displacement spectrum.

    ``S(w) = 4 k_B T gamma / (I [(w_m^2 - w^2)^2 + gamma^2 w^2])``.
    """
    if temperature_K < 0:
        raise ValueError("temperature must be >= 0")
    w = np.asarray(omega, dtype=float)
    wm, gam = mirror.angular_freq_rad_s, mirror.damping_rad_s
    inertia = mirror.moment_of_inertia_kg_m2
    out = 4 * K_B * temperature_K * gam / (inertia * ((wm**2 - w**2) ** 2 + gam**2 * w**2))
    return out if np.ndim(out) else float(out)


def rms_phase_error(l: int, temperature_K: float, mirror: MirrorParams) -> float:
    """OAM-weighted rms phase error ``|l| sqrt(k_B T Q / (I w_m^3))``."""
    if temperature_K < 0:
        raise ValueError("temperature must be >= 0")
    wm = mirror.angular_freq_rad_s
    return abs(l) * math.sqrt(
        K_B * temperature_K * mirror.quality_factor
        / (mirror.moment_of_inertia_kg_m2 * wm**3)
    )


def zero_point(mirror: MirrorParams) -> float:
    """Zero-point angular fluctuation ``sqrt(hbar / (2 I w_m))``."""
    return zero_point_angle(mirror)


def psd_integral(l: int, temperature_K: float, mirror: MirrorParams, span: float = 100.0) -> float:
    """Numerical ``int l^2 S(w) dw`` over the whole real line.

    The two resonances are integrated adaptively over ``+-span`` linewidths;
    the remainder is integrated on the tails with the substitution handled
    by ``quad`` on infinite intervals.  Because ``S`` is even, the result is
    twice the positive half-line.
    """
    wm, gam = mirror.angular_freq_rad_s, mirror.damping_rad_s
    if temperature_K == 0 or l == 0:
        return 0.0
    # Normalize to keep quad well scaled.
    scale = psd_angular(wm, temperature_K, mirror)

    def f(w):
        return psd_angular(w, temperature_K, mirror) / scale

    lo, hi = max(0.0, wm - span * gam), wm + span * gam
    core, _ = integrate.quad(f, lo, hi, points=[wm], limit=500, epsabs=0, epsrel=1e-12)
    left, _ = integrate.quad(f, 0.0, lo, limit=500, epsabs=0, epsrel=1e-12) if lo > 0 else (0.0, 0.0)
    right, _ = integrate.quad(f, hi, np.inf, limit=500, epsabs=0, epsrel=1e-12)
    return l**2 * 2.0 * (core + left + right) * scale


def psd_integral_exact(l: int, temperature_K: float, mirror: MirrorParams) -> float:
    """Analytic value of the same integral, ``4 pi l^2 k_B T / (I w_m^2)``."""
    return (
        4 * math.pi * l**2 * K_B * temperature_K
        / (mirror.moment_of_inertia_kg_m2 * mirror.angular_freq_rad_s**2)
    )


@dataclass(frozen=True)
class PurcellRates:
    gamma_c: float
    gamma_mn: dict[str, float]
    decay_table: dict[str, float]


def purcell_gamma(p: SystemParams, gamma_free: float | None = None) -> PurcellRates:
    """Cavity-modified decay and the coherence damping table.

    ``Gamma_c = Gamma_free lambda^3 / (4 pi^2 V)``.  Levels 3 and 4 are the
    excited states decaying to grounds 1 and 2 with ``Gamma_41 = Gamma_42 =
    Gamma_31 = Gamma_32 = Gamma_free``; the coherence damping is
    ``gamma_mn = (sum_k Gamma_mk + sum_k Gamma_nk) / 2``.
    """
    v = p.cavity.mode_volume_m3
    if v is None:
        raise ValueError("mode volume is required for the Purcell rate")
    gf = p.atoms.dephasing_rad_s if gamma_free is None else gamma_free
    lam = p.cavity.wavelength_m
    gamma_c = gf * lam**3 / (4 * math.pi**2 * v)
    table = {"41": gf, "42": gf, "31": gf, "32": gf}
    out = {k: 0.0 for k in (1, 2, 3, 4)}
    for key, rate in table.items():
        out[int(key[0])] += rate
    gamma_mn = {}
    for m in range(1, 5):
        for n in range(m + 1, 5):
            gamma_mn[f"{m}{n}"] = (out[m] + out[n]) / 2
    return PurcellRates(gamma_c, gamma_mn, table)


def noise_report(p: SystemParams, temperatures) -> dict:
    """Noise figures for each temperature, plus the closed-form/integral ratio.

    ``closed_form_to_integral`` is ``sigma_closed^2 / int l^2 S dw``.  The
    closed form carries an extra factor ``1 / gamma`` relative to the PSD
    integral, so the ratio equals ``1 / (4 pi gamma)`` in seconds; it is
    reported rather than absorbed.
    """
    m = p.mirror
    l = p.cavity.cavity_oam
    entries = []
    for t in temperatures:
        t = float(t)
        sigma = rms_phase_error(l, t, m)
        integral = psd_integral(l, t, m)
        exact = psd_integral_exact(l, t, m)
        entries.append(
            {
                "temperature_K": t,
                "sigma_psi_rad": sigma,
                "psd_at_resonance": psd_angular(m.angular_freq_rad_s, t, m),
                "psd_integral_numeric": integral,
                "psd_integral_exact": exact,
                "closed_form_to_integral": (sigma**2 / integral) if integral > 0 else None,
            }
        )
    g_phi = p.couplings.g_phi
    report = {
        "l": l,
        "quality_factor": m.quality_factor,
        "psi_zpf_rad": zero_point(m),
        "g_phi": g_phi,
        "G": p.couplings.G,
        "zpf_times_g_phi": zero_point(m) * g_phi,
        "expected_closed_form_to_integral_s": 1.0 / (4 * math.pi * m.damping_rad_s)
        if m.damping_rad_s > 0
        else None,
        "temperatures": entries,
    }
    if p.cavity.mode_volume_m3 is not None:
        rates = purcell_gamma(p)
        report["gamma_c_rad_s"] = rates.gamma_c
        report["gamma_mn_rad_s"] = rates.gamma_mn
    return report
