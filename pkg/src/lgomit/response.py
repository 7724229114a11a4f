"""Probe response: fluctuation amplitudes, output quadratures and group delay.

For a weak probe at detuning ``delta_p`` from the drive, the positive
frequency fluctuation of the cavity field (per unit probe amplitude) is

    da+ = (1 - i F / E_p) / (kappa' - i (delta_p - Dt) - G^2 n / (gamma - i (delta_p - w)))

with ``F`` the loop-phased FWM source, ``Dt`` the effective detuning of the
operating branch and ``w`` the mechanical frequency.  The transmitted probe
is ``t_p = 1 - 2 kappa da+ = 1 - u_p - i v_p``; its phase gives the group
delay.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .params import RED_SIDEBAND, WEAK_ALPHA, SystemParams, params_digest
from .steadystate import (
    OperatingPoint,
    SteadyState,
    operating_point,
    params_at,
    select_branch,
    solve_photon_number,
)

SINGULAR_TOL = 1e-30
#: |t_p|^2 below this marks the phase as undefined.
PHASE_UNDEFINED_TOL = 1e-12


class ResponseSingularityError(ArithmeticError):
    """The fluctuation denominator vanished on the grid."""


@dataclass(frozen=True)
class SpectrumSeries:
    delta_p: np.ndarray
    u_p: np.ndarray
    v_p: np.ndarray
    t_p: np.ndarray
    theta: np.ndarray
    tau_a: np.ndarray
    tau_b: np.ndarray
    phase_defined: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def tau_g(self) -> np.ndarray:
        return self.tau_a


def _denominators(p: SystemParams, ss: SteadyState, delta_p: np.ndarray):
    G = p.couplings.G
    w = p.mirror.angular_freq_rad_s
    gam = p.mirror.damping_rad_s
    g2n = G**2 * ss.n_c
    xc = delta_p - ss.delta_tilde
    xm = delta_p - w
    d_plus = ss.kappa_prime - 1j * xc - g2n / (gam - 1j * xm)
    d_minus = ss.kappa_prime + 1j * xc - g2n / (gam + 1j * xm)
    return d_plus, d_minus


def delta_a_pm(
    p: SystemParams,
    ss: SteadyState,
    delta_p,
    op: OperatingPoint | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Positive- and negative-frequency probe fluctuations per unit probe amplitude.

    The FWM source is normalized by the probe amplitude, which keeps both
    terms of the numerator dimensionless.
    """
    if op is None:
        op = operating_point(p)
    dp = np.asarray(delta_p, dtype=float)
    d_plus, d_minus = _denominators(p, ss, dp)
    if np.any(np.abs(d_plus) < SINGULAR_TOL) or np.any(np.abs(d_minus) < SINGULAR_TOL):
        raise ResponseSingularityError("fluctuation denominator vanishes")
    seed = op.agg.fwm_source / p.probe_amplitude
    return (1.0 - 1j * seed) / d_plus, (-1j * seed) / d_minus


def group_delay(
    delta_p: np.ndarray, u_p: np.ndarray, v_p: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Group delay by two independent discretizations.

    Returns ``(theta, tau_a, tau_b, defined)``.  ``tau_a`` differentiates the
    unwrapped phase of ``t_p``.  ``tau_b`` evaluates the tangent form
    ``d/dw[v/(u-1)] (u-1)^2 / ((u-1)^2 + v^2)`` where the ratio derivative is
    expanded by the quotient rule on differentiated ``u`` and ``v`` so that
    the pole of the ratio at ``u = 1`` cancels analytically.  Both use second
    order central differences with second-order one-sided ends.  ``defined``
    is False where ``|t_p|^2`` vanishes; both delays are NaN there.
    """
    w = np.asarray(delta_p, dtype=float)
    if w.size < 3:
        raise ValueError("group delay needs at least 3 grid points")
    if np.any(np.diff(w) <= 0):
        raise ValueError("probe grid must be strictly increasing")
    um1 = u_p - 1.0
    mag2 = um1**2 + v_p**2
    defined = mag2 > PHASE_UNDEFINED_TOL
    theta = np.unwrap(np.angle((1.0 - u_p) - 1j * v_p))
    tau_a = np.gradient(theta, w, edge_order=2)
    du = np.gradient(u_p, w, edge_order=2)
    dv = np.gradient(v_p, w, edge_order=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau_b = (dv * um1 - v_p * du) / mag2
    tau_a = np.where(defined, tau_a, np.nan)
    tau_b = np.where(defined, tau_b, np.nan)
    return theta, tau_a, tau_b, defined


def output_spectrum(
    p: SystemParams,
    ss: SteadyState,
    grid,
    op: OperatingPoint | None = None,
) -> SpectrumSeries:
    """Output quadratures, transmission, phase and delay on a probe grid (rad/s)."""
    if op is None:
        op = operating_point(p)
    dp = np.asarray(grid, dtype=float)
    if dp.ndim != 1 or np.any(np.diff(dp) <= 0):
        raise ValueError("probe grid must be strictly increasing")
    plus, _ = delta_a_pm(p, ss, dp, op)
    e_t = 2.0 * p.cavity.cavity_decay_rad_s * plus
    u, v = e_t.real.copy(), e_t.imag.copy()
    t_p = (1.0 - u) - 1j * v
    theta, tau_a, tau_b, defined = group_delay(dp, u, v)
    meta = {
        "params_digest": params_digest(p),
        "branch_index": ss.branch_index,
        "n_c": ss.n_c,
        "delta_ell": p.couplings.delta_ell,
        "theta_rad": p.atoms.azimuth_rad,
    }
    return SpectrumSeries(dp, u, v, t_p, theta, tau_a, tau_b, defined, meta)


def spectrum_for(
    p: SystemParams, grid, branch: int | None = None
) -> SpectrumSeries:
    """Solve the steady state, select the branch and compute the spectrum."""
    op = operating_point(p)
    states = solve_photon_number(p, op)
    ss = select_branch(p, states, branch, op)
    return output_spectrum(p, ss, grid, op)


# ----------------------------------------------------------------------------
# Closed forms
# ----------------------------------------------------------------------------


def check_closed_form_preconditions(p: SystemParams) -> None:
    at = p.atoms
    problems = []
    if at.weak_field_branch != WEAK_ALPHA:
        problems.append("weak-alpha branch")
    if at.cavity_atom_detuning_rad_s != 0:
        problems.append("delta_c = 0")
    if not math.isclose(at.azimuth_rad, math.pi / 2, rel_tol=0, abs_tol=1e-15):
        problems.append("theta = pi/2")
    if p.cavity.cavity_oam % 2:
        problems.append("even l")
    if at.distribution != "lumped" or at.centrosymmetric:
        problems.append("lumped, non-centrosymmetric ensemble")
    if p.environment.doppler or p.environment.phase_mismatch_rad_m * p.environment.propagation_z_m:
        problems.append("no Doppler or phase-mismatch correction")
    if p.cavity.detuning_mode != RED_SIDEBAND:
        problems.append("red-sideband locked detuning")
    if problems:
        raise ValueError("closed form requires: " + ", ".join(problems))


#: exp(i delta_ell pi / 2) as exact (cos, sin) pairs.
_QUARTER_TURNS = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0)}


def closed_form_uv(
    p: SystemParams, delta_p, delta_ell: int, n_c: float
) -> tuple[np.ndarray, np.ndarray]:
    """Rational closed forms for ``(u_p, v_p)`` at ``delta_ell`` in {0, 1, 2}.

    Valid for the weak-alpha branch at ``delta_c = 0``, ``theta = pi/2``,
    even ``l`` and a red-sideband locked operating point.  With
    ``x = delta_p - w``:

    ``G_ = gamma^2 + x^2``, ``M_ = G^2 n + x^2 + gamma^2``,
    ``N_ = kappa_eff x^2 - G^2 n gamma + kappa_eff gamma^2`` and
    ``DD = gamma_e^2 Om^4 (N_^2 + x^2 M_^2) / G_`` where
    ``Om^2 = Om_b^2 + Om_z^2`` and ``kappa_eff = kappa - g^2 Om_b^2 / (gamma_e Om^2)``.
    The FWM term enters through ``S = g Om_a Om_b Om_z / E_p`` rotated by the
    loop phase ``exp(i delta_ell pi / 2)``.
    """
    if delta_ell not in (0, 1, 2):
        raise ValueError("closed forms exist for delta_ell in {0, 1, 2}")
    check_closed_form_preconditions(p)
    at = p.atoms
    x = np.asarray(delta_p, dtype=float) - p.mirror.angular_freq_rad_s
    gam = p.mirror.damping_rad_s
    kappa = p.cavity.cavity_decay_rad_s
    g2n = p.couplings.G ** 2 * n_c
    ge = at.dephasing_rad_s
    if at.enabled:
        oa, ob, oz = at.rabi_peak_rad_s
        gsum = at.atom_cavity_coupling_sum_rad_s
    else:
        oa = ob = oz = gsum = 0.0
    om2 = ob**2 + oz**2
    if om2 == 0:
        k_eff, s = kappa, 0.0
        om2 = 1.0
    else:
        k_eff = kappa - gsum**2 * ob**2 / (ge * om2)
        s = gsum * oa * ob * oz / p.probe_amplitude
    g_ = gam**2 + x**2
    m_ = g2n + x**2 + gam**2
    n_ = k_eff * x**2 - g2n * gam + k_eff * gam**2
    dd = ge**2 * om2**2 * (n_**2 + x**2 * m_**2) / g_
    if np.any(np.abs(dd) < SINGULAR_TOL):
        raise ResponseSingularityError("closed-form denominator vanishes")
    c, sn = _QUARTER_TURNS[delta_ell]
    re_num = ge * om2 - s * c
    im_num = -s * sn
    u = 2 * kappa * ge * om2 * (re_num * n_ - im_num * x * m_) / dd
    v = 2 * kappa * ge * om2 * (re_num * x * m_ + im_num * n_) / dd
    return u, v


# ----------------------------------------------------------------------------
# Grids and extremal search
# ----------------------------------------------------------------------------


def probe_grid(
    center: float, half_width: float, n: int, core: float | None = None
) -> np.ndarray:
    """Probe detunings around ``center``.

    Uniform when ``core`` is None.  Otherwise points follow
    ``center + core * sinh(s)`` with ``s`` uniform, which resolves structure
    of width ``~core`` at the center while still covering ``half_width``.
    """
    if n < 3:
        raise ValueError("grid needs at least 3 points")
    if core is None:
        return np.linspace(center - half_width, center + half_width, n)
    smax = math.asinh(half_width / core)
    return center + core * np.sinh(np.linspace(-smax, smax, n))


@dataclass(frozen=True)
class DelayExtrema:
    value: float
    tau_max: float
    tau_min: float
    argmax_delta_p: float
    argmin_delta_p: float


def _extrema(series: SpectrumSeries, value: float) -> DelayExtrema:
    tau = np.where(series.phase_defined, series.tau_a, np.nan)
    imax = int(np.nanargmax(tau))
    imin = int(np.nanargmin(tau))
    return DelayExtrema(
        value,
        float(tau[imax]),
        float(tau[imin]),
        float(series.delta_p[imax]),
        float(series.delta_p[imin]),
    )


def extremal_delay(
    p: SystemParams,
    grid_offsets,
    sweep_axis: str,
    sweep_grid: Sequence[float],
    threads: int = 1,
) -> list[DelayExtrema]:
    """Largest and smallest group delay along a power or OAM sweep.

    ``grid_offsets`` are probe detunings relative to the mechanical frequency.
    """
    if sweep_axis not in ("power", "oam"):
        raise ValueError("sweep axis must be 'power' or 'oam'")
    offsets = np.asarray(grid_offsets, dtype=float)

    def one(value: float) -> DelayExtrema:
        q = params_at(p, sweep_axis, value)
        grid = q.mirror.angular_freq_rad_s + offsets
        return _extrema(spectrum_for(q, grid), float(value))

    values = list(sweep_grid)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, values))
    return [one(v) for v in values]


def absorption_fwhm(delta_p, u_p) -> float:
    """Full width between the outermost half-maximum crossings of ``u_p``.

    Crossings are located by linear interpolation.  A narrow dip inside the
    feature does not shorten the width.  Raises ``ValueError`` when the
    feature is not contained in the grid.
    """
    x = np.asarray(delta_p, dtype=float)
    y = np.asarray(u_p, dtype=float)
    half = 0.5 * float(np.max(y))
    above = np.flatnonzero(y >= half)
    i, j = int(above[0]), int(above[-1])
    if i == 0 or j == len(y) - 1:
        raise ValueError("half-maximum crossing lies outside the grid")
    left = x[i - 1] + (half - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1])
    right = x[j] + (half - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j])
    return float(right - left)
