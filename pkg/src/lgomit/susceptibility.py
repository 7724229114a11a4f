"""Atomic linear and four-wave-mixing response of the double-Lambda ensemble.

The coherence driven by the cavity field is written as ``A a + B``: ``A`` is
the linear response (it renormalizes the cavity damping and frequency) and
``B`` is the four-wave-mixing source.  Two branches are provided depending on
which of the beams is weak.  Azimuthal phases of the beams are not attached
here; the loop phase is applied once, downstream.

All rates are in rad/s.  Functions accept plain floats so they can be tested
in dimensionless units (e.g. ``gamma_e = 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lgmode import AtomDistribution, ensemble_sum, loop_phase, rabi_at
from .params import K_B, LUMPED, WEAK_ALPHA, WEAK_BETA, SystemParams

#: Denominators smaller than this (in internal units) are treated as singular.
SINGULAR_TOL = 1e-30


class SingularityError(ArithmeticError):
    """A susceptibility denominator vanished."""


@dataclass(frozen=True)
class SusceptibilityPair:
    a_lin: complex
    b_fwm: complex
    branch: int


@dataclass(frozen=True)
class DopplerParams:
    temperature_K: float
    atomic_mass_kg: float
    wavevector_rad_m: float

    def __post_init__(self) -> None:
        if not self.temperature_K > 0:
            raise ValueError("Doppler correction needs T > 0")

    @property
    def mu_m_s(self) -> float:
        """Most probable speed sqrt(2 k_B T / m)."""
        return math.sqrt(2.0 * K_B * self.temperature_K / self.atomic_mass_kg)


def _check(dd: complex, name: str) -> complex:
    if not np.isfinite(dd) or abs(dd) < SINGULAR_TOL:
        raise SingularityError(f"{name} vanishes (|{name}| = {abs(dd):.3e})")
    return dd


def dd0(delta_c: complex, gamma_e: float, om_b: float, om_z: float) -> complex:
    """Weak-alpha denominator.

    ``delta_c`` may be complex, which is how the Doppler average enters.
    """
    b2, z2 = abs(om_b) ** 2, abs(om_z) ** 2
    return (
        delta_c**2 * gamma_e
        - (b2 + z2) * gamma_e
        - 1j * delta_c * (b2 + gamma_e**2)
    )


def chi_weak_alpha(
    g: float,
    rabi: tuple[complex, complex, complex],
    gamma_e: float,
    delta_c: float = 0.0,
) -> SusceptibilityPair:
    """Response when the alpha beam is weak.

    ``A0 = g (delta_c gamma_e - i |Om_b|^2) / DD0`` and
    ``B0 = i Om_a conj(Om_b) Om_z / DD0``.
    """
    om_a, om_b, om_z = rabi
    d = _check(dd0(delta_c, gamma_e, om_b, om_z), "DD0")
    a = g * (delta_c * gamma_e - 1j * abs(om_b) ** 2) / d
    b = 1j * om_a * np.conj(om_b) * om_z / d
    return SusceptibilityPair(complex(a), complex(b), 0)


def dd1(delta_c: float, gamma_e: float, om: float) -> complex:
    o2 = abs(om) ** 2
    return (
        (1j * delta_c + gamma_e)
        * (4 * o2 - delta_c**2 + 2j * delta_c * gamma_e)
        * (2 * o2 + gamma_e**2)
    )


def chi_weak_beta(
    g: float,
    rabi: tuple[complex, complex, complex],
    gamma_e: float,
    delta_c: float = 0.0,
) -> SusceptibilityPair:
    """Response when the beta beam is weak (alpha and zeta share one Rabi value)."""
    om_a, om_b, om_z = rabi
    if not np.isclose(abs(om_a), abs(om_z), rtol=1e-12, atol=0):
        raise ValueError("weak-beta branch needs |Om_alpha| == |Om_zeta|")
    om = om_a
    o2 = abs(om) ** 2
    d = _check(dd1(delta_c, gamma_e, om), "DD1")
    a = (
        -g
        * delta_c
        * gamma_e
        * (gamma_e**2 - o2 + 1j * delta_c * gamma_e / 2)
        / d
    )
    b = om**2 * np.conj(om_b) * gamma_e * (delta_c - 2j * gamma_e) / d
    return SusceptibilityPair(complex(a), complex(b), 1)


def doppler_shift(doppler: DopplerParams) -> float:
    """Imaginary detuning offset ``k sqrt(mu ln2 / 2)``."""
    return doppler.wavevector_rad_m * math.sqrt(doppler.mu_m_s * math.log(2) / 2)


def doppler_prefactor(doppler: DopplerParams) -> float:
    """Overall factor ``sqrt(pi ln2) / sqrt(2 mu)``."""
    return math.sqrt(math.pi * math.log(2)) / math.sqrt(2 * doppler.mu_m_s)


def chi_doppler(
    g: float,
    rabi: tuple[complex, complex, complex],
    gamma_e: float,
    delta_c: float,
    doppler: DopplerParams,
) -> SusceptibilityPair:
    """Thermally averaged weak-alpha response.

    Implements the Maxwellian approximation literally: the detuning is shifted
    to ``delta_c + i k sqrt(mu ln2 / 2)`` and the result multiplied by
    ``sqrt(pi ln2) / sqrt(2 mu)``.  Because that factor diverges as ``T -> 0``
    the correction does not reduce to the cold response; ``T = 0`` is
    rejected.
    """
    shifted = delta_c + 1j * doppler_shift(doppler)
    base = chi_weak_alpha(g, rabi, gamma_e, shifted)
    pref = doppler_prefactor(doppler)
    return SusceptibilityPair(pref * base.a_lin, pref * base.b_fwm, 0)


def mismatch_factor(delta_k_rad_m: float, z_m: float) -> complex:
    """Propagation phase ``exp(i dk z)``; exactly 1 when ``dk z == 0``."""
    phase = delta_k_rad_m * z_m
    if phase == 0:
        return 1.0 + 0j
    return complex(np.exp(1j * phase))


def chi_mismatch(b0: complex, delta_k_rad_m: float, z_m: float) -> complex:
    """FWM coefficient with the phase-mismatch factor attached."""
    if delta_k_rad_m * z_m == 0:
        return b0
    return b0 * mismatch_factor(delta_k_rad_m, z_m)


def mismatch_threshold(cavity_length_m: float, wavelength_m: float) -> float:
    """Largest ``|dk / k_c|`` with ``dk L <= pi/2``."""
    dk = math.pi / (2.0 * cavity_length_m)
    return dk / (2.0 * math.pi / wavelength_m)


# ----------------------------------------------------------------------------
# Ensemble aggregates
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Aggregates:
    """Ensemble sums ``sum g A`` and ``sum g B``.

    ``sum_gB`` carries the propagation phase-mismatch factor but not the loop
    phase; ``loop`` is the loop-phase factor applied wherever the FWM source
    drives the cavity.
    """

    sum_gA: complex
    sum_gB: complex
    loop: complex

    @property
    def fwm_source(self) -> complex:
        return self.sum_gB * self.loop


def local_chi(p: SystemParams, g: float, rabi) -> SusceptibilityPair:
    at = p.atoms
    env = p.environment
    if env.doppler:
        if at.weak_field_branch != WEAK_ALPHA:
            raise ValueError("Doppler correction is defined for the weak-alpha branch")
        dop = DopplerParams(env.temperature_K, at.atomic_mass_kg, p.cavity.wavevector)
        return chi_doppler(g, rabi, at.dephasing_rad_s, at.cavity_atom_detuning_rad_s, dop)
    if at.weak_field_branch == WEAK_ALPHA:
        return chi_weak_alpha(g, rabi, at.dephasing_rad_s, at.cavity_atom_detuning_rad_s)
    if at.weak_field_branch == WEAK_BETA:
        return chi_weak_beta(g, rabi, at.dephasing_rad_s, at.cavity_atom_detuning_rad_s)
    raise ValueError(at.weak_field_branch)


def ensemble_aggregates(p: SystemParams) -> Aggregates:
    """Compute ``sum g A`` and ``sum g B`` for the configured ensemble.

    In the lumped model the ensemble behaves as one emitter with coupling
    ``sum g`` driven at the peak Rabi frequencies.  For a radial line each
    sample sees the local LG Rabi frequencies.  A centrosymmetric ensemble
    has no net FWM source whenever the loop charge is nonzero.
    """
    c = p.couplings
    loop = loop_phase(c.delta_ell, p.cavity.cavity_oam, p.atoms.azimuth_rad)
    if not p.atoms.enabled:
        return Aggregates(0j, 0j, loop)
    at = p.atoms
    dist = AtomDistribution.from_atoms(at)

    def rabi_for(rho: float):
        if dist.mode == LUMPED:
            return at.rabi_peak_rad_s
        return rabi_at(rho, at.rabi_peak_rad_s, at.oam, at.beam_waist_m)

    sum_a = ensemble_sum(dist, lambda rho, g: local_chi(p, g, rabi_for(rho)).a_lin)
    sum_b = ensemble_sum(dist, lambda rho, g: local_chi(p, g, rabi_for(rho)).b_fwm)
    sum_b = chi_mismatch(
        sum_b, p.environment.phase_mismatch_rad_m, p.environment.propagation_z_m
    )
    if at.centrosymmetric and c.ell_theta != 0:
        sum_b = 0j
    return Aggregates(sum_a, sum_b, loop)


def kappa_eff(p: SystemParams) -> float:
    """Atom-renormalized cavity damping ``kappa - Im(sum g A)``."""
    return p.cavity.cavity_decay_rad_s - ensemble_aggregates(p).sum_gA.imag
