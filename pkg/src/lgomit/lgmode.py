"""Laguerre-Gaussian profiles, loop-phase arithmetic and ensemble sums.

Profiles use the peak-normalized convention: the radial envelope of charge
``l`` is ``(sqrt(2) rho / w)**|l| * exp(-rho**2 / w**2)`` rescaled so that its
maximum, reached at ``rho* = w sqrt(|l| / 2)``, equals the configured peak
amplitude.  Only the p = 0 radial family is modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .params import LUMPED, RADIAL_LINE, AtomParams


@dataclass(frozen=True)
class LGProfile:
    oam: int
    waist_m: float
    peak_amplitude: float = 1.0


@dataclass(frozen=True)
class AtomDistribution:
    """Spatial model turning sums over atoms into a single aggregate.

    Attributes
    ----------
    mode : str
        ``"lumped"`` or ``"radial_line"``.
    azimuth_rad : float
        Common azimuth of every atom on the radial line.
    radial_samples : tuple of (rho_m, weight)
        For the radial line, ``weight`` is the coupling ``g(rho_j)`` in rad/s
        of the atom (or atom group) at ``rho_j``.
    lumped_coupling_rad_s : float
        The total coupling ``sum_j g(rho_j)`` used by the lumped model.
    """

    mode: str = LUMPED
    azimuth_rad: float = math.pi / 2
    radial_samples: tuple[tuple[float, float], ...] = ()
    lumped_coupling_rad_s: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in (LUMPED, RADIAL_LINE):
            raise ValueError(f"unknown distribution mode {self.mode!r}")
        if self.lumped_coupling_rad_s < 0:
            raise ValueError("lumped coupling must be >= 0")
        if any(w < 0 for _, w in self.radial_samples):
            raise ValueError("radial sample weights must be >= 0")

    @classmethod
    def from_atoms(cls, atoms: AtomParams) -> "AtomDistribution":
        return cls(
            mode=atoms.distribution,
            azimuth_rad=atoms.azimuth_rad,
            radial_samples=tuple(atoms.radial_samples),
            lumped_coupling_rad_s=atoms.atom_cavity_coupling_sum_rad_s,
        )


def _log_peak(l: int) -> float:
    """Log of the raw envelope maximum, ``(|l|/e)**(|l|/2)``."""
    a = abs(l)
    if a == 0:
        return 0.0
    return 0.5 * a * (math.log(a) - 1.0)


def lg_envelope(rho_m, profile: LGProfile):
    """Peak-normalized radial amplitude of an LG_0^l mode.

    Works on scalars and arrays; evaluated in log space so large charges do
    not overflow.
    """
    rho = np.asarray(rho_m, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be >= 0")
    a = abs(profile.oam)
    s = rho / profile.waist_m
    if a == 0:
        out = np.exp(-(s**2))
    else:
        with np.errstate(divide="ignore"):
            log_val = a * np.log(math.sqrt(2.0) * s) - s**2 - _log_peak(a)
        out = np.exp(log_val)
    out = profile.peak_amplitude * out
    return out if np.ndim(out) else float(out)


def envelope_peak_radius(oam: int, waist_m: float) -> float:
    """Radius ``w sqrt(|l|/2)`` where the envelope reaches its peak."""
    return waist_m * math.sqrt(abs(oam) / 2.0)


def envelope_norm_sq(oam: int, waist_m: float) -> float:
    """Transverse integral of the squared peak-normalized envelope.

    ``int |u|^2 dA = pi w^2 |l|! / 2 / (|l|/e)^|l|`` for the raw-normalized
    profile ``(sqrt2 rho/w)^|l| e^{-rho^2/w^2}``.
    """
    a = abs(oam)
    log_val = math.lgamma(a + 1) - 2.0 * _log_peak(a)
    return math.pi * waist_m**2 / 2.0 * math.exp(log_val)


def lg_field(rho_m, theta_rad, profile: LGProfile):
    """Complex LG amplitude ``envelope(rho) * exp(i l theta)``."""
    env = lg_envelope(rho_m, profile)
    return env * np.exp(1j * profile.oam * np.asarray(theta_rad, dtype=float))


def loop_phase(delta_ell: int, l: int, theta_rad: float) -> complex:
    """Loop phase ``exp(i (delta_ell + 2 l) theta)`` picked up by the FWM loop."""
    return complex(np.exp(1j * (delta_ell + 2 * l) * theta_rad))


def parity_reduced_loop_phase(delta_ell: int, l: int) -> complex:
    """Reduced form ``exp(-+ i delta_ell pi / 2)`` at ``theta = pi/2``.

    Upper sign for odd ``l``, lower sign for even ``l``.  It coincides with
    :func:`loop_phase` at ``theta = pi/2`` for every even ``l`` and, for odd
    ``l``, only when ``delta_ell`` is odd.
    """
    sign = -1.0 if l % 2 else 1.0
    return complex(np.exp(1j * sign * delta_ell * math.pi / 2))


def ensemble_sum(
    dist: AtomDistribution,
    integrand: Callable[[float, float], complex],
    operating_rho_m: float = 0.0,
) -> complex:
    """Aggregate ``sum_j g(rho_j) X(rho_j)`` for a distribution.

    ``integrand(rho, g)`` returns ``X`` for an atom at radius ``rho`` whose
    cavity coupling is ``g``; susceptibilities depend on ``g`` themselves.

    Lumped mode evaluates the integrand once, at ``operating_rho_m`` with
    ``g = lumped_coupling``, and scales by the lumped coupling.  Radial-line
    mode returns the weighted sum ``sum_j w_j X(rho_j, w_j)``.
    """
    if dist.mode == LUMPED:
        g = dist.lumped_coupling_rad_s
        if g == 0:
            return 0j
        return g * complex(integrand(operating_rho_m, g))
    if not dist.radial_samples:
        raise ValueError("radial line distribution has no samples")
    total = 0j
    for rho, weight in dist.radial_samples:
        if weight:
            total += weight * complex(integrand(rho, weight))
    return total


def rabi_at(
    rho_m: float,
    peaks: Sequence[float],
    oams: Sequence[int],
    waist_m: float,
) -> tuple[float, float, float]:
    """Local Rabi frequencies of the three beams at radius ``rho_m``."""
    return tuple(
        float(lg_envelope(rho_m, LGProfile(l, waist_m, pk)))
        for pk, l in zip(peaks, oams)
    )
