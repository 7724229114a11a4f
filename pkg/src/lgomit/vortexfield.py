"""Output field as a superposition of OAM components, and spot statistics.

Each component is rendered with the peak-normalized LG envelope whose radial
index equals its azimuthal charge, so components of different charge sit on
rings of different radius.  Petals appear where two charges overlap: the
intensity on a circle is modulated with the difference of their charges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lgmode import LGProfile, envelope_norm_sq, lg_envelope
from .params import SystemParams
from .steadystate import OperatingPoint, SteadyState, operating_point

REFLECTED_PROBE = "ReflectedProbe"
REFLECTED_DRIVE = "ReflectedDrive"
CAVITY_DRIVE = "CavityDriveOutput"
CAVITY_FWM = "CavityFwmOutput"
DRIVE_BACKGROUND = "DriveBackground"

OFF_RESONANT = "off_resonant"
ALL_RESONANT = "all_resonant"
SCENARIOS = (OFF_RESONANT, ALL_RESONANT)

ANGULAR_SAMPLES = 512
PEAK_THRESHOLD = 0.05
#: Relative contrast below which a circle is treated as azimuthally uniform.
FLAT_CONTRAST = 1e-9


@dataclass(frozen=True)
class FieldComponent:
    amplitude: complex
    oam: int
    label: str

    def __post_init__(self) -> None:
        if not np.isfinite(self.amplitude):
            raise ValueError("component amplitude must be finite")
        if self.label == DRIVE_BACKGROUND and self.oam != 0:
            raise ValueError("the drive background carries no OAM")

    @property
    def radial_oam_index(self) -> int:
        return abs(self.oam)


def decompose_output(
    p: SystemParams,
    ss: SteadyState,
    scenario: str,
    op: OperatingPoint | None = None,
) -> list[FieldComponent]:
    """Split the total output field into its OAM-carrying parts.

    The steady cavity amplitude is split into a drive-fed part ``E_d / D``
    and an FWM-fed part ``i sum(gB) / D`` with ``D = kappa' + i Dt``.  The
    FWM part carries the loop charge; its azimuthal phase is rendered
    explicitly, so the loop-phase factor is not included in the amplitude.
    Reflected components are omitted when the reflectivity is zero.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}")
    if op is None:
        op = operating_point(p)
    l = p.cavity.cavity_oam
    kappa = p.cavity.cavity_decay_rad_s
    eta = p.drive.mirror_reflectivity
    d = ss.kappa_prime + 1j * ss.delta_tilde
    a_drive = p.drive_amplitude / d
    a_fwm = 1j * op.agg.sum_gB / d
    comps = []
    if eta > 0:
        comps.append(FieldComponent(complex(eta * p.probe_amplitude), -2 * l, REFLECTED_PROBE))
        if scenario == ALL_RESONANT:
            comps.append(FieldComponent(complex(eta * p.drive_amplitude), -2 * l, REFLECTED_DRIVE))
    comps += [
        FieldComponent(complex(2 * kappa * a_drive), 2 * l, CAVITY_DRIVE),
        FieldComponent(complex(2 * kappa * a_fwm), p.couplings.ell_theta, CAVITY_FWM),
        FieldComponent(complex(-p.drive_amplitude), 0, DRIVE_BACKGROUND),
    ]
    return comps


def field_at(
    components: Sequence[FieldComponent], rho, theta, waist_m: float
) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(np.broadcast(rho, theta).shape, dtype=complex)
    for c in components:
        if c.amplitude == 0:
            continue
        env = lg_envelope(rho, LGProfile(c.radial_oam_index, waist_m, 1.0))
        out = out + c.amplitude * env * np.exp(1j * c.oam * theta)
    return out


def azimuthal_mean_intensity(
    components: Sequence[FieldComponent], rho, waist_m: float
) -> np.ndarray:
    """Intensity averaged over the azimuth (cross terms of unequal charge drop)."""
    rho = np.asarray(rho, dtype=float)
    by_charge: dict[int, np.ndarray] = {}
    for c in components:
        env = lg_envelope(rho, LGProfile(c.radial_oam_index, waist_m, 1.0))
        by_charge[c.oam] = by_charge.get(c.oam, 0) + c.amplitude * env
    return sum(np.abs(v) ** 2 for v in by_charge.values())


def expected_power(components: Sequence[FieldComponent], waist_m: float) -> float:
    """Transverse integral of the intensity from orthogonality of the charges."""
    by_charge: dict[int, complex] = {}
    for c in components:
        by_charge[c.oam] = by_charge.get(c.oam, 0) + c.amplitude
    return sum(abs(a) ** 2 * envelope_norm_sq(m, waist_m) for m, a in by_charge.items())


@dataclass(frozen=True)
class SpotImage:
    x_m: np.ndarray
    y_m: np.ndarray
    field: np.ndarray
    intensity: np.ndarray
    phase: np.ndarray
    components: tuple[FieldComponent, ...]
    waist_m: float
    rotation_rad: float
    ring_radius_m: float
    petal_count: int
    ring_period_count: int


def ring_radius(
    components: Sequence[FieldComponent], waist_m: float, rho_max_m: float
) -> float:
    """Radius of the brightest ring of the azimuthally averaged intensity."""
    rho = np.linspace(0.0, rho_max_m, 4097)
    prof = azimuthal_mean_intensity(components, rho, waist_m)
    return float(rho[int(np.argmax(prof))])


def _circle(image: SpotImage, radius_m: float) -> np.ndarray:
    theta = 2 * math.pi * np.arange(ANGULAR_SAMPLES) / ANGULAR_SAMPLES
    vals = field_at(image.components, radius_m, theta + image.rotation_rad, image.waist_m)
    inten = np.abs(vals) ** 2
    if not np.any(inten > 0):
        raise ValueError("intensity vanishes on the sampling circle")
    return inten


def _resolve_radius(image: SpotImage, radius_fraction: float | None, radius_m: float | None) -> float:
    if radius_m is not None:
        return radius_m
    frac = 1.0 if radius_fraction is None else radius_fraction
    if not 0 < frac <= 1:
        raise ValueError("radius_fraction must be in (0, 1]")
    return frac * image.ring_radius_m


def count_maxima(values: np.ndarray, threshold: float = PEAK_THRESHOLD) -> int:
    """Strict local maxima of a periodic sequence above ``threshold * max``."""
    top = float(np.max(values))
    if top <= 0:
        raise ValueError("all-zero samples")
    if (top - float(np.min(values))) <= FLAT_CONTRAST * top:
        return 0
    left = np.roll(values, 1)
    right = np.roll(values, -1)
    peaks = (values > left) & (values > right) & (values >= threshold * top)
    return int(np.count_nonzero(peaks))


def count_petals(
    image: SpotImage,
    radius_fraction: float | None = 1.0,
    radius_m: float | None = None,
) -> int:
    """Number of intensity maxima on a circle (512 samples, 5% floor).

    The circle radius is ``radius_fraction`` times the brightest ring radius,
    unless ``radius_m`` is given explicitly.
    """
    return count_maxima(_circle(image, _resolve_radius(image, radius_fraction, radius_m)))


def dominant_period(values: np.ndarray) -> int:
    """Index of the strongest nonzero azimuthal harmonic (0 if uniform)."""
    top = float(np.max(values))
    if (top - float(np.min(values))) <= FLAT_CONTRAST * top:
        return 0
    spec = np.abs(np.fft.rfft(values))
    spec[0] = 0.0
    return int(np.argmax(spec))


def count_ring_periods(
    image: SpotImage,
    radius_fraction: float | None = 1.0,
    radius_m: float | None = None,
) -> int:
    """Azimuthal period count of the intensity modulation on a circle."""
    return dominant_period(_circle(image, _resolve_radius(image, radius_fraction, radius_m)))


def render_spot(
    components: Sequence[FieldComponent],
    waist_m: float,
    n: int = 512,
    extent_w: float = 4.0,
    rotation_rad: float = 0.0,
) -> SpotImage:
    """Sample the field on an ``n x n`` grid spanning ``+-extent_w`` waists.

    ``rotation_rad`` is added to the azimuth of every pixel.
    """
    if n < 64:
        raise ValueError("grid needs N >= 64")
    if not extent_w > 0 or not waist_m > 0:
        raise ValueError("grid extent and waist must be > 0")
    comps = tuple(components)
    axis = np.linspace(-extent_w * waist_m, extent_w * waist_m, n)
    xx, yy = np.meshgrid(axis, axis, indexing="xy")
    rho = np.hypot(xx, yy)
    theta = np.arctan2(yy, xx) + rotation_rad
    fld = field_at(comps, rho, theta, waist_m)
    inten = np.abs(fld) ** 2
    phase = np.angle(fld)
    phase = np.where(phase <= -math.pi, math.pi, phase)
    r_ring = ring_radius(comps, waist_m, extent_w * waist_m)
    img = SpotImage(axis, axis.copy(), fld, inten, phase, comps, waist_m, rotation_rad, r_ring, 0, 0)
    if r_ring == 0.0 or not np.any(inten > 0):
        return img
    return SpotImage(
        axis,
        axis.copy(),
        fld,
        inten,
        phase,
        comps,
        waist_m,
        rotation_rad,
        r_ring,
        count_petals(img),
        count_ring_periods(img),
    )


def overlap_radius(m1: int, m2: int, waist_m: float) -> float:
    """Radius maximizing the product of two peak-normalized envelopes."""
    return waist_m * math.sqrt((abs(m1) + abs(m2)) / 4.0)


def to_pgm(values: np.ndarray, lo: float, hi: float) -> bytes:
    """8-bit binary graymap (P5) mapping ``[lo, hi]`` onto ``[0, 255]``."""
    arr = np.asarray(values, dtype=float)
    span = hi - lo
    scaled = np.zeros_like(arr) if span <= 0 else (arr - lo) / span
    pix = np.clip(np.rint(scaled * 255.0), 0, 255).astype(np.uint8)
    rows, cols = pix.shape
    # Row 0 of the image is the top edge (largest y).
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + pix[::-1].tobytes()


def intensity_pgm(image: SpotImage) -> bytes:
    return to_pgm(image.intensity, 0.0, float(np.max(image.intensity)))


def phase_pgm(image: SpotImage) -> bytes:
    return to_pgm(image.phase, -math.pi, math.pi)
