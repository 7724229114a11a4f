"""Physical parameters, unit handling and configuration parsing.

Every frequency-like quantity is stored internally in rad/s.  Configuration
documents are JSON objects whose frequencies are normally written in ordinary
Hz (keys ending in ``_Hz``); the loader multiplies those by 2*pi.  Each such
key also accepts an ``_rad_s`` twin so that a serialized parameter set can be
read back without any rounding.

The defaults reproduce the operating point used throughout the package:
a 0.2 mm cavity driven at 810 nm, a 100 ng rotating mirror of radius 10 um
oscillating at 2*pi x 35 MHz, and a double-Lambda atomic ensemble.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from scipy import constants

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
HBAR = constants.hbar
C_LIGHT = constants.c
K_B = constants.k

WEAK_ALPHA = "weak_alpha"
WEAK_BETA = "weak_beta"
BRANCHES = (WEAK_ALPHA, WEAK_BETA)

FIXED = "fixed"
RED_SIDEBAND = "red_sideband"
RESONANT = "resonant"
DETUNING_MODES = (FIXED, RED_SIDEBAND, RESONANT)

LUMPED = "lumped"
RADIAL_LINE = "radial_line"
DISTRIBUTION_MODES = (LUMPED, RADIAL_LINE)

#: Ratio above which the weak field is reported as "not weak".
WEAK_FIELD_WARNING_RATIO = 0.1


class ConfigError(ValueError):
    """Raised for malformed documents or violated parameter invariants."""


# ----------------------------------------------------------------------------
# Parameter groups
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CavityParams:
    """Optical cavity supporting a Laguerre-Gaussian mode of charge ``l``.

    ``detuning_mode`` selects how the drive detuning is fixed.  With
    ``"fixed"`` the value ``cavity_detuning_rad_s`` is used as given.  With
    ``"red_sideband"`` the detuning is solved self-consistently so that the
    effective detuning (including the optomechanical and atomic shifts) sits
    on the mechanical frequency; ``"resonant"`` does the same with the
    effective detuning set to zero.  In both locked modes
    ``cavity_detuning_rad_s`` is ignored.
    """

    cavity_length_m: float = 0.2e-3
    wavelength_m: float = 810e-9
    cavity_decay_rad_s: float = TWO_PI * 8e6
    cavity_oam: int = 40
    cavity_detuning_rad_s: float = 0.0
    detuning_mode: str = RED_SIDEBAND
    mode_volume_m3: float | None = None

    def validate(self) -> None:
        if not self.cavity_length_m > 0:
            raise ConfigError("cavity_length_m must be > 0")
        if not self.wavelength_m > 0:
            raise ConfigError("wavelength_m must be > 0")
        if not self.cavity_decay_rad_s > 0:
            raise ConfigError("cavity_decay_rad_s must be > 0")
        if self.detuning_mode not in DETUNING_MODES:
            raise ConfigError(f"detuning_mode must be one of {DETUNING_MODES}")
        if self.mode_volume_m3 is not None and not self.mode_volume_m3 > 0:
            raise ConfigError("mode_volume_m3 must be > 0 when given")

    @property
    def drive_angular_freq(self) -> float:
        """Optical angular frequency of the drive, 2*pi*c/lambda."""
        return TWO_PI * C_LIGHT / self.wavelength_m

    @property
    def wavevector(self) -> float:
        return TWO_PI / self.wavelength_m


@dataclass(frozen=True)
class MirrorParams:
    """Rotating mirror treated as a torsional oscillator."""

    mass_kg: float = 100e-12
    radius_m: float = 10e-6
    angular_freq_rad_s: float = TWO_PI * 35e6
    damping_rad_s: float = TWO_PI * 140.0

    def validate(self) -> None:
        if not self.mass_kg > 0:
            raise ConfigError("mass_kg must be > 0")
        if not self.radius_m > 0:
            raise ConfigError("radius_m must be > 0")
        if not self.angular_freq_rad_s > 0:
            raise ConfigError("angular_freq_rad_s must be > 0")
        if not self.damping_rad_s >= 0:
            raise ConfigError("damping_rad_s must be >= 0")

    @property
    def moment_of_inertia_kg_m2(self) -> float:
        return self.mass_kg * self.radius_m**2 / 2.0

    @property
    def quality_factor(self) -> float:
        if self.damping_rad_s == 0:
            return math.inf
        return self.angular_freq_rad_s / self.damping_rad_s


@dataclass(frozen=True)
class AtomParams:
    """Double-Lambda ensemble interacting with the cavity and three beams.

    ``rabi_peak_rad_s`` and ``oam`` are ordered (alpha, beta, zeta).  The
    ensemble is either lumped into one effective emitter whose coupling is
    ``atom_cavity_coupling_sum_rad_s`` or sampled on a radial line of atoms at
    azimuth ``azimuth_rad`` with per-sample couplings given in
    ``radial_samples`` as ``(rho_m, coupling_rad_s)`` pairs.
    """

    enabled: bool = True
    rabi_peak_rad_s: tuple[float, float, float] = (
        TWO_PI * 0.02e6,
        TWO_PI * 10e6,
        TWO_PI * 10e6,
    )
    oam: tuple[int, int, int] = (0, 0, 0)
    dephasing_rad_s: float = TWO_PI * 6e6
    atom_cavity_coupling_sum_rad_s: float = 0.01 * TWO_PI * 6e6
    cavity_atom_detuning_rad_s: float = 0.0
    weak_field_branch: str = WEAK_ALPHA
    beam_waist_m: float = 10e-6
    azimuth_rad: float = math.pi / 2
    atomic_mass_kg: float = 1.443e-25
    distribution: str = LUMPED
    radial_samples: tuple[tuple[float, float], ...] = ()
    centrosymmetric: bool = False

    def validate(self) -> None:
        if self.weak_field_branch not in BRANCHES:
            raise ConfigError(f"weak_field_branch must be one of {BRANCHES}")
        if not self.dephasing_rad_s > 0:
            raise ConfigError("dephasing_rad_s must be > 0")
        if len(self.rabi_peak_rad_s) != 3 or len(self.oam) != 3:
            raise ConfigError("rabi_peak_rad_s and oam need (alpha, beta, zeta)")
        if any(r < 0 for r in self.rabi_peak_rad_s):
            raise ConfigError("rabi_peak_rad_s must be >= 0")
        if not self.atom_cavity_coupling_sum_rad_s >= 0:
            raise ConfigError("atom_cavity_coupling_sum_rad_s must be >= 0")
        if not self.beam_waist_m > 0:
            raise ConfigError("beam_waist_m must be > 0")
        if not self.atomic_mass_kg > 0:
            raise ConfigError("atomic_mass_kg must be > 0")
        if self.distribution not in DISTRIBUTION_MODES:
            raise ConfigError(f"distribution must be one of {DISTRIBUTION_MODES}")
        if self.distribution == RADIAL_LINE:
            if len(self.radial_samples) < 1:
                raise ConfigError("radial_line distribution needs >= 1 sample")
            for rho, weight in self.radial_samples:
                if rho < 0 or weight < 0:
                    raise ConfigError("radial samples need rho >= 0 and weight >= 0")
        if self.weak_field_branch == WEAK_BETA:
            a, _, z = self.rabi_peak_rad_s
            if a != z:
                raise ConfigError(
                    "weak_beta branch requires equal alpha and zeta Rabi peaks"
                )

    @property
    def delta_ell(self) -> int:
        la, lb, lz = self.oam
        return la - lb + lz

    def weak_field_ratio(self) -> float:
        """Weak-field Rabi peak divided by the smallest strong-field peak."""
        a, b, z = self.rabi_peak_rad_s
        if self.weak_field_branch == WEAK_ALPHA:
            weak, strong = a, min(b, z)
        else:
            weak, strong = b, min(a, z)
        if strong == 0:
            return math.inf if weak > 0 else 0.0
        return weak / strong


@dataclass(frozen=True)
class DriveParams:
    """Drive and probe powers plus the reflectivity of the input element."""

    drive_power_W: float = 0.2
    probe_power_W: float = 1e-17
    mirror_reflectivity: float = 0.2

    def validate(self) -> None:
        if not self.drive_power_W >= 0:
            raise ConfigError("drive_power_W must be >= 0")
        if not self.probe_power_W > 0:
            raise ConfigError("probe_power_W must be > 0")
        if not 0.0 <= self.mirror_reflectivity <= 1.0:
            raise ConfigError("mirror_reflectivity out of [0,1]")


@dataclass(frozen=True)
class EnvironmentParams:
    """Temperature plus the optional Doppler and phase-mismatch corrections."""

    temperature_K: float = 0.0
    doppler: bool = False
    phase_mismatch_rad_m: float = 0.0
    propagation_z_m: float = 0.0

    def validate(self) -> None:
        if not self.temperature_K >= 0:
            raise ConfigError("temperature_K must be >= 0")
        if self.doppler and not self.temperature_K > 0:
            raise ConfigError("doppler correction requires temperature_K > 0")


@dataclass(frozen=True)
class DerivedCouplings:
    """Quantities that are pure functions of the source parameters."""

    g_phi: float
    G: float
    delta_ell: int
    ell_theta: int


@dataclass(frozen=True)
class SystemParams:
    cavity: CavityParams = field(default_factory=CavityParams)
    mirror: MirrorParams = field(default_factory=MirrorParams)
    atoms: AtomParams = field(default_factory=AtomParams)
    drive: DriveParams = field(default_factory=DriveParams)
    environment: EnvironmentParams = field(default_factory=EnvironmentParams)

    def __post_init__(self) -> None:
        self.cavity.validate()
        self.mirror.validate()
        self.atoms.validate()
        self.drive.validate()
        self.environment.validate()
        ratio = self.atoms.weak_field_ratio()
        if self.atoms.enabled and ratio > WEAK_FIELD_WARNING_RATIO:
            logger.warning(
                "weak field is not weak: ratio %.3g exceeds %.1f",
                ratio,
                WEAK_FIELD_WARNING_RATIO,
            )

    # -- derived amplitudes ---------------------------------------------------

    @property
    def drive_amplitude(self) -> float:
        """Drive amplitude sqrt(2 P kappa / (hbar omega)) in rad/s."""
        return _field_amplitude(self.drive.drive_power_W, self)

    @property
    def probe_amplitude(self) -> float:
        """Probe amplitude, evaluated at the drive optical frequency."""
        return _field_amplitude(self.drive.probe_power_W, self)

    @property
    def couplings(self) -> DerivedCouplings:
        return derived_couplings(self)

    def replace(self, **sections: Any) -> "SystemParams":
        """Return a copy with individual fields of sections replaced.

        ``p.replace(cavity={"cavity_oam": 80})`` changes one field and keeps
        every other value.
        """
        kwargs = {}
        for name, changes in sections.items():
            current = getattr(self, name)
            kwargs[name] = dataclasses.replace(current, **changes)
        return dataclasses.replace(self, **kwargs)


def _field_amplitude(power: float, p: SystemParams) -> float:
    omega = p.cavity.drive_angular_freq
    return math.sqrt(2.0 * power * p.cavity.cavity_decay_rad_s / (HBAR * omega))


def derived_couplings(p: SystemParams) -> DerivedCouplings:
    """Optomechanical coupling constants and OAM bookkeeping.

    ``g_phi = c l / L`` is the angular optomechanical coupling and
    ``G = g_phi * sqrt(hbar / (2 I omega_phi))`` its single-phonon version.
    """
    l = p.cavity.cavity_oam
    g_phi = C_LIGHT * l / p.cavity.cavity_length_m
    G = g_phi * zero_point_angle(p.mirror)
    dl = p.atoms.delta_ell
    return DerivedCouplings(g_phi=g_phi, G=G, delta_ell=dl, ell_theta=dl + 2 * l)


def zero_point_angle(mirror: MirrorParams) -> float:
    """Zero-point angular fluctuation sqrt(hbar / (2 I omega))."""
    return math.sqrt(
        HBAR / (2.0 * mirror.moment_of_inertia_kg_m2 * mirror.angular_freq_rad_s)
    )


def spring_shift_per_photon(p: SystemParams) -> float:
    """Static detuning shift per intracavity photon, hbar g^2 / (I omega^2)."""
    g_phi = derived_couplings(p).g_phi
    m = p.mirror
    return HBAR * g_phi**2 / (m.moment_of_inertia_kg_m2 * m.angular_freq_rad_s**2)


# ----------------------------------------------------------------------------
# Configuration documents
# ----------------------------------------------------------------------------

# Each entry maps a document key to (field name, kind).  Kinds:
#   "freq"  angular frequency; accepts key_Hz (x 2pi) or key_rad_s
#   "float", "int", "bool", "str", "opt_float"
_CAVITY_KEYS = {
    "length_m": ("cavity_length_m", "float"),
    "wavelength_m": ("wavelength_m", "float"),
    "decay": ("cavity_decay_rad_s", "freq"),
    "oam": ("cavity_oam", "int"),
    "detuning": ("cavity_detuning_rad_s", "freq"),
    "detuning_mode": ("detuning_mode", "str"),
    "mode_volume_m3": ("mode_volume_m3", "opt_float"),
}
_MIRROR_KEYS = {
    "mass_kg": ("mass_kg", "float"),
    "radius_m": ("radius_m", "float"),
    "frequency": ("angular_freq_rad_s", "freq"),
    "damping": ("damping_rad_s", "freq"),
}
_ATOM_KEYS = {
    "enabled": ("enabled", "bool"),
    "branch": ("weak_field_branch", "str"),
    "dephasing": ("dephasing_rad_s", "freq"),
    "cavity_atom_detuning": ("cavity_atom_detuning_rad_s", "freq"),
    "beam_waist_m": ("beam_waist_m", "float"),
    "azimuth_rad": ("azimuth_rad", "float"),
    "atomic_mass_kg": ("atomic_mass_kg", "float"),
    "centrosymmetric": ("centrosymmetric", "bool"),
}
_DRIVE_KEYS = {
    "drive_power_W": ("drive_power_W", "float"),
    "probe_power_W": ("probe_power_W", "float"),
    "mirror_reflectivity": ("mirror_reflectivity", "float"),
}
_ENV_KEYS = {
    "temperature_K": ("temperature_K", "float"),
    "doppler": ("doppler", "bool"),
    "phase_mismatch_rad_m": ("phase_mismatch_rad_m", "float"),
    "propagation_z_m": ("propagation_z_m", "float"),
}
_FIELDS = ("alpha", "beta", "zeta")


def _expect_mapping(obj: Any, where: str) -> Mapping[str, Any]:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: expected an object")
    return obj


def _convert(value: Any, kind: str, key: str) -> Any:
    try:
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "opt_float" and value is None:
            return None
        if isinstance(value, bool):
            raise TypeError
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"key '{key}': invalid value {value!r} ({kind})") from None


def _read_section(
    doc: Mapping[str, Any], table: Mapping[str, tuple[str, str]], where: str
) -> tuple[dict[str, Any], set[str]]:
    out: dict[str, Any] = {}
    used: set[str] = set()
    for key, (name, kind) in table.items():
        if kind == "freq":
            hz, rad = f"{key}_Hz", f"{key}_rad_s"
            if hz in doc and rad in doc:
                raise ConfigError(f"{where}: give only one of '{hz}' and '{rad}'")
            if hz in doc:
                out[name] = TWO_PI * _convert(doc[hz], "float", f"{where}.{hz}")
                used.add(hz)
            elif rad in doc:
                out[name] = _convert(doc[rad], "float", f"{where}.{rad}")
                used.add(rad)
        elif key in doc:
            out[name] = _convert(doc[key], kind, f"{where}.{key}")
            used.add(key)
    return out, used


def _reject_unknown(doc: Mapping[str, Any], used: set[str], where: str) -> None:
    unknown = sorted(set(doc) - used)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _read_triplet(doc: Mapping[str, Any], key: str, kind: str, where: str) -> list:
    sub = _expect_mapping(doc[key], f"{where}.{key}")
    _reject_unknown(sub, set(_FIELDS), f"{where}.{key}")
    return [sub.get(f) for f in _FIELDS], sub


def params_from_dict(doc: Mapping[str, Any]) -> SystemParams:
    """Build validated :class:`SystemParams` from a parsed document."""
    doc = _expect_mapping(doc, "config")
    sections = ("cavity", "mirror", "atoms", "drive", "environment")
    _reject_unknown(doc, set(sections), "config")

    def section(name: str) -> Mapping[str, Any]:
        return _expect_mapping(doc.get(name, {}), name)

    cav_doc = section("cavity")
    cav, used = _read_section(cav_doc, _CAVITY_KEYS, "cavity")
    _reject_unknown(cav_doc, used, "cavity")

    mir_doc = section("mirror")
    mir, used = _read_section(mir_doc, _MIRROR_KEYS, "mirror")
    _reject_unknown(mir_doc, used, "mirror")

    atom_doc = section("atoms")
    atoms, used = _read_section(atom_doc, _ATOM_KEYS, "atoms")
    defaults = AtomParams()
    for unit, scale in (("Hz", TWO_PI), ("rad_s", 1.0)):
        key = f"rabi_peak_{unit}"
        if key in atom_doc:
            if "rabi_peak_rad_s" in atoms:
                raise ConfigError("atoms: give only one of rabi_peak_Hz / rabi_peak_rad_s")
            vals, _ = _read_triplet(atom_doc, key, "float", "atoms")
            atoms["rabi_peak_rad_s"] = tuple(
                defaults.rabi_peak_rad_s[i]
                if v is None
                else scale * _convert(v, "float", f"atoms.{key}.{_FIELDS[i]}")
                for i, v in enumerate(vals)
            )
            used.add(key)
    if "oam" in atom_doc:
        vals, _ = _read_triplet(atom_doc, "oam", "int", "atoms")
        atoms["oam"] = tuple(
            0 if v is None else _convert(v, "int", f"atoms.oam.{_FIELDS[i]}")
            for i, v in enumerate(vals)
        )
        used.add("oam")
    coupling_keys = [
        k
        for k in ("coupling_sum_Hz", "coupling_sum_rad_s", "coupling_sum_per_dephasing")
        if k in atom_doc
    ]
    if len(coupling_keys) > 1:
        raise ConfigError(f"atoms: conflicting coupling keys {coupling_keys}")
    if coupling_keys:
        key = coupling_keys[0]
        value = _convert(atom_doc[key], "float", f"atoms.{key}")
        if key == "coupling_sum_Hz":
            value *= TWO_PI
        elif key == "coupling_sum_per_dephasing":
            value *= atoms.get("dephasing_rad_s", defaults.dephasing_rad_s)
        atoms["atom_cavity_coupling_sum_rad_s"] = value
        used.add(key)
    if "distribution" in atom_doc:
        dist = _expect_mapping(atom_doc["distribution"], "atoms.distribution")
        _reject_unknown(dist, {"mode", "samples_rad_s", "samples_Hz"}, "atoms.distribution")
        atoms["distribution"] = _convert(dist.get("mode", LUMPED), "str", "atoms.distribution.mode")
        for unit, scale in (("Hz", TWO_PI), ("rad_s", 1.0)):
            key = f"samples_{unit}"
            if key in dist:
                try:
                    atoms["radial_samples"] = tuple(
                        (float(rho), scale * float(w)) for rho, w in dist[key]
                    )
                except (TypeError, ValueError):
                    raise ConfigError(
                        f"atoms.distribution.{key}: expected [[rho_m, coupling], ...]"
                    ) from None
        used.add("distribution")
    _reject_unknown(atom_doc, used, "atoms")

    drv_doc = section("drive")
    drv, used = _read_section(drv_doc, _DRIVE_KEYS, "drive")
    _reject_unknown(drv_doc, used, "drive")

    env_doc = section("environment")
    env, used = _read_section(env_doc, _ENV_KEYS, "environment")
    _reject_unknown(env_doc, used, "environment")

    return SystemParams(
        cavity=CavityParams(**cav),
        mirror=MirrorParams(**mir),
        atoms=AtomParams(**atoms),
        drive=DriveParams(**drv),
        environment=EnvironmentParams(**env),
    )


def parse_config(text: str) -> SystemParams:
    """Parse a JSON configuration document into :class:`SystemParams`.

    Raises
    ------
    ConfigError
        With line and column for malformed JSON, or naming the offending key
        or violated invariant otherwise.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return params_from_dict(doc)


def params_to_dict(p: SystemParams) -> dict[str, Any]:
    """Serialize to a document that :func:`params_from_dict` reads back exactly.

    Frequencies are written with ``_rad_s`` keys so no 2*pi rounding occurs.
    """
    c, m, a, d, e = p.cavity, p.mirror, p.atoms, p.drive, p.environment
    return {
        "cavity": {
            "length_m": c.cavity_length_m,
            "wavelength_m": c.wavelength_m,
            "decay_rad_s": c.cavity_decay_rad_s,
            "oam": c.cavity_oam,
            "detuning_rad_s": c.cavity_detuning_rad_s,
            "detuning_mode": c.detuning_mode,
            "mode_volume_m3": c.mode_volume_m3,
        },
        "mirror": {
            "mass_kg": m.mass_kg,
            "radius_m": m.radius_m,
            "frequency_rad_s": m.angular_freq_rad_s,
            "damping_rad_s": m.damping_rad_s,
        },
        "atoms": {
            "enabled": a.enabled,
            "branch": a.weak_field_branch,
            "rabi_peak_rad_s": dict(zip(_FIELDS, a.rabi_peak_rad_s)),
            "oam": dict(zip(_FIELDS, a.oam)),
            "dephasing_rad_s": a.dephasing_rad_s,
            "coupling_sum_rad_s": a.atom_cavity_coupling_sum_rad_s,
            "cavity_atom_detuning_rad_s": a.cavity_atom_detuning_rad_s,
            "beam_waist_m": a.beam_waist_m,
            "azimuth_rad": a.azimuth_rad,
            "atomic_mass_kg": a.atomic_mass_kg,
            "centrosymmetric": a.centrosymmetric,
            "distribution": {
                "mode": a.distribution,
                "samples_rad_s": [list(s) for s in a.radial_samples],
            },
        },
        "drive": {
            "drive_power_W": d.drive_power_W,
            "probe_power_W": d.probe_power_W,
            "mirror_reflectivity": d.mirror_reflectivity,
        },
        "environment": {
            "temperature_K": e.temperature_K,
            "doppler": e.doppler,
            "phase_mismatch_rad_m": e.phase_mismatch_rad_m,
            "propagation_z_m": e.propagation_z_m,
        },
    }


def serialize(p: SystemParams) -> str:
    """Canonical JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(params_to_dict(p), sort_keys=True, indent=2)


def params_digest(p: SystemParams) -> str:
    """SHA-256 of the canonical serialization; stable across runs."""
    return hashlib.sha256(serialize(p).encode("utf-8")).hexdigest()


def merge_documents(base: Mapping[str, Any], patch: Mapping[str, Any]) -> dict[str, Any]:
    """Recursively overlay ``patch`` on ``base`` (used by recipes)."""
    out = dict(base)
    for key, value in patch.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = merge_documents(out[key], value)
        else:
            out[key] = value
    return out
