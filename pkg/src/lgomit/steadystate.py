"""Steady states, the photon-number cubic and linear stability.

Radiation torque twists the mirror to ``phi_s = hbar g n / (I w^2)`` which
shifts the cavity detuning by ``g phi_s = beta n`` with
``beta = hbar g^2 / (I w^2)``.  Requiring the cavity amplitude
``a_s = (E_d + i F) / (kappa' + i Dt)`` to be self-consistent gives a cubic in
the photon number ``n``:

    beta^2 n^3 - 2 beta D0 n^2 + (kappa'^2 + D0^2) n - |E_d + i F|^2 = 0

where ``kappa' = kappa - Im(sum g A)``, ``D0 = Delta_c - Re(sum g A)`` and
``F`` is the loop-phased FWM source.  The effective detuning is
``Dt = D0 - beta n``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .params import HBAR, RED_SIDEBAND, RESONANT, SystemParams, spring_shift_per_photon
from .susceptibility import Aggregates, ensemble_aggregates

logger = logging.getLogger(__name__)

#: Roots closer than this (relative) are merged and labelled marginal.
TANGENCY_TOL = 1e-7
STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"


class NoSteadyStateError(ArithmeticError):
    """The cubic has no non-negative real root."""


class NoStableBranchError(ArithmeticError):
    """No branch satisfies the stability requirement."""


# ----------------------------------------------------------------------------
# Cubic solver
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CubicRoot:
    value: float
    marginal: bool = False


def _polish(coeffs: Sequence[float], x: float, iterations: int = 8) -> float:
    """Newton refinement on ``c3 x^3 + c2 x^2 + c1 x + c0``."""
    c3, c2, c1, c0 = coeffs
    for _ in range(iterations):
        f = ((c3 * x + c2) * x + c1) * x + c0
        df = (3 * c3 * x + 2 * c2) * x + c1
        if df == 0 or not np.isfinite(df):
            break
        step = f / df
        x_new = x - step
        if not np.isfinite(x_new):
            break
        if abs(x_new - x) <= 1e-15 * max(abs(x_new), 1e-300):
            x = x_new
            break
        # Accept only steps that do not increase the residual.
        f_new = ((c3 * x_new + c2) * x_new + c1) * x_new + c0
        if abs(f_new) > abs(f):
            break
        x = x_new
    return x


def _real_roots_monic(a: float, b: float, c: float) -> list[float]:
    """Real roots of ``t^3 + a t^2 + b t + c`` via Cardano / Viete."""
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    shift = -a / 3.0
    scale = max(abs(p), abs(q), 1e-300)
    if disc > 1e-14 * scale**2 or p >= 0:
        sq = math.sqrt(max(disc, 0.0))
        u = -q / 2.0 - math.copysign(sq, q)
        u = math.copysign(abs(u) ** (1.0 / 3.0), u)
        y = u - p / (3.0 * u) if u != 0 else 0.0
        return [y + shift]
    r = math.sqrt(-p / 3.0)
    arg = (-q / 2.0) / r**3
    arg = min(1.0, max(-1.0, arg))
    phi = math.acos(arg)
    return [
        2.0 * r * math.cos((phi - 2.0 * math.pi * k) / 3.0) + shift
        for k in range(3)
    ]


def solve_cubic(coeffs: Sequence[float]) -> list[CubicRoot]:
    """All real roots of ``c3 n^3 + c2 n^2 + c1 n + c0``, sorted ascending.

    Closed form (Cardano, or Viete's trigonometric form for three real roots)
    on a rescaled monic polynomial followed by Newton polishing on the
    original coefficients.  Roots closer than ``TANGENCY_TOL`` (relative) are
    merged into one root flagged ``marginal``.
    """
    c3, c2, c1, c0 = (float(x) for x in coeffs)
    if c3 == 0.0:
        if c2 == 0.0:
            if c1 == 0.0:
                raise NoSteadyStateError("degenerate polynomial")
            return [CubicRoot(-c0 / c1)]
        disc = c1 * c1 - 4 * c2 * c0
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        qq = -0.5 * (c1 + math.copysign(sq, c1))
        roots = [qq / c2] + ([c0 / qq] if qq != 0 else [0.0])
        raw = sorted(roots)
    else:
        a, b, c = c2 / c3, c1 / c3, c0 / c3
        s = max(abs(a), math.sqrt(abs(b)), abs(c) ** (1.0 / 3.0), 1e-300)
        raw = sorted(s * t for t in _real_roots_monic(a / s, b / s**2, c / s**3))
    polished = sorted(_polish((c3, c2, c1, c0), x) for x in raw)
    merged: list[CubicRoot] = []
    for x in polished:
        if merged:
            prev = merged[-1].value
            if abs(x - prev) <= TANGENCY_TOL * max(abs(x), abs(prev), 1e-300):
                merged[-1] = CubicRoot(0.5 * (x + prev), True)
                continue
        merged.append(CubicRoot(x))
    return merged


def cubic_residual(coeffs: Sequence[float], x: float) -> tuple[float, float]:
    """Return ``(|p(x)|, max_i |c_i x^i|)`` for a residual check."""
    c3, c2, c1, c0 = coeffs
    terms = (c3 * x**3, c2 * x**2, c1 * x, c0)
    return abs(sum(terms)), max(abs(t) for t in terms)


# ----------------------------------------------------------------------------
# Steady states
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatingPoint:
    """Branch-independent quantities of one configuration."""

    agg: Aggregates
    kappa_prime: float
    delta_c: float
    delta_0: float
    beta: float
    source: complex

    @property
    def source_sq(self) -> float:
        return abs(self.source) ** 2


def locked_detuning(p: SystemParams) -> float | None:
    """Effective detuning targeted by a locked mode, or None when fixed."""
    if p.cavity.detuning_mode == RED_SIDEBAND:
        return p.mirror.angular_freq_rad_s
    if p.cavity.detuning_mode == RESONANT:
        return 0.0
    return None


def operating_point(p: SystemParams, agg: Aggregates | None = None) -> OperatingPoint:
    """Resolve aggregates and the drive detuning for a configuration.

    In the locked modes the drive detuning is chosen so that the effective
    detuning equals the target (mechanical frequency or zero) on the
    resulting branch.
    """
    if agg is None:
        agg = ensemble_aggregates(p)
    kp = p.cavity.cavity_decay_rad_s - agg.sum_gA.imag
    beta = spring_shift_per_photon(p)
    source = p.drive_amplitude + 1j * agg.fwm_source
    target = locked_detuning(p)
    if target is not None:
        n_lock = abs(source) ** 2 / (kp**2 + target**2)
        delta_c = target + agg.sum_gA.real + beta * n_lock
    else:
        delta_c = p.cavity.cavity_detuning_rad_s
    return OperatingPoint(
        agg=agg,
        kappa_prime=kp,
        delta_c=delta_c,
        delta_0=delta_c - agg.sum_gA.real,
        beta=beta,
        source=source,
    )


def photon_cubic_coefficients(
    p: SystemParams, op: OperatingPoint | None = None
) -> tuple[float, float, float, float]:
    """Coefficients ``(c3, c2, c1, c0)`` of the photon-number cubic.

    ``c3 = beta^2``, ``c2 = -2 beta D0``, ``c1 = kappa'^2 + D0^2`` and
    ``c0 = -(|sum gB|^2 - 2 E_d Im(sum gB) + E_d^2)`` with the loop-phased
    source.
    """
    if op is None:
        op = operating_point(p)
    b = op.agg.fwm_source
    ed = p.drive_amplitude
    rhs = abs(b) ** 2 - 2.0 * ed * b.imag + ed**2
    return (
        op.beta**2,
        -2.0 * op.beta * op.delta_0,
        op.kappa_prime**2 + op.delta_0**2,
        -rhs,
    )


@dataclass(frozen=True)
class StabilityReport:
    s1: float
    s2: float
    s3: float
    rh_stable: bool
    eig_real_parts: tuple[float, ...]
    eig_stable: bool
    agree: bool
    textbook_stable: bool
    matrix: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class SteadyState:
    n_c: float
    a_s: complex
    phi_s: float
    delta_bar: float
    delta_tilde: float
    kappa_prime: float
    delta_c: float
    branch_index: int
    marginal: bool
    stable: str = MARGINAL
    report: StabilityReport | None = field(default=None, compare=False, repr=False)


def _make_state(
    p: SystemParams, op: OperatingPoint, n: float, index: int, marginal: bool
) -> SteadyState:
    m = p.mirror
    g_phi = p.couplings.g_phi
    phi_s = HBAR * g_phi * n / (m.moment_of_inertia_kg_m2 * m.angular_freq_rad_s**2)
    delta_bar = op.delta_c - g_phi * phi_s
    delta_tilde = delta_bar - op.agg.sum_gA.real
    a_s = op.source / (op.kappa_prime + 1j * delta_tilde)
    ss = SteadyState(
        n_c=n,
        a_s=complex(a_s),
        phi_s=phi_s,
        delta_bar=delta_bar,
        delta_tilde=delta_tilde,
        kappa_prime=op.kappa_prime,
        delta_c=op.delta_c,
        branch_index=index,
        marginal=marginal,
    )
    rep = routh_hurwitz(p, ss)
    if marginal:
        verdict = MARGINAL
    elif rep.eig_stable:
        verdict = STABLE
    else:
        verdict = UNSTABLE
    return SteadyState(**{**ss.__dict__, "stable": verdict, "report": rep})


def solve_photon_number(
    p: SystemParams, op: OperatingPoint | None = None
) -> list[SteadyState]:
    """All physical steady states (1 to 3), ascending in photon number."""
    if op is None:
        op = operating_point(p)
    coeffs = photon_cubic_coefficients(p, op)
    roots = [r for r in solve_cubic(coeffs) if r.value >= -1e-12 * max(1.0, abs(r.value))]
    if not roots:
        raise NoSteadyStateError("no non-negative real photon number")
    return [
        _make_state(p, op, max(r.value, 0.0), i, r.marginal)
        for i, r in enumerate(roots)
    ]


def select_branch(
    p: SystemParams,
    states: Sequence[SteadyState],
    index: int | None = None,
    op: OperatingPoint | None = None,
) -> SteadyState:
    """Pick the branch used by spectra.

    An explicit ``index`` wins but must be stable.  In a locked mode the branch that realizes
    the target detuning is used; otherwise the lowest stable branch.
    """
    if index is not None:
        if not 0 <= index < len(states):
            raise NoStableBranchError(f"branch index {index} out of range")
        if states[index].stable != STABLE:
            raise NoStableBranchError(
                f"no stable branch: branch {index} is {states[index].stable}"
            )
        return states[index]
    target = locked_detuning(p)
    if target is not None:
        best = min(states, key=lambda s: abs(s.delta_tilde - target))
        if best.stable != STABLE:
            raise NoStableBranchError("the locked branch is not stable")
        return best
    for s in states:
        if s.stable == STABLE:
            return s
    raise NoStableBranchError("no stable branch")


def steady_state(p: SystemParams, index: int | None = None) -> SteadyState:
    """Solve and select the default branch in one call."""
    op = operating_point(p)
    return select_branch(p, solve_photon_number(p, op), index, op)


# ----------------------------------------------------------------------------
# Linear stability
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class EvolutionMatrix:
    """Drift matrix in the basis (dphi, dL_z, dU, dV)."""

    matrix: np.ndarray
    kappa_prime: float
    delta_tilde: float


def evolution_matrix(p: SystemParams, ss: SteadyState) -> EvolutionMatrix:
    m = p.mirror
    inertia = m.moment_of_inertia_kg_m2
    w, gam = m.angular_freq_rad_s, m.damping_rad_s
    g = p.couplings.g_phi
    ar, ai = ss.a_s.real, ss.a_s.imag
    kp, dt = ss.kappa_prime, ss.delta_tilde
    r2 = math.sqrt(2.0)
    mat = np.array(
        [
            [0.0, 1.0 / inertia, 0.0, 0.0],
            [-inertia * w**2, -gam, r2 * HBAR * g * ar, r2 * HBAR * g * ai],
            [-r2 * g * ai, 0.0, -kp, dt],
            [r2 * g * ar, 0.0, -dt, -kp],
        ]
    )
    return EvolutionMatrix(mat, kp, dt)


def scaled_matrix(p: SystemParams, em: EvolutionMatrix) -> np.ndarray:
    """Diagonal similarity transform to zero-point units (same spectrum)."""
    m = p.mirror
    inertia, w = m.moment_of_inertia_kg_m2, m.angular_freq_rad_s
    x0 = math.sqrt(HBAR / (2 * inertia * w))
    p0 = math.sqrt(HBAR * inertia * w / 2)
    s = np.array([x0, p0, 1.0, 1.0])
    return em.matrix * s[None, :] / s[:, None]


def stability_conditions(
    p: SystemParams, ss: SteadyState
) -> tuple[float, float, float]:
    """The three inequality expressions ``s1, s2, s3`` (all must be > 0)."""
    m = p.mirror
    inertia, w, gam = m.moment_of_inertia_kg_m2, m.angular_freq_rad_s, m.damping_rad_s
    g = p.couplings.g_phi
    kp, dt = ss.kappa_prime, ss.delta_tilde
    ar, ai = ss.a_s.real, ss.a_s.imag
    s1 = (2 * kp + gam) * (dt**2 + kp**2 + 2 * gam * kp + w**2) - (
        gam * dt**2 + gam * kp**2 + 2 * kp * w**2
    )
    s2 = -2 * HBAR * g**2 * dt * (ar**2 + ai**2) + inertia * w**2 * (kp**2 + dt**2)
    s3 = (
        gam * inertia * dt**2 + gam**2 * inertia * kp**2 + 2 * inertia * kp * w**2
    ) * s1 - (2 * kp + gam) ** 2 * s2
    return s1, s2, s3


def hurwitz_stable(poly: Sequence[float]) -> bool:
    """Textbook Hurwitz test for a monic quartic ``[1, a1, a2, a3, a4]``."""
    _, a1, a2, a3, a4 = poly
    return bool(
        a1 > 0
        and a4 > 0
        and a1 * a2 - a3 > 0
        and a3 * (a1 * a2 - a3) - a1**2 * a4 > 0
    )


def routh_hurwitz(p: SystemParams, ss: SteadyState) -> StabilityReport:
    """Inequality verdict alongside the eigenvalue ground truth."""
    em = evolution_matrix(p, ss)
    scaled = scaled_matrix(p, em)
    eig = np.linalg.eigvals(scaled)
    re = tuple(float(x) for x in np.sort(eig.real))
    eig_stable = max(re) < 0
    s1, s2, s3 = stability_conditions(p, ss)
    rh = bool(s1 > 0 and s2 > 0 and s3 > 0)
    poly = np.real(np.poly(scaled))
    if rh != eig_stable:
        logger.info(
            "stability verdicts disagree (s1=%.6e s2=%.6e s3=%.6e, eig re=%s); matrix:\n%s",
            s1,
            s2,
            s3,
            re,
            np.array2string(em.matrix, precision=12, max_line_width=200),
        )
    return StabilityReport(
        s1=s1,
        s2=s2,
        s3=s3,
        rh_stable=rh,
        eig_real_parts=re,
        eig_stable=bool(eig_stable),
        agree=rh == bool(eig_stable),
        textbook_stable=hurwitz_stable(poly),
        matrix=em.matrix,
    )


# ----------------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------------

AXES = ("detuning", "power", "oam")


@dataclass(frozen=True)
class SweepRow:
    value: float
    states: tuple[SteadyState, ...]

    @property
    def n_roots(self) -> int:
        return len(self.states)


def params_at(p: SystemParams, axis: str, value: float) -> SystemParams:
    """Configuration with one sweep axis set (detuning sweeps fix the detuning)."""
    if axis == "detuning":
        return p.replace(
            cavity={"cavity_detuning_rad_s": float(value), "detuning_mode": "fixed"}
        )
    if axis == "power":
        return p.replace(drive={"drive_power_W": float(value)})
    if axis == "oam":
        if float(value) != int(value):
            raise ValueError("oam sweep needs integer values")
        return p.replace(cavity={"cavity_oam": int(value)})
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


def _sweep_point(args) -> SweepRow:
    p, axis, value = args
    q = params_at(p, axis, value)
    return SweepRow(float(value), tuple(solve_photon_number(q)))


def sweep_steady(
    p: SystemParams, axis: str, grid: Sequence[float], threads: int = 1
) -> list[SweepRow]:
    """Steady-state branches along a monotone grid; output order follows ``grid``."""
    grid = list(grid)
    diffs = np.diff(np.asarray(grid, dtype=float))
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("sweep grid must be strictly monotone")
    jobs = [(p, axis, v) for v in grid]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


def multistable_points(rows: Sequence[SweepRow]) -> list[float]:
    """Axis values at which three branches coexist."""
    return [r.value for r in rows if r.n_roots == 3]
