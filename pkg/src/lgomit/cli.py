"""Command-line interface.

Subcommands ``spectrum``, ``steady``, ``spot``, ``delay`` and ``noise`` each
write CSV/PGM/JSON files plus a ``manifest.json`` into ``--out-dir``.  The
``recipe`` subcommand runs a bundle of such jobs described by a JSON file.

Exit codes: 0 success, 1 numeric failure (instability, singularity, no
steady state), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .noise import noise_report
from .params import (
    TWO_PI,
    ConfigError,
    SystemParams,
    params_digest,
    params_from_dict,
    params_to_dict,
    merge_documents,
)
from .response import extremal_delay, output_spectrum, probe_grid
from .steadystate import (
    STABLE,
    NoStableBranchError,
    operating_point,
    params_at,
    select_branch,
    solve_photon_number,
    sweep_steady,
)
from .vortexfield import SCENARIOS, decompose_output, intensity_pgm, phase_pgm, render_spot

CONFIG_ENV = "LGOMIT_CONFIG"
FLOAT_FMT = "%.12e"

logger = logging.getLogger("lgomit")


class UsageError(Exception):
    """Bad command-line usage (exit code 2)."""


# ----------------------------------------------------------------------------
# Output helpers
# ----------------------------------------------------------------------------


def fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return FLOAT_FMT % float(x)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path: Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def timestamp() -> str:
    """UTC time; honours SOURCE_DATE_EPOCH for reproducible manifests."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        when = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        when = _dt.datetime.now(tz=_dt.timezone.utc)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def write_manifest(
    out: Path,
    args: argparse.Namespace,
    p: SystemParams,
    outputs: Sequence[str],
    extra: dict | None = None,
) -> None:
    manifest = {
        "command": args.command,
        "argv": list(getattr(args, "argv", [])),
        "config_path": args.resolved_config,
        "params_digest": params_digest(p),
        "resolved_params": params_to_dict(p),
        "outputs": sorted(outputs),
        "timestamp": timestamp(),
        "tool_version": __version__,
    }
    if extra:
        manifest.update(extra)
    write_json(out / "manifest.json", manifest)


# ----------------------------------------------------------------------------
# Config loading
# ----------------------------------------------------------------------------


def resolve_config_path(flag: str | None) -> str | None:
    if flag:
        return flag
    return os.environ.get(CONFIG_ENV) or None


def load_document(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file '{path}': {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None


def load_params(args: argparse.Namespace) -> SystemParams:
    path = resolve_config_path(args.config)
    args.resolved_config = path
    doc = load_document(path)
    p = params_from_dict(doc)
    return apply_overrides(p, args)


def apply_overrides(p: SystemParams, args: argparse.Namespace) -> SystemParams:
    if getattr(args, "atoms", None) is not None:
        p = p.replace(atoms={"enabled": args.atoms == "on"})
    if getattr(args, "l", None) is not None:
        p = p.replace(cavity={"cavity_oam": args.l})
    if getattr(args, "delta_ell", None) is not None:
        _, lb, lz = p.atoms.oam
        p = p.replace(atoms={"oam": (args.delta_ell + lb - lz, lb, lz)})
    if getattr(args, "power_W", None) is not None:
        p = p.replace(drive={"drive_power_W": args.power_W})
    return p


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------


def spectrum_grid(p: SystemParams, args: argparse.Namespace) -> np.ndarray:
    w = p.mirror.angular_freq_rad_s
    center = w if args.center == "mechanical" else 0.0
    half = (
        args.half_width_rel * w
        if args.half_width_Hz is None
        else TWO_PI * args.half_width_Hz
    )
    core = None if args.core_Hz is None else TWO_PI * args.core_Hz
    return probe_grid(center, half, args.points, core)


def compute_spectrum(args: argparse.Namespace):
    """Resolve parameters and branch from ``args`` and compute the spectrum."""
    p = load_params(args)
    op = operating_point(p)
    states = solve_photon_number(p, op)
    ss = select_branch(p, states, args.branch, op)
    return p, ss, output_spectrum(p, ss, spectrum_grid(p, args), op)


def cmd_spectrum(args: argparse.Namespace) -> dict:
    p, ss, s = compute_spectrum(args)
    out = Path(args.out_dir)
    rows = zip(
        s.delta_p / TWO_PI,
        s.u_p,
        s.v_p,
        s.t_p.real,
        s.t_p.imag,
        s.theta,
        s.tau_a,
        s.tau_b,
    )
    out.mkdir(parents=True, exist_ok=True)
    header = [
        "delta_p_Hz",
        "u_p",
        "v_p",
        "re_tp",
        "im_tp",
        "theta_rad",
        "tau_g_s_methodA",
        "tau_g_s_methodB",
    ]
    write_csv(out / "spectrum.csv", header, rows)
    w = p.mirror.angular_freq_rad_s
    tau = np.where(s.phase_defined, s.tau_a, np.nan)
    imax, imin = int(np.nanargmax(tau)), int(np.nanargmin(tau))
    summary = {
        "branch_index": ss.branch_index,
        "n_c": ss.n_c,
        "drive_detuning_Hz": ss.delta_c / TWO_PI,
        "effective_detuning_Hz": ss.delta_tilde / TWO_PI,
        "kappa_prime_Hz": ss.kappa_prime / TWO_PI,
        "delta_ell": p.couplings.delta_ell,
        "tau_max_s": float(tau[imax]),
        "tau_max_at_rel_detuning": float((s.delta_p[imax] - w) / w),
        "tau_min_s": float(tau[imin]),
        "tau_min_at_rel_detuning": float((s.delta_p[imin] - w) / w),
    }
    write_manifest(out, args, p, ["spectrum.csv"], {"summary": summary})
    return summary


def _steady_grid(args: argparse.Namespace) -> list[float]:
    if args.values:
        return [float(v) for v in args.values]
    if args.start is None or args.stop is None:
        raise UsageError("steady/delay need --values or --start/--stop")
    return list(np.linspace(args.start, args.stop, args.num))


_STEADY_AXES = {
    "detuning_over_kappa": "detuning",
    "detuning_Hz": "detuning",
    "power_W": "power",
    "oam": "oam",
}


def cmd_steady(args: argparse.Namespace) -> dict:
    p = load_params(args)
    out = Path(args.out_dir)
    values = _steady_grid(args)
    axis = _STEADY_AXES[args.axis]
    if args.axis == "detuning_over_kappa":
        scale = p.cavity.cavity_decay_rad_s
    elif args.axis == "detuning_Hz":
        scale = TWO_PI
    else:
        scale = 1.0
    internal = [v * scale for v in values]
    if axis == "oam":
        internal = [int(round(v)) for v in values]
    table = sweep_steady(p, axis, internal, threads=args.threads)
    rows = []
    three = 0
    for shown, value, row in zip(values, internal, table):
        g_phi = params_at(p, axis, value).couplings.g_phi
        states = list(row.states)
        if args.branch is not None:
            try:
                states = [select_branch(p, states, args.branch)]
            except NoStableBranchError as exc:
                raise NoStableBranchError(f"{exc} at {args.axis}={shown}") from None
        elif args.select == "lowest-stable":
            stable = [s for s in states if s.stable == STABLE]
            if not stable:
                raise NoStableBranchError(f"no stable branch at {args.axis}={shown}")
            states = stable[:1]
        three += row.n_roots == 3
        for s in states:
            rep = s.report
            rows.append(
                [
                    shown,
                    row.n_roots,
                    s.branch_index,
                    s.n_c,
                    g_phi**2 * s.n_c,
                    s.delta_tilde / TWO_PI,
                    s.stable,
                    rep.s1,
                    rep.s2,
                    rep.s3,
                    rep.rh_stable,
                    rep.eig_stable,
                    max(rep.eig_real_parts),
                ]
            )
    out.mkdir(parents=True, exist_ok=True)
    header = [
        args.axis,
        "n_roots",
        "branch",
        "n_c",
        "g_phi2_n_c",
        "effective_detuning_Hz",
        "stability",
        "s1",
        "s2",
        "s3",
        "rh_stable",
        "eig_stable",
        "max_eig_real",
    ]
    write_csv(out / "branches.csv", header, rows)
    summary = {"points": len(values), "three_root_points": three}
    write_manifest(out, args, p, ["branches.csv"], {"summary": summary})
    return summary


def cmd_spot(args: argparse.Namespace) -> dict:
    if args.N < 64:
        raise UsageError(f"--N must be at least 64, got {args.N}")
    p = load_params(args)
    out = Path(args.out_dir)
    op = operating_point(p)
    states = solve_photon_number(p, op)
    ss = select_branch(p, states, args.branch, op)
    comps = decompose_output(p, ss, args.scenario, op)
    img = render_spot(comps, p.atoms.beam_waist_m, args.N, args.extent, args.rotation)
    out.mkdir(parents=True, exist_ok=True)
    (out / "intensity.pgm").write_bytes(intensity_pgm(img))
    (out / "phase.pgm").write_bytes(phase_pgm(img))
    xx, yy = np.meshgrid(img.x_m, img.y_m, indexing="xy")
    write_csv(
        out / "field.csv",
        ["x_m", "y_m", "re", "im"],
        zip(xx.ravel(), yy.ravel(), img.field.real.ravel(), img.field.imag.ravel()),
    )
    stats = {
        "scenario": args.scenario,
        "N": args.N,
        "extent_w": args.extent,
        "petal_count": img.petal_count,
        "ring_period_count": img.ring_period_count,
        "ring_radius_m": img.ring_radius_m,
        "max_intensity": float(np.max(img.intensity)),
        "components": [
            {"label": c.label, "oam": c.oam, "re": c.amplitude.real, "im": c.amplitude.imag}
            for c in comps
        ],
    }
    write_json(out / "stats.json", stats)
    write_manifest(out, args, p, ["intensity.pgm", "phase.pgm", "field.csv", "stats.json"])
    return stats


def cmd_delay(args: argparse.Namespace) -> dict:
    p = load_params(args)
    out = Path(args.out_dir)
    values = _steady_grid(args)
    axis = "power" if args.axis == "power_W" else "oam"
    if axis == "oam":
        values = [int(round(v)) for v in values]
    w = p.mirror.angular_freq_rad_s
    offsets = spectrum_grid(p, args) - (w if args.center == "mechanical" else 0.0)
    table = extremal_delay(p, offsets, axis, values, threads=args.threads)
    rows = [
        [
            r.value,
            r.tau_max,
            r.tau_min,
            r.argmax_delta_p / TWO_PI,
            r.argmin_delta_p / TWO_PI,
        ]
        for r in table
    ]
    out.mkdir(parents=True, exist_ok=True)
    header = [args.axis, "tau_max_s", "tau_min_s", "argmax_delta_p_Hz", "argmin_delta_p_Hz"]
    write_csv(out / "delay.csv", header, rows)
    write_manifest(out, args, p, ["delay.csv"])
    return {"points": len(rows)}


def cmd_noise(args: argparse.Namespace) -> dict:
    p = load_params(args)
    out = Path(args.out_dir)
    temps = args.temperatures or [p.environment.temperature_K]
    report = noise_report(p, temps)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "noise.json", report)
    write_manifest(out, args, p, ["noise.json"])
    return report


# ----------------------------------------------------------------------------
# Recipes
# ----------------------------------------------------------------------------


def recipe_path(name: str) -> Path:
    """Resolve a recipe file path or the name of a bundled recipe."""
    cand = Path(name)
    if cand.exists():
        return cand
    bundled = resources.files("lgomit") / "recipes" / f"{name}.json"
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"recipe '{name}' not found")


def bundled_recipes() -> list[str]:
    folder = resources.files("lgomit") / "recipes"
    return sorted(
        entry.name[:-5]
        for entry in folder.iterdir()
        if entry.name.endswith(".json") and not entry.name.startswith("_")
    )


def prepare_recipe(name: str, out_dir: str | Path, threads: int = 1) -> list[tuple[str, list[str]]]:
    """Write each job's merged config and return ``(job name, argv)`` pairs."""
    path = recipe_path(name)
    recipe = load_document(str(path))
    if not isinstance(recipe, dict) or "jobs" not in recipe:
        raise ConfigError(f"{path}: recipe needs a 'jobs' list")
    unknown = set(recipe) - {"description", "config", "jobs", "notes"}
    if unknown:
        raise ConfigError(f"{path}: unknown recipe key(s) {sorted(unknown)}")
    base = recipe.get("config", {})
    jobs = []
    for job in recipe["jobs"]:
        job_dir = Path(out_dir) / job["name"]
        doc = merge_documents(base, job.get("config", {}))
        params_from_dict(doc)  # validate before writing anything
        job_dir.mkdir(parents=True, exist_ok=True)
        cfg_path = job_dir / "config.json"
        write_json(cfg_path, doc)
        argv = [
            job["command"],
            "--config",
            str(cfg_path),
            "--out-dir",
            str(job_dir),
            "--threads",
            str(threads),
            *[str(a) for a in job.get("args", [])],
        ]
        jobs.append((job["name"], argv))
    return jobs


def cmd_recipe(args: argparse.Namespace) -> dict:
    results = {}
    for name, argv in prepare_recipe(args.recipe, args.out_dir, args.threads):
        sub = build_parser().parse_args(argv)
        sub.argv = argv
        results[name] = sub.func(sub)
    return results


# ----------------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------------


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help=f"JSON config (default: ${CONFIG_ENV} or built-in defaults)")
    parser.add_argument("--out-dir", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    parser.add_argument("--seed", type=int, default=0, help="reserved; all computation is deterministic")


def _overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--atoms", choices=("on", "off"), help="switch the atomic ensemble")
    parser.add_argument("--l", type=int, help="cavity OAM charge")
    parser.add_argument("--delta-ell", type=int, help="loop OAM (adjusts the alpha charge)")
    parser.add_argument("--power-W", type=float, help="drive power")
    parser.add_argument("--branch", type=int, help="steady-state branch index")


def _grid(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--center", choices=("mechanical", "zero"), default="mechanical")
    parser.add_argument("--half-width-rel", type=float, default=0.006, help="half width / omega_phi")
    parser.add_argument("--half-width-Hz", type=float, help="half width in Hz (overrides rel)")
    parser.add_argument("--points", type=int, default=4001)
    parser.add_argument("--core-Hz", type=float, help="sinh-graded grid core width in Hz")


def _sweep(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--values", nargs="+", type=float)
    parser.add_argument("--start", type=float)
    parser.add_argument("--stop", type=float)
    parser.add_argument("--num", type=int, default=51)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgomit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="probe spectrum and group delay")
    _common(sp)
    _overrides(sp)
    _grid(sp)
    sp.set_defaults(func=cmd_spectrum)

    st = sub.add_parser("steady", help="steady-state branches along a sweep")
    _common(st)
    _overrides(st)
    st.add_argument("--axis", choices=tuple(_STEADY_AXES), required=True)
    _sweep(st)
    st.add_argument("--select", choices=("all", "lowest-stable"), default="all")
    st.set_defaults(func=cmd_steady)

    so = sub.add_parser("spot", help="output spot pattern")
    _common(so)
    _overrides(so)
    so.add_argument("--scenario", choices=SCENARIOS, required=True)
    so.add_argument("--N", type=int, default=512)
    so.add_argument("--extent", type=float, default=4.0, help="half width in beam waists")
    so.add_argument("--rotation", type=float, default=0.0)
    so.set_defaults(func=cmd_spot)

    de = sub.add_parser("delay", help="extremal group delay along a sweep")
    _common(de)
    _overrides(de)
    _grid(de)
    de.add_argument("--axis", choices=("power_W", "oam"), required=True)
    _sweep(de)
    de.set_defaults(func=cmd_delay)

    no = sub.add_parser("noise", help="noise figures report")
    _common(no)
    _overrides(no)
    no.add_argument("--temperatures", nargs="+", type=float)
    no.set_defaults(func=cmd_noise)

    rc = sub.add_parser("recipe", help="run a bundled or file recipe")
    rc.add_argument("recipe", help="recipe name or path")
    rc.add_argument("--out-dir", default="out")
    rc.add_argument("--threads", type=int, default=1)
    rc.add_argument("--seed", type=int, default=0)
    rc.set_defaults(func=cmd_recipe)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    try:
        args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
