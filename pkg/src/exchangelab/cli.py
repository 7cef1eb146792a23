"""Scenario runner: ``exchangelab <command> [--config FILE] [--out DIR] [--seed N] [--threads N]``.

A config file is a JSON object ``{"command": ..., "seed": ..., "out": ...,
"params": {...}}``; every key is optional and unknown keys are rejected.
A ``manifest.json`` written by a previous run is also accepted as a config
and reproduces that run exactly.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, fock, ramsey, zeeman
from .errors import ConfigInvalid, ExchangeLabError, NumericalFailure
from .rotor import adiabatic, dynamics, hamiltonian, phases, trap

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
MANIFEST = "manifest.json"

_STATS = {"type": "string", "enum": ["boson", "fermion"]}
_TRAP = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "drive_hz": {"type": "number", "exclusiveMinimum": 0},
        "q": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "axial_hz": {"type": "number", "exclusiveMinimum": 0},
    },
}
_TRAP_DEFAULT = {"drive_hz": 20e6, "q": 0.2, "axial_hz": 1.4e6}
_PLAN = {
    "n": {"type": "integer"},
    "variant": {"type": "string", "enum": ["one_dim", "two_dim"]},
    "quant_axis": {"type": "string", "enum": ["diagonal", "antidiagonal"]},
    "statistics": _STATS,
}
_PLAN_DEFAULT = {"n": 10, "variant": "one_dim", "quant_axis": "diagonal", "statistics": "boson"}
_RAMP = {
    "a_start": {"type": "number"},
    "a_end": {"type": "number"},
    "duration": {"type": "number", "exclusiveMinimum": 0},
    "N": {"type": "integer", "minimum": 8},
    "gamma_rtol": {"type": "number", "exclusiveMinimum": 0},
    "trap": _TRAP,
}
_RAMP_DEFAULT = {
    "a_start": -4e-4,
    "a_end": 4e-4,
    "duration": 2e-3,
    "N": hamiltonian.DEFAULT_N,
    "gamma_rtol": adiabatic.GAMMA_RTOL,
    "trap": _TRAP_DEFAULT,
}

PARAMS = {
    "fringe": (
        {
            **_PLAN,
            "phases": {
                "type": "object",
                "additionalProperties": False,
                "properties": {k: {"type": "number"} for k in ("dphi1", "dphi2", "dphi3")},
            },
            "points": {"type": "integer", "minimum": 8},
        },
        {**_PLAN_DEFAULT, "phases": {"dphi1": 0.0, "dphi2": 0.0, "dphi3": 0.0}, "points": ramsey.FIT_POINTS},
    ),
    "dephase": (
        {
            **_PLAN,
            "channels": {
                "type": "array",
                "items": {"type": "string", "enum": [c.value for c in ramsey.NoiseChannel]},
                "minItems": 1,
            },
            "amplitude": {"type": "number", "minimum": 0},
            "trials": {"type": "integer", "minimum": 1},
        },
        {**_PLAN_DEFAULT, "channels": [c.value for c in ramsey.ROBUST_CHANNELS], "amplitude": 1.0, "trials": 100},
    ),
    "thermal": (
        {
            **_PLAN,
            **{k: {"type": "number", "exclusiveMinimum": 0, "maximum": 1} for k in ("p0x", "p0y", "p0z")},
        },
        {**_PLAN_DEFAULT, "n": 2, "p0x": 0.9 ** (1 / 3), "p0y": 0.9 ** (1 / 3), "p0z": 0.9 ** (1 / 3)},
    ),
    "zeeman-scan": (
        {
            "n": {"type": "integer"},
            "rho_min": {"type": "number", "exclusiveMinimum": 0},
            "rho_max": {"type": "number", "exclusiveMinimum": 0},
            "rho_step": {"type": "number", "exclusiveMinimum": 0},
            "omega_R_hz": {"type": "number", "exclusiveMinimum": 0},
        },
        {"n": 10, "rho_min": 1.0, "rho_max": 4.0, "rho_step": 0.01, "omega_R_hz": 60e3},
    ),
    "rotor-spectrum": (
        {
            "a_min": {"type": "number"},
            "a_max": {"type": "number"},
            "points": {"type": "integer", "minimum": 2},
            "k": {"type": "integer", "minimum": 2},
            "N": {"type": "integer", "minimum": 8},
            "statistics": _STATS,
            "basis": {"type": "string", "enum": ["cos", "exp"]},
            "trap": _TRAP,
        },
        {
            "a_min": -4e-4,
            "a_max": 4e-4,
            "points": 401,
            "k": 8,
            "N": hamiltonian.DEFAULT_N,
            "statistics": "fermion",
            "basis": "exp",
            "trap": _TRAP_DEFAULT,
        },
    ),
    "rotor-ramp": (
        {
            **_RAMP,
            "statistics": {"type": "array", "items": _STATS, "minItems": 1},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "frames": {"type": "integer", "minimum": 16},
            "records": {"type": "integer", "minimum": 1},
            "cross_validate": {"type": "boolean"},
        },
        {
            **_RAMP_DEFAULT,
            "statistics": ["fermion", "boson"],
            "dt": dynamics.DEFAULT_DT,
            "frames": dynamics.DEFAULT_FRAMES,
            "records": 1000,
            "cross_validate": True,
        },
    ),
    "phases": (
        {
            **_RAMP,
            "B_gauss": {"type": "number", "minimum": 0},
            "r0": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "A_prime": {"type": "number"},
            "samples": {"type": "integer", "minimum": 3},
        },
        {**_RAMP_DEFAULT, "B_gauss": 4.0, "r0": 2.5e-6, "A_prime": 8e8, "samples": 20001},
    ),
}


def config_schema(command: str) -> dict:
    props, _ = PARAMS[command]
    return {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "command": {"const": command},
            "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            "out": {"type": "string"},
            "params": {"type": "object", "additionalProperties": False, "properties": props},
        },
    }


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(command: str, path: str | None) -> dict:
    """Read, unwrap (manifest), schema-check and default-fill a config."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        if isinstance(raw, dict) and "manifest_version" in raw:
            raw = raw.get("config", {})
    errors = sorted(jsonschema.Draft202012Validator(config_schema(command)).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        lines = [f"  at /{'/'.join(map(str, e.path))}: {e.message}" for e in errors]
        raise ConfigInvalid("config does not match the schema:\n" + "\n".join(lines))
    _, defaults = PARAMS[command]
    return {
        "command": command,
        "seed": raw.get("seed", 0),
        "out": raw.get("out"),
        "params": _merge(defaults, raw.get("params", {})),
    }


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data) -> None:
    _atomic_write(path, json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _versions() -> dict:
    from importlib.metadata import version

    import numba
    import scipy

    return {
        "exchangelab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "jsonschema": version("jsonschema"),
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _stats(name: str) -> fock.Statistics:
    return fock.Statistics.parse(name)


def _trap(block: dict) -> trap.TrapConfig:
    return trap.TrapConfig.from_axial_frequency(
        2 * math.pi * block["drive_hz"], block["q"], 2 * math.pi * block["axial_hz"]
    )


def _plan(p: dict, phases: ramsey.PhaseSettings | None = None) -> ramsey.SequencePlan:
    return ramsey.build_sequence(p["n"], p["variant"], phases, p["quant_axis"])


def cmd_fringe(p: dict, out: Path, seed: int, threads: int) -> dict:
    plan = _plan(p, ramsey.PhaseSettings(**p["phases"]))
    fit = ramsey.fringe_scan(plan, _stats(p["statistics"]), phis=ramsey.default_grid(p["points"]))
    write_csv(out / "fringe.csv", ["phi", "parity", "postselect_prob"], zip(fit.phis, fit.parity, fit.postselect))
    return {
        "phase": fit.phase,
        "visibility": fit.visibility,
        "offset": fit.offset,
        "residual_rms": fit.residual_rms,
        "exchange_phase": _stats(p["statistics"]).exchange_phase,
    }


def cmd_dephase(p: dict, out: Path, seed: int, threads: int) -> dict:
    plan = _plan(p)
    stats = _stats(p["statistics"])
    seeds = np.random.SeedSequence(seed).spawn(len(p["channels"]))

    def one(args):
        ch, ss = args
        model = ramsey.NoiseModel(ramsey.NoiseChannel(ch), p["amplitude"])
        return ramsey.dephasing_audit(plan, stats, model, p["trials"], int(ss.generate_state(1)[0]))

    with ThreadPoolExecutor(max(1, threads)) as pool:
        results = list(pool.map(one, zip(p["channels"], seeds)))
    rows = [(r.channel, i, d) for r in results for i, d in enumerate(r.deviations)]
    write_csv(out / "dephase.csv", ["channel", "trial", "deviation"], rows)
    return {"max_deviation": {r.channel: r.max_deviation for r in results}, "reference_phase": results[0].reference_phase}


def cmd_thermal(p: dict, out: Path, seed: int, threads: int) -> dict:
    occ = ramsey.ThermalOccupation(p["p0x"], p["p0y"], p["p0z"])
    res = ramsey.thermal_visibility(occ, _plan(p), _stats(p["statistics"]))
    summary = {
        "p0": occ.p0,
        "p_indist": res.p_indist,
        "visibility": res.visibility,
        "visibility_truncated": res.visibility_truncated,
        "visibility_engine": res.visibility_engine,
        "phase_engine": res.phase_engine,
        "truncation_error": res.truncation_error,
    }
    write_csv(out / "thermal.csv", list(summary), [list(summary.values())])
    return summary


def cmd_zeeman_scan(p: dict, out: Path, seed: int, threads: int) -> dict:
    count = int(round((p["rho_max"] - p["rho_min"]) / p["rho_step"])) + 1
    if count < 1 or p["rho_max"] < p["rho_min"]:
        raise ConfigInvalid("rho_max must not be below rho_min")
    rhos = p["rho_min"] + p["rho_step"] * np.arange(count)
    rows = zeeman.rho_scan(rhos, p["n"], 2 * math.pi * p["omega_R_hz"], threads)
    write_csv(
        out / "zeeman_scan.csv",
        ["rho", "p_err", "residual_phase", "closed_form"],
        [(r.rho, r.p_err, r.residual_phase, r.closed_form) for r in rows],
    )
    perr = [r.p_err for r in rows]
    return {
        "points": len(rows),
        "minima": [{"rho": rows[i].rho, "p_err": perr[i]} for i in zeeman.local_minima(perr)],
        "maxima": [{"rho": rows[i].rho, "p_err": perr[i]} for i in zeeman.local_maxima(perr)],
    }


def cmd_rotor_spectrum(p: dict, out: Path, seed: int, threads: int) -> dict:
    tc = _trap(p["trap"])
    sector = hamiltonian.Sector.for_statistics(p["statistics"])
    model = hamiltonian.RotorModel(tc, hamiltonian.AngularBasis(sector, p["N"], p["basis"]))
    sector_model = hamiltonian.RotorModel(tc, hamiltonian.AngularBasis(sector, p["N"], "cos"))
    a_vals = np.linspace(p["a_min"], p["a_max"], p["points"])
    k = p["k"]

    def one(a):
        e = model.spectrum(float(a), k, vectors=False).energies
        same = sector_model.spectrum(float(a), 2, vectors=False).energies
        return e - e[0], same[1] - same[0]

    with ThreadPoolExecutor(max(1, threads)) as pool:
        res = list(pool.map(one, a_vals))
    header = ["a"] + [f"E{j}_minus_E0_hz" for j in range(1, k)] + ["same_symmetry_gap_hz"]
    rows = [[a, *(g[1:] / (2 * math.pi)), s / (2 * math.pi)] for a, (g, s) in zip(a_vals, res)]
    write_csv(out / "spectrum.csv", header, rows)
    gaps = np.array([s for _, s in res])
    i = int(np.argmin(gaps))
    f0 = trap.trap_frequencies(tc)
    return {
        "min_same_symmetry_gap_hz": gaps[i] / (2 * math.pi),
        "a_at_min_gap": a_vals[i],
        "critical_splitting_hz": trap.critical_splitting(tc.q, f0.omega_perp) / (2 * math.pi),
        "ion_distance_m": trap.equilibrium_distance(tc.mass, f0.omega_perp),
    }


def _ramp(p: dict, sector: hamiltonian.Sector = hamiltonian.Sector.FERMION_ODD):
    tc = _trap(p["trap"])
    model = hamiltonian.RotorModel(tc, hamiltonian.AngularBasis(sector, p["N"]))
    sched, prof = adiabatic.gamma_ramp(model, p["a_start"], p["a_end"], p["duration"], p["gamma_rtol"])
    return tc, model, sched, prof


def cmd_rotor_ramp(p: dict, out: Path, seed: int, threads: int) -> dict:
    tc, model, sched, prof = _ramp(p)
    write_csv(out / "gamma.csv", ["a", "gamma", "gap_hz"], zip(prof.a, prof.gamma, prof.gap / (2 * math.pi)))
    write_csv(out / "ramp.csv", ["t", "a"], zip(sched.t, sched.a))
    summary: dict = {"gamma_samples": int(prof.a.size)}
    for name in p["statistics"]:
        stats = _stats(name)
        sector = hamiltonian.Sector.for_statistics(stats)
        smodel = model if sector is model.basis.sector else model.with_basis(hamiltonian.AngularBasis(sector, p["N"]))
        entry: dict = {}
        if p["cross_validate"]:
            cv = dynamics.cross_validate(sched, smodel, dt=p["dt"], frames=p["frames"], records=p["records"])
            traj = cv.banded
            entry["eigenframe_final_ground_population"] = cv.eigenframe.final_ground_population
            entry["method_difference"] = cv.difference
            write_csv(
                out / f"trajectory_{name}_eigenframe.csv",
                ["t", "a", "overlap2", "ground", "excited"],
                zip(cv.eigenframe.t, cv.eigenframe.a, cv.eigenframe.ground, cv.eigenframe.ground, cv.eigenframe.excited),
            )
        else:
            traj = dynamics.propagate(sched, smodel, dt=p["dt"], records=p["records"])
        pt = dynamics.parity_transfer(stats, sched, tc, p["N"], p["dt"], p["records"], trajectory=traj)
        write_csv(
            out / f"trajectory_{name}.csv",
            ["t", "a", "overlap2", "ground", "excited"],
            zip(traj.t, traj.a, traj.ground, traj.ground, traj.excited),
        )
        entry.update(
            {
                "min_overlap2": traj.min_overlap,
                "final_ground_population": traj.final_ground_population,
                "final_state_label": pt.target_label,
                "final_target_population": pt.final_target_population,
                "forbidden_population": pt.forbidden_population,
                "norm_drift": traj.norm_drift,
            }
        )
        summary[name] = entry
    return summary


def cmd_phases(p: dict, out: Path, seed: int, threads: int) -> dict:
    tc, model, sched, _ = _ramp(p)
    r0 = p["r0"] if p["r0"] is not None else trap.rotor_coefficients(tc).r0
    phi_ab = trap.aharonov_bohm_phase(p["B_gauss"] * 1e-4, r0)
    sp = phases.stray_phase(p["A_prime"], sched, tc, p["samples"])
    rt = phases.round_trip_consistency(p["A_prime"], sched, tc, p["samples"])
    write_csv(out / "stray_phase.csv", ["t", "a", "theta_min"], zip(sp.t, sched.a_at(sp.t), sp.theta_min))
    return {
        "aharonov_bohm_phase": phi_ab,
        "aharonov_bohm_phase_over_2pi": phi_ab / (2 * math.pi),
        "stray_phase": sp.phase,
        "stray_phase_over_pi": sp.phase / math.pi,
        "theta_min_closed_form_deviation": sp.max_closed_form_deviation,
        "round_trip_mismatch": rt,
    }


COMMANDS = {
    "fringe": cmd_fringe,
    "dephase": cmd_dephase,
    "thermal": cmd_thermal,
    "zeeman-scan": cmd_zeeman_scan,
    "rotor-spectrum": cmd_rotor_spectrum,
    "rotor-ramp": cmd_rotor_ramp,
    "phases": cmd_phases,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exchangelab", description="Exchange-phase simulation scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config or a previous manifest.json")
        sp.add_argument("--out", help="output directory (default: ./out/<command>)")
        sp.add_argument("--seed", type=int, help="RNG seed (u64)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for scans")
    return parser


def run(command: str, config_path: str | None = None, out: str | None = None, seed: int | None = None,
        threads: int = 1) -> dict:
    """Execute one scenario and write its artifacts plus ``manifest.json``."""
    cfg = load_config(command, config_path)
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        cfg["seed"] = seed
    if out is not None:
        cfg["out"] = out
    if cfg["out"] is None:
        cfg["out"] = str(Path("out") / command)
    out_dir = Path(cfg["out"])
    start = time.perf_counter()
    summary = COMMANDS[command](cfg["params"], out_dir, cfg["seed"], max(1, threads))
    write_json(out_dir / "summary.json", summary)
    manifest = {
        "manifest_version": 1,
        "command": command,
        "config": {k: cfg[k] for k in ("command", "seed", "out", "params")},
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - start,
        "artifacts": sorted(f.name for f in out_dir.iterdir() if f.is_file() and f.name != MANIFEST and not f.name.startswith(".")),
    }
    write_json(out_dir / MANIFEST, manifest)
    return summary


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = run(args.command, args.config, args.out, args.seed, args.threads)
    except ConfigInvalid as exc:
        print(f"error: ConfigInvalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ExchangeLabError, ValueError) as exc:
        # invalid physical inputs (odd separation, unstable trap, ...)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(_jsonable(summary), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
