"""Batch front door: JSON config in, JSON/CSV artifacts out.

Usage::

    clocklat <subcommand> --config cfg.json [--seed S] [--threads T] [--out DIR]

Subcommands: lemma, sandwich, prefactor, raster, cell, volume, dirichlet,
recover, energy.  The config is a flat JSON object holding the common
fields (command, seed, threads, out, timing) plus the command-specific
parameters; unknown keys are rejected.  Every run writes the resolved
config next to its outputs and embeds the config's SHA-256 in each output
file.

Determinism: a single global seed fans out to per-component seeds through
``rng.derive_seed`` (SHA-256 of "seed:label", first 8 bytes).  The thread
count is recorded but never affects results.  By default the wall-time
column of tables is written as 0.0 so identical config + seed reproduce
output files byte for byte; set "timing": true to record real wall times
(which breaks byte identity, as clocks do).
"""

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Direction, geodesic_distance_SN, geodesic_index_distance, prefactor
from .lattice import (LatticeDomain, SpinField, boundary_layer, discrete_energy)
from .continuum import GridPartitionField
from .constructions import (StaircaseSpec, pointwise_sample, staircase_recovery,
                            transition_slab)
from .solvers import (AnnealSchedule, CellProblemSpec, SearchSpaceError,
                      anneal_glauber, anneal_kawasaki, bond_lower_bound_energy,
                      cell_formula_estimate, enumerate_min_counts,
                      phase_counts, _multinomial)
from .experiments import (ConvergenceTable, run_gamma_sandwich, run_lemma_sweep,
                          run_oblique_raster, run_prefactor_limit)
from .rng import chain_stream, derive_seed

COMMANDS = ("lemma", "sandwich", "prefactor", "raster", "cell", "volume",
            "dirichlet", "recover", "energy")


class ConfigError(ValueError):
    """A config field failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(message)

    def as_json(self):
        return {"error": {"type": "config", "field": self.field,
                          "message": str(self)}}


@dataclass
class ExperimentConfig:
    command: str
    params: dict
    out_dir: str
    seed: int
    threads: int
    timing: bool

    def resolved(self) -> dict:
        out = {"command": self.command, "seed": self.seed,
               "threads": self.threads, "out": self.out_dir,
               "timing": self.timing}
        for key, val in self.params.items():
            if isinstance(val, Direction):
                val = list(val.ints) if val.ints else list(val.vector)
            out[key] = val
        return out

    def sha256(self) -> str:
        text = json.dumps(self.resolved(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ----------------------------------------------------------------------
# schemas
# ----------------------------------------------------------------------

COMMON_KEYS = {"command", "seed", "threads", "out", "timing"}

SCHEMA = {
    "lemma": {"k_max": 64, "grid": 10_000},
    "sandwich": {"s": None, "r": None, "nu": None, "N": None,
                 "eps_ladder": None, "method": "auto", "schedule": {}},
    "prefactor": {"N_ladder": None},
    "raster": {"nu": None, "angle_minus": None, "angle_plus": None,
               "lam_ladder": None},
    "cell": {"s": None, "r": None, "nu": None, "N": None, "eps": None,
             "method": "auto", "schedule": {}},
    "volume": {"d": 2, "extent": None, "eps": None, "N": None,
               "fractions": None, "method": "auto", "schedule": {}},
    "dirichlet": {"d": 2, "extent": None, "eps": None, "N": None,
                  "datum": None, "method": "anneal", "schedule": {}},
    "recover": {"s": None, "r": None, "nu": None, "N": None, "eps": None,
                "domain": "cube", "m": 8, "pad": 2},
    "energy": {"field": None},
}

SCHEDULE_KEYS = {"t_initial", "t_final", "cooling", "sweeps", "chains",
                 "moves_per_sweep", "debug"}


def _require_int(raw, field, minimum=None):
    if not isinstance(raw, int) or isinstance(raw, bool):
        raise ConfigError(field, f"{field} must be an integer, got {raw!r}")
    if minimum is not None and raw < minimum:
        raise ConfigError(field, f"{field} must be >= {minimum}, got {raw}")
    return raw


def _require_number(raw, field, lo=None, hi=None, lo_open=False, hi_open=False):
    if not isinstance(raw, (int, float)) or isinstance(raw, bool):
        raise ConfigError(field, f"{field} must be a number, got {raw!r}")
    v = float(raw)
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(field, f"{field} must be {'>' if lo_open else '>='} {lo}")
    if hi is not None and (v >= hi if hi_open else v > hi):
        raise ConfigError(field, f"{field} must be {'<' if hi_open else '<='} {hi}")
    return v


def _parse_direction(raw, field) -> Direction:
    if not isinstance(raw, (list, tuple)) or len(raw) < 2:
        raise ConfigError(field, f"{field} must be a list of >= 2 components")
    if all(isinstance(x, int) and not isinstance(x, bool) for x in raw):
        if all(x == 0 for x in raw):
            raise ConfigError(field, f"{field} must be nonzero")
        return Direction.from_ints(*raw)
    try:
        return Direction.from_vector([float(x) for x in raw])
    except (TypeError, ValueError) as exc:
        raise ConfigError(field, f"{field}: {exc}") from exc


def _parse_schedule(raw, seed) -> AnnealSchedule:
    if not isinstance(raw, dict):
        raise ConfigError("schedule", "schedule must be an object")
    unknown = sorted(set(raw) - SCHEDULE_KEYS)
    if unknown:
        raise ConfigError("schedule", f"unknown schedule keys: {unknown}")
    try:
        return AnnealSchedule(seed=seed, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("schedule", f"schedule: {exc}") from exc


def parse_config(path, command=None) -> ExperimentConfig:
    """Load and validate a config file; fills defaults, rejects unknown keys."""
    p = Path(path)
    if not p.exists():
        raise ConfigError("config", f"config file not found: {path}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", "config must be a JSON object")

    cmd = raw.get("command", command)
    if cmd is None:
        raise ConfigError("command", "no command given (config or argument)")
    if command is not None and cmd != command:
        raise ConfigError("command",
                          f"config says {cmd!r} but the subcommand is {command!r}")
    if cmd not in SCHEMA:
        raise ConfigError("command", f"unknown command {cmd!r}; "
                          f"choose from {sorted(SCHEMA)}")

    schema = SCHEMA[cmd]
    unknown = sorted(set(raw) - COMMON_KEYS - set(schema))
    if unknown:
        raise ConfigError(unknown[0], f"unknown config keys: {unknown}")

    seed = _require_int(raw.get("seed", 0), "seed")
    threads = _require_int(raw.get("threads", 1), "threads", minimum=1)
    timing = raw.get("timing", False)
    if not isinstance(timing, bool):
        raise ConfigError("timing", "timing must be a boolean")
    out_dir = raw.get("out", ".")

    params = {}
    for key, default in schema.items():
        if key in raw:
            params[key] = raw[key]
        elif default is not None:
            params[key] = default
        else:
            raise ConfigError(key, f"missing required field {key!r}")

    _validate_params(cmd, params)
    return ExperimentConfig(cmd, params, str(out_dir), seed, threads, timing)


def _validate_params(cmd, params):
    if "N" in params:
        _require_int(params["N"], "N", minimum=2)
    if cmd in ("sandwich", "cell", "recover"):
        _require_int(params["s"], "s", minimum=0)
        _require_int(params["r"], "r", minimum=0)
        params["nu"] = _parse_direction(params["nu"], "nu")
        for lab in ("s", "r"):
            if params[lab] >= params["N"]:
                raise ConfigError(lab, f"{lab} must be < N = {params['N']}")
    if cmd == "raster":
        params["nu"] = _parse_direction(params["nu"], "nu")
        _require_number(params["angle_minus"], "angle_minus")
        _require_number(params["angle_plus"], "angle_plus")
        if not isinstance(params["lam_ladder"], list) or not params["lam_ladder"]:
            raise ConfigError("lam_ladder", "lam_ladder must be a nonempty list")
        params["lam_ladder"] = [
            _require_number(v, "lam_ladder", lo=0, lo_open=True)
            for v in params["lam_ladder"]]
    if cmd == "sandwich":
        if not isinstance(params["eps_ladder"], list) or not params["eps_ladder"]:
            raise ConfigError("eps_ladder", "eps_ladder must be a nonempty list")
        params["eps_ladder"] = [
            _require_number(v, "eps_ladder", lo=0, hi=0.25, lo_open=True, hi_open=True)
            for v in params["eps_ladder"]]
    if cmd == "cell":
        params["eps"] = _require_number(params["eps"], "eps", lo=0, hi=0.25,
                                        lo_open=True, hi_open=True)
    if cmd == "recover":
        params["eps"] = _require_number(params["eps"], "eps", lo=0, lo_open=True)
        if params["domain"] not in ("cube", "slab"):
            raise ConfigError("domain", "domain must be 'cube' or 'slab'")
        if params["domain"] == "cube" and params["eps"] >= 0.25:
            raise ConfigError("eps", "eps must be < 1/4 on the cube domain")
        _require_int(params["m"], "m", minimum=1)
        _require_int(params["pad"], "pad", minimum=1)
    if cmd == "prefactor":
        if not isinstance(params["N_ladder"], list) or not params["N_ladder"]:
            raise ConfigError("N_ladder", "N_ladder must be a nonempty list")
        for v in params["N_ladder"]:
            _require_int(v, "N_ladder", minimum=2)
    if cmd == "lemma":
        _require_int(params["k_max"], "k_max", minimum=1)
        _require_int(params["grid"], "grid", minimum=2)
    if cmd in ("volume", "dirichlet"):
        _require_int(params["d"], "d", minimum=2)
        if not isinstance(params["extent"], list) or len(params["extent"]) != params["d"]:
            raise ConfigError("extent", "extent must list one size per axis")
        for v in params["extent"]:
            _require_int(v, "extent", minimum=2)
        params["eps"] = _require_number(params["eps"], "eps", lo=0, lo_open=True)
    if cmd == "volume":
        fr = params["fractions"]
        if not isinstance(fr, list) or len(fr) != params["N"]:
            raise ConfigError("fractions", "fractions must list one value per phase")
        total = sum(fr)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError("fractions", f"fractions must sum to 1, got {total}")
    if cmd == "energy":
        if not isinstance(params["field"], str):
            raise ConfigError("field", "field must be a path string")
    if cmd == "dirichlet":
        if not isinstance(params["datum"], str):
            raise ConfigError("datum", "datum must be a path string")


# ----------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit_table(cfg: ExperimentConfig, table: ConvergenceTable, stem: str, extra=None):
    out = Path(cfg.out_dir)
    sha = cfg.sha256()
    if not cfg.timing:
        for row in table.rows:
            row.seconds = 0.0
    csv_text = table.to_csv() + f"# config_sha256={sha}\n"
    _write(out / f"{stem}_table.csv", csv_text)
    payload = {"config_sha256": sha, "table": table.as_dict()}
    if extra:
        payload.update(extra)
    _write(out / f"{stem}_result.json", json.dumps(payload, sort_keys=True, indent=2))


def _emit_json(cfg: ExperimentConfig, payload: dict, stem: str):
    out = Path(cfg.out_dir)
    payload = dict(payload)
    payload["config_sha256"] = cfg.sha256()
    _write(out / f"{stem}_result.json", json.dumps(payload, sort_keys=True, indent=2))


def _write_resolved(cfg: ExperimentConfig):
    out = Path(cfg.out_dir)
    _write(out / f"{cfg.command}_config.json",
           json.dumps(cfg.resolved(), sort_keys=True, indent=2))


def _schedule_from(cfg: ExperimentConfig, label: str, **overrides) -> AnnealSchedule:
    sched = _parse_schedule(cfg.params.get("schedule", {}),
                            derive_seed(cfg.seed, label))
    for key, val in overrides.items():
        setattr(sched, key, val)
    return sched


def _grid_interior_jump(part: GridPartitionField, bounds) -> float:
    """Jump measure of a partition strictly inside an open box (any d)."""
    total = 0.0
    vals = part.values
    lam = part.lam
    for ell in range(part.d):
        lo = [slice(None)] * part.d
        hi = [slice(None)] * part.d
        lo[ell] = slice(0, -1)
        hi[ell] = slice(1, None)
        if part.mode == "SN":
            differ = vals[tuple(lo)] != vals[tuple(hi)]
        else:
            differ = np.abs(vals[tuple(lo)] - vals[tuple(hi)]) > 1e-12
        for z in np.argwhere(differ):
            center = [part.origin[j] + lam * (z[j] + (0.5 if j != ell else 1.0))
                      for j in range(part.d)]
            inside = all(bounds[j][0] + 1e-9 < center[j] < bounds[j][1] - 1e-9
                         for j in range(part.d))
            if inside:
                total += lam ** (part.d - 1)
    return total


def dispatch(cfg: ExperimentConfig) -> int:
    """Run one command; returns the process exit status."""
    _write_resolved(cfg)
    timer = time.perf_counter
    p = cfg.params

    if cfg.command == "lemma":
        report = run_lemma_sweep(p["k_max"], p["grid"])
        _emit_json(cfg, report, "lemma")
        # keep the documented artifact name as well
        _write(Path(cfg.out_dir) / "lemma_report.json",
               json.dumps({**report, "config_sha256": cfg.sha256()},
                          sort_keys=True, indent=2))
        return 0

    if cfg.command == "prefactor":
        table = run_prefactor_limit(p["N_ladder"], timer=timer)
        _emit_table(cfg, table, "prefactor")
        return 0

    if cfg.command == "raster":
        table = run_oblique_raster(p["nu"], p["angle_minus"], p["angle_plus"],
                                   p["lam_ladder"], timer=timer)
        _emit_table(cfg, table, "raster")
        return 0

    if cfg.command == "sandwich":
        sched = _schedule_from(cfg, "sandwich")
        table = run_gamma_sandwich(p["s"], p["r"], p["nu"], p["N"],
                                   p["eps_ladder"], method=p["method"],
                                   schedule=sched, timer=timer)
        _emit_table(cfg, table, "sandwich")
        return 0

    if cfg.command == "cell":
        sched = _schedule_from(cfg, "cell")
        spec = CellProblemSpec(p["s"], p["r"], p["nu"], p["eps"], p["N"],
                               method=p["method"])
        res = cell_formula_estimate(spec, schedule=sched)
        field_file = "cell_field.json"
        _write(Path(cfg.out_dir) / field_file, res.field.to_json())
        _emit_json(cfg, res.summary(field_file=field_file), "cell")
        return 0

    if cfg.command == "volume":
        domain = LatticeDomain.grid(p["d"], p["eps"], p["extent"])
        n = domain.n_sites
        counts = []
        for j, f in enumerate(p["fractions"]):
            c = f * n
            if abs(c - round(c)) > 1e-9:
                raise ConfigError("fractions",
                                  f"fractions[{j}] * {n} sites is not an integer")
            counts.append(int(round(c)))
        rng = chain_stream(derive_seed(cfg.seed, "volume-init"), 0)
        values = np.repeat(np.arange(p["N"]), counts)
        rng.shuffle(values)
        field = SpinField(domain, p["N"], values)
        method = p["method"]
        if method == "auto":
            bits = math.log2(max(_multinomial(n, counts), 1))
            method = "enumerate" if bits <= 26 else "kawasaki"
        if method == "enumerate":
            res = enumerate_min_counts(field, counts)
        else:
            sched = _schedule_from(cfg, "volume")
            res = anneal_kawasaki(field, counts, sched)
        field_file = "volume_field.json"
        _write(Path(cfg.out_dir) / field_file, res.field.to_json())
        payload = res.summary(field_file=field_file)
        payload["counts"] = counts
        _emit_json(cfg, payload, "volume")
        return 0

    if cfg.command == "dirichlet":
        datum_path = Path(p["datum"])
        if not datum_path.exists():
            raise ConfigError("datum", f"datum file not found: {p['datum']}")
        part = GridPartitionField.from_json(datum_path.read_text())
        domain = LatticeDomain.grid(p["d"], p["eps"], p["extent"])
        field = pointwise_sample(part, domain, N=p["N"])
        layer = boundary_layer(domain, 2.0 * p["eps"])
        field.frozen |= layer
        interior_jump = _grid_interior_jump(part, domain.bounds)
        sched = _schedule_from(cfg, "dirichlet")
        res = anneal_glauber(field, sched)
        field_file = "dirichlet_field.json"
        _write(Path(cfg.out_dir) / field_file, res.field.to_json())
        payload = res.summary(field_file=field_file)
        payload["datum_interior_jump"] = interior_jump
        payload["datum_jump_warning"] = interior_jump > 1e-12
        if payload["datum_jump_warning"]:
            print("warning: boundary datum jumps inside the domain "
                  f"(measure {interior_jump:.6g}); the discrete problem is "
                  "still well defined", file=sys.stderr)
        _emit_json(cfg, payload, "dirichlet")
        return 0

    if cfg.command == "recover":
        if p["domain"] == "cube":
            domain = LatticeDomain.q_cube(p["eps"], p["nu"])
        else:
            d = p["nu"].d
            ax = p["nu"].axis_index()
            if ax is None:
                raise ConfigError("domain", "slab domains need an axis normal")
            k_s = geodesic_index_distance(p["s"], p["r"], p["N"])
            domain = transition_slab(d, p["eps"], p["m"], k_s, axis=ax,
                                     pad=p["pad"])
        spec = StaircaseSpec(p["s"], p["r"], p["nu"], p["eps"], p["N"], domain)
        field = staircase_recovery(spec)
        profile = staircase_recovery(spec, apply_datum=False)
        total = discrete_energy(field)
        pure = discrete_energy(profile)
        field_file = "recover_field.json"
        _write(Path(cfg.out_dir) / field_file, field.to_json())
        _emit_json(cfg, {
            "scaled": total.scaled, "raw": total.raw,
            "bond_count": total.bond_count,
            "profile_scaled": pure.scaled,
            "boundary_layer_scaled": total.scaled - pure.scaled,
            "k_s": spec.k_s,
            "analytic": prefactor(p["N"])
            * geodesic_distance_SN(p["s"], p["r"], p["N"]) * p["nu"].norm1,
            "field_file": field_file,
        }, "recover")
        return 0

    if cfg.command == "energy":
        field_path = Path(p["field"])
        if not field_path.exists():
            raise ConfigError("field", f"field file not found: {p['field']}")
        field = SpinField.from_json(field_path.read_text())
        rep = discrete_energy(field)
        payload = rep.as_dict()
        payload["lower_bound"] = bond_lower_bound_energy(field)
        payload["phase_counts"] = phase_counts(field).tolist()
        _emit_json(cfg, payload, "energy")
        return 0

    raise ConfigError("command", f"unhandled command {cfg.command!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="clocklat",
        description="lattice spin energies, their interface limits, and solvers")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config, command=args.command)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        if args.out is not None:
            cfg.out_dir = args.out
        return dispatch(cfg)
    except ConfigError as exc:
        print(json.dumps(exc.as_json(), sort_keys=True), file=sys.stderr)
        return 2
    except SearchSpaceError as exc:
        print(json.dumps({"error": {"type": "search_space", **exc.report()}},
                         sort_keys=True), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
