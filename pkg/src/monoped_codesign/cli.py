"""Command-line entry point: ``stage1``, ``simulate``, ``optimize``, ``report``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import codesign as cd
from . import gearbox as gb
from .motors import CatalogError, MotorSpec, load_catalog
from .sim import write_trajectory_csv

log = logging.getLogger("monoped_codesign")

EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 1, 2

DEFAULT_CONFIG = Path(__file__).with_name("data") / "default_config.json"


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    motor_catalog: Path | None = None
    output_dir: Path = Path("out")
    settings: cd.Settings = field(default_factory=cd.Settings)
    population: int | None = None
    generations: int = 150
    sigma: float = 0.3
    seeds: tuple[int, ...] = (0, 1, 2)


def load_config(path: str | Path | None) -> RunConfig:
    src = Path(path) if path is not None else DEFAULT_CONFIG
    try:
        data = json.loads(src.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {src}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{src}: {exc}") from None
    unknown = set(data) - {"motor_catalog", "output_dir", "stage2", "cma"}
    if unknown:
        raise ConfigError(f"{src}: unknown keys {sorted(unknown)}")
    try:
        cfg = RunConfig(settings=cd.settings_from_dict(data.get("stage2", {})))
        if data.get("motor_catalog"):
            cat = Path(data["motor_catalog"])
            cfg.motor_catalog = cat if cat.is_absolute() else (src.parent / cat)
        if data.get("output_dir"):
            cfg.output_dir = Path(data["output_dir"])
        cma = data.get("cma", {})
        cfg.population = cma.get("population")
        cfg.generations = int(cma.get("generations", cfg.generations))
        cfg.sigma = float(cma.get("sigma", cfg.sigma))
        seeds = cma.get("seeds", list(cfg.seeds))
        if not seeds or any(not isinstance(s, int) or s < 0 for s in seeds):
            raise ConfigError(f"{src}: seeds must be a non-empty list of non-negative integers")
        cfg.seeds = tuple(seeds)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{src}: {exc}") from None
    return cfg


def _motors(cfg: RunConfig, only: int | None = None) -> list[MotorSpec]:
    try:
        motors = load_catalog(cfg.motor_catalog)
    except (CatalogError, OSError) as exc:
        raise ConfigError(str(exc)) from None
    if only is not None:
        motors = [m for m in motors if m.id == only]
        if not motors:
            raise ConfigError(f"motor id {only} not in catalog")
    return motors


def _map_path(out: Path, motor: MotorSpec, suffix: str = "json") -> Path:
    return out / "maps" / f"motor_{motor.id}.{suffix}"


def _write_map(out: Path, motor: MotorSpec, entries) -> None:
    _map_path(out, motor).parent.mkdir(parents=True, exist_ok=True)
    gb.write_map_json(_map_path(out, motor), entries, motor)
    gb.write_map_csv(_map_path(out, motor, "csv"), entries, motor)


def _load_table(cfg: RunConfig, out: Path) -> cd.ActuatorTable:
    motors = _motors(cfg)
    maps = {}
    for m in motors:
        path = _map_path(out, m)
        if not path.exists():
            log.warning("actuator map for motor %d missing; building %s", m.id, path)
            _write_map(out, m, gb.build_actuator_map(m))
        maps[m.id] = gb.read_map_json(path, m)
    return cd.ActuatorTable(motors, maps)


def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n")


# ---------------------------------------------------------------- commands

def cmd_stage1(cfg: RunConfig, out: Path, motor_id: int | None) -> int:
    for m in _motors(cfg, motor_id):
        entries = gb.build_actuator_map(m)
        _write_map(out, m, entries)
        parts = []
        for t in gb.TYPE_ORDER:
            ratios = [e.requested_ratio for e in gb.build_actuator_map(m, types=(t,))]
            parts.append(f"{t.value} {min(ratios):.1f}-{max(ratios):.1f}" if ratios else f"{t.value} none")
        print(f"motor {m.id} ({m.name}): {len(entries)} entries; " + ", ".join(parts))
    return EXIT_OK


def _read_design(path: str | None) -> cd.CodesignVariables:
    if path is None:
        return cd.NOMINAL
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"design file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    data = data.get("row", data)
    missing = [n for n in cd.VARIABLES if n not in data]
    if missing:
        raise ConfigError(f"{path}: missing design variables {missing}")
    vals = {n: data[n] for n in cd.VARIABLES}
    for n in ("M_l", "M_r"):
        if vals[n] != int(vals[n]):
            raise ConfigError(f"{path}: {n} must be an integer motor id")
        vals[n] = int(vals[n])
    return cd.CodesignVariables(**vals)


def cmd_simulate(cfg: RunConfig, out: Path, design_path: str | None) -> int:
    v = _read_design(design_path)
    table = _load_table(cfg, out)
    try:
        design = cd.build_design(v, table, cfg.settings)
    except ValueError as exc:
        raise ConfigError(f"design cannot be built: {exc}") from None
    ev = cd.evaluate(v, table, cfg.settings, record=True)
    r = ev.result
    out.mkdir(parents=True, exist_ok=True)
    if r.trajectory is not None and len(r.trajectory):
        write_trajectory_csv(out / "trajectory.csv", r)
    metrics = {"status": r.status, "distance_x": r.distance_x, "energy": r.energy,
               "liftoff_time": r.liftoff_time, "touchdown_time": r.touchdown_time,
               "steps": r.steps, "cost": ev.cost, "total_mass_kg": design.total_mass, "detail": r.detail}
    _dump(out / "metrics.json", metrics)
    lift = "-" if r.liftoff_time is None else f"{r.liftoff_time:.3f}"
    touch = "-" if r.touchdown_time is None else f"{r.touchdown_time:.3f}"
    print(f"status={r.status} distance={r.distance_x:.4f} m energy={r.energy:.3f} J "
          f"liftoff={lift} s touchdown={touch} s")
    return EXIT_SIM if r.status == "sim_failure" else EXIT_OK


def cmd_optimize(cfg: RunConfig, out: Path, case_name: str, seeds: Sequence[int]) -> int:
    names = list(cd.NESTING) if case_name.lower() == "all" else [case_name.lower()]
    for n in names:
        if n not in cd.NESTING:
            raise ConfigError(f"unknown case {case_name!r}; expected nominal, a, b, c or all")
    table = _load_table(cfg, out)
    runs = cd.run_nested(names, table, cfg.settings, seeds=seeds, generations=cfg.generations,
                         population=cfg.population, sigma=cfg.sigma)
    for n in names:
        for run in runs[n]:
            log.info("case %s seed %d: cost %.4f (start: %s)", run.case.name, run.seed, run.cost, run.start)
        report = cd.case_report(runs[n])
        _dump(out / f"report_{n}.json", report)
        print(cd.format_row(report["case"], report["best"]["row"]))
    return EXIT_OK


def cmd_report(cfg: RunConfig, out: Path) -> int:
    motors = _motors(cfg)
    map_files = {m.id: _map_path(out, m) for m in motors}
    reports = sorted(out.glob("report_*.json"))
    if not any(p.exists() for p in map_files.values()) and not reports:
        expected = [str(p) for p in map_files.values()] + [str(out / "report_<case>.json")]
        raise ConfigError("no inputs found; expected any of:\n  " + "\n  ".join(expected))
    rows = []
    for m in motors:
        if map_files[m.id].exists():
            for e in gb.read_map_json(map_files[m.id], m):
                rows.append((m.id, e.requested_ratio, e.type.value, e.best.gear_ratio,
                             e.best.mass, e.best.efficiency))
    plots = out / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    for name, col, idx in (("mass_vs_ratio", "mass_kg", 4), ("efficiency_vs_ratio", "efficiency", 5)):
        with open(plots / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("motor_id", "ratio", "type", "gear_ratio", col))
            for r in rows:
                w.writerow((r[0], repr(r[1]), r[2], repr(r[3]), repr(r[idx])))
    if reports:
        table = _load_table(cfg, out)
        for path in reports:
            best = json.loads(path.read_text())["best"]["row"]
            v = cd.CodesignVariables(**{n: best[n] for n in cd.VARIABLES})
            ev = cd.evaluate(v, table, cfg.settings, record=True)
            if ev.result is not None and ev.result.trajectory is not None and len(ev.result.trajectory):
                write_trajectory_csv(plots / f"trajectory_{path.stem[len('report_'):]}.csv", ev.result)
    print(f"wrote plot data to {plots}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monoped-codesign", description="Five-bar monoped actuator and control co-design.")
    p.add_argument("--config", help="run configuration JSON (defaults to the packaged config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stage1", help="build gear-ratio to actuator maps")
    s.add_argument("--motor", type=int, help="only this catalog motor id")

    s = sub.add_parser("simulate", help="run one jump")
    s.add_argument("--design", help="JSON with the 13 design/control variables (default: nominal)")

    s = sub.add_parser("optimize", help="co-optimise one case with CMA-ES")
    s.add_argument("--case", default="c", help="nominal, a, b, c or all; parent cases run first as warm starts")
    s.add_argument("--seeds", type=int, help="run seeds 0..n-1 (default: seeds from the config)")
    s.add_argument("--generations", type=int, help="override the generation budget")

    sub.add_parser("report", help="emit plot-ready CSVs from maps and case reports")

    for sp in sub.choices.values():
        sp.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        sp.add_argument("--out", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else cfg.output_dir
        if args.command == "stage1":
            return cmd_stage1(cfg, out, args.motor)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.design)
        if args.command == "optimize":
            if args.generations is not None:
                if args.generations < 1:
                    raise ConfigError("--generations must be positive")
                cfg.generations = args.generations
            seeds = cfg.seeds if args.seeds is None else tuple(range(args.seeds))
            if not seeds:
                raise ConfigError("--seeds must be positive")
            return cmd_optimize(cfg, out, args.case, seeds)
        return cmd_report(cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
