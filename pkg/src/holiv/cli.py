"""Batch experiment front-end.

    holiv <subcommand> [--config PATH] [--seed N] [--out DIR] [--dump-stages] [--threads N]

Subcommands: repstab-sweep, orbits, wilson, livsic, surface-sweep. The config
file holds flat ``key = value`` lines; command-line flags override it. Every
run writes ``manifest.json`` (config echo and versions) and ``timing.json``
(wall time) next to its tables. Failures write ``error.json`` naming the
stage and exit with status 1.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__, cocycle, dynamics, livsic, matalg, repstab, surface
from .errors import HolivError, StageError

log = logging.getLogger("holiv")

SUBCOMMANDS = ("repstab-sweep", "orbits", "wilson", "livsic", "surface-sweep")

DEFAULTS = {
    "map": "2 1 1 1",
    "rank": "2",
    "seed": "0",
    "sweep": "",
    "period_max": "6",
    "geodesic_length": "8.0",
    "trials": "20",
    "tol": "1e-10",
    "mode": "exact",
    "grid": "24",
    "max_word_length": "5",
    "out": "out",
}

SWEEP_DEFAULTS = {
    "repstab-sweep": "1e-2 1e-3 1e-4 1e-5",
    "livsic": "",
    "surface-sweep": "0 1e-4 1e-3 1e-2 1e-1",
    "orbits": "",
    "wilson": "",
}


@dataclass
class ExperimentConfig:
    subcommand: str
    map: tuple[int, int, int, int]
    rank: int
    seed: int
    tol: float
    sweep: list[float]
    period_max: int
    geodesic_length: float
    trials: int
    mode: str
    grid: int
    max_word_length: int
    out: Path
    dump_stages: bool = False
    threads: int = 1

    def echo(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "map": list(self.map),
            "rank": self.rank,
            "seed": self.seed,
            "tol": self.tol,
            "sweep": self.sweep,
            "period_max": self.period_max,
            "geodesic_length": self.geodesic_length,
            "trials": self.trials,
            "mode": self.mode,
            "grid": self.grid,
            "max_word_length": self.max_word_length,
            "dump_stages": self.dump_stages,
            "threads": self.threads,
        }


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string("[run]\n" + Path(path).read_text(encoding="utf-8"))
    return dict(parser["run"])


def build_config(subcommand: str, file_values: dict[str, str], overrides: dict) -> ExperimentConfig:
    raw = dict(DEFAULTS)
    raw["sweep"] = SWEEP_DEFAULTS[subcommand]
    unknown = set(file_values) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    raw.update(file_values)
    raw.update({k: str(v) for k, v in overrides.items() if v is not None})
    entries = [int(x) for x in raw["map"].replace(",", " ").split()]
    if len(entries) != 4:
        raise ValueError("map needs four integers")
    sweep = [float(x) for x in raw["sweep"].replace(",", " ").split()]
    diffs = np.diff(sweep)
    if len(sweep) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("sweep grid must be strictly monotone")
    seed = int(raw["seed"])
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return ExperimentConfig(
        subcommand=subcommand,
        map=tuple(entries),
        rank=int(raw["rank"]),
        seed=seed,
        tol=float(raw["tol"]),
        sweep=sweep,
        period_max=int(raw["period_max"]),
        geodesic_length=float(raw["geodesic_length"]),
        trials=int(raw["trials"]),
        mode=raw["mode"],
        grid=int(raw["grid"]),
        max_word_length=int(raw["max_word_length"]),
        out=Path(raw["out"]),
        dump_stages=bool(overrides.get("dump_stages")),
        threads=int(overrides.get("threads") or os.environ.get("HOLIV_THREADS", "1")),
    )


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stage name)."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest[:16], "little")))


# ---------------------------------------------------------------- emitters


class Emitter:
    """Single ordered writer for every artifact of a run."""

    def __init__(self, root: Path):
        self.root = root
        self.written: list[str] = []

    def text(self, name: str, content: str) -> None:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8", newline="\n")
        self.written.append(name)

    def json(self, name: str, obj) -> None:
        self.text(name, json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n")

    def csv(self, name: str, header: list[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])
        self.text(name, buf.getvalue())

    def binary(self, name: str, data: bytes) -> None:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.written.append(name)


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------- subcommands


def _hmap(cfg: ExperimentConfig) -> dynamics.HyperbolicMap:
    return dynamics.HyperbolicMap.from_entries(*cfg.map)


def run_repstab_sweep(cfg: ExperimentConfig, em: Emitter) -> dict:
    dim = cfg.rank

    def trial(args):
        delta, t = args
        rng = stage_rng(cfg.seed, f"repstab:{delta!r}:{t}")
        rep0 = repstab.random_rep(rng, dim)
        rep = repstab.perturb_rep(rep0, delta, rng).conjugated(matalg.random_unitary(rng, dim))
        r = repstab.near_conjugacy(rep0, rep)
        return delta, t, r.epsilon, r.residual

    jobs = [(d, t) for d in cfg.sweep for t in range(cfg.trials)]
    with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as pool:
        rows = list(pool.map(trial, jobs))
    em.csv("repstab_sweep.csv", ["delta", "trial", "epsilon", "residual"], rows)
    eps = np.array([r[2] for r in rows])
    res = np.array([r[3] for r in rows])
    slope = float(np.polyfit(np.log(eps), np.log(res), 1)[0])
    medians = [float(np.median([r[3] for r in rows if r[0] == d])) for d in cfg.sweep]
    summary = {"slope": slope, "median_residuals": medians, "deltas": cfg.sweep}
    em.json("summary.json", summary)
    return summary


def run_orbits(cfg: ExperimentConfig, em: Emitter) -> dict:
    hmap = _hmap(cfg)
    orbits = dynamics.enumerate_periodic_orbits(hmap, cfg.period_max)
    em.text("orbits.csv", dynamics.orbits_to_csv(orbits))
    rows = []
    for n in range(1, cfg.period_max + 1):
        prim = sum(1 for o in orbits if o.period == n)
        rows.append((n, dynamics.count_points_of_period_dividing(hmap, n), prim))
    em.csv("counts.csv", ["period", "points_fixed_by_power", "primitive_orbits"], rows)
    return {"orbits": len(orbits)}


def run_wilson(cfg: ExperimentConfig, em: Emitter) -> dict:
    hmap = _hmap(cfg)
    c = cocycle.random_trig_cocycle(stage_rng(cfg.seed, "cocycle"), hmap, cfg.rank)
    em.text("cocycle.json", c.to_json() + "\n")
    orbits = dynamics.enumerate_periodic_orbits(hmap, cfg.period_max)
    records = cocycle.wilson_batch(c, orbits)
    em.text("wilson.csv", cocycle.wilson_to_csv(records))
    return {"orbits": len(records)}


def _livsic_pair(cfg: ExperimentConfig, sigma: float | None = None):
    hmap = _hmap(cfg)
    c0 = cocycle.random_trig_cocycle(stage_rng(cfg.seed, "cocycle"), hmap, cfg.rank)
    if cfg.mode == "exact":
        return c0, c0
    if cfg.mode == "gauge":
        return c0, cocycle.gauge(c0, cocycle.random_gauge(stage_rng(cfg.seed, "gauge"), cfg.rank))
    if cfg.mode == "perturb":
        return c0, c0.times_phase(sigma, (1, 0))
    raise ValueError(f"unknown livsic mode {cfg.mode!r}")


def run_livsic(cfg: ExperimentConfig, em: Emitter) -> dict:
    lcfg = livsic.LivsicConfig(grid=cfg.grid, tol=cfg.tol, period_max=cfg.period_max)
    sigmas = cfg.sweep if cfg.mode == "perturb" else [None]
    if cfg.mode == "perturb" and not sigmas:
        raise ValueError("perturb mode needs a sweep of sigma values")
    rows = []
    last = None
    for s in sigmas:
        c0, c = _livsic_pair(cfg, s)
        stages: dict = {}
        rep = livsic.livsic_solve(c0, c, None, lcfg, stages)
        tag = "" if s is None else f"_{s!r}"
        em.json(f"report{tag}.json", rep.to_record())
        em.binary(f"p_grid{tag}.bin", rep.grid_bytes())
        if cfg.dump_stages:
            _dump_stages(em, f"stages{tag}", stages)
        rows.append((s, rep.epsilon, rep.sup_defect, rep.trunk_mismatch))
        last = rep
    if cfg.mode == "perturb":
        tau = livsic.fit_exponent([r[1] for r in rows], [r[2] for r in rows])
        em.csv("livsic_sweep.csv", ["sigma", "epsilon", "defect", "trunk_mismatch"], rows)
        em.json("summary.json", {"tau_hat": tau})
        return {"tau_hat": tau}
    return {"sup_defect": last.sup_defect}


def _dump_stages(em: Emitter, prefix: str, stages: dict) -> None:
    good = stages.get("good_orbit")
    if good is not None:
        em.json(f"{prefix}/good_orbit.json", {
            "orbit": good.orbit.gen_id,
            "trunk_length": good.orbit.T,
            "density_radius": good.density_radius,
            "separation_radius": good.separation_radius,
        })
    conj = stages.get("near_conjugacy")
    if conj is not None:
        em.json(f"{prefix}/near_conjugacy.json", conj.to_record())
    trunk = stages.get("trunk")
    if trunk is not None:
        em.csv(
            f"{prefix}/trunk.csv",
            ["x1", "x2", "mismatch"],
            [(p[0], p[1], matalg.operator_norm(a - b)) for p, a, b in zip(trunk.points, trunk.p_minus, trunk.p_plus)],
        )
    charts = stages.get("charts")
    if charts is not None:
        em.csv(
            f"{prefix}/charts.csv",
            ["center_x1", "center_x2", "points", "borrowed", "max_seminorm"],
            [(ch.center[0], ch.center[1], len(ch.points), int(ch.borrowed), float(max(ch.seminorm_re.max(), ch.seminorm_im.max()))) for ch in charts],
        )
    ext = stages.get("blend")
    if ext is not None:
        flat = np.ascontiguousarray(ext.values.reshape(len(ext.values), -1))
        em.binary(f"{prefix}/blend_grid.bin", np.stack([flat.real, flat.imag], axis=-1).astype("<f8").tobytes())


def run_surface_sweep(cfg: ExperimentConfig, em: Emitter) -> dict:
    model = surface.FuchsianModel.regular()
    classes = surface.enumerate_geodesics(model, cfg.geodesic_length, cfg.max_word_length)
    if cfg.rank == 1:
        theta = stage_rng(cfg.seed, "connection").uniform(0, 2 * math.pi, 4)
        conn = surface.abelian_connection(theta)
    else:
        conn = surface.random_flat_connection(stage_rng(cfg.seed, "connection"), cfg.rank)
    em.text("connection.json", conn.to_json() + "\n")
    em.csv("geodesics.csv", ["word", "length"], [(g.name, g.length) for g in classes])
    rows, tau = surface.stability_sweep(conn, cfg.sweep, classes, stage_rng(cfg.seed, "sweep"))
    em.text("sweep.csv", surface.sweep_to_csv(rows))
    em.json("summary.json", {"tau_hat": tau, "classes": len(classes)})
    return {"tau_hat": tau}


RUNNERS = {
    "repstab-sweep": run_repstab_sweep,
    "orbits": run_orbits,
    "wilson": run_wilson,
    "livsic": run_livsic,
    "surface-sweep": run_surface_sweep,
}


def run(cfg: ExperimentConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    em = Emitter(cfg.out)
    manifest = {
        "config": cfg.echo(),
        "versions": {"holiv": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
    }
    em.json("manifest.json", manifest)
    start = time.perf_counter()
    status = 0
    try:
        result = RUNNERS[cfg.subcommand](cfg, em)
        em.json("result.json", result)
    except StageError as e:
        em.json("error.json", {"stage": e.stage, "error": type(e.cause).__name__, "message": str(e.cause)})
        status = 1
    except (HolivError, ValueError) as e:
        em.json("error.json", {"stage": cfg.subcommand, "error": type(e).__name__, "message": str(e)})
        status = 1
    em.json("timing.json", {"wall_seconds": time.perf_counter() - start})
    if status:
        sys.stderr.write((cfg.out / "error.json").read_text())
    return status


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holiv", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--dump-stages", action="store_true")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.subcommand, file_values, {"seed": args.seed, "out": args.out, "dump_stages": args.dump_stages, "threads": args.threads})
    except (OSError, ValueError, configparser.Error) as e:
        sys.stderr.write(json.dumps({"stage": "config", "error": type(e).__name__, "message": str(e)}, sort_keys=True) + "\n")
        return 2
    return run(cfg)
