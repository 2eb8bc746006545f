"""Command-line experiment runner.

Configuration is an INI file::

    [experiment]
    scenario = sinai
    ladder = 100, 1000
    replications = 2
    seed = 12345
    output = runs/sinai
    workers = 1

    [model]
    sigma = 1.0

Replication ``r`` at ladder position ``a`` draws from
``SeedSequence(seed, spawn_key=(a, r))``, so any single replication can be
re-run on its own. Statistics go to ``stats.jsonl`` (one record per
replication, in ladder-then-replication order), trajectories to one CSV per
replication and the run description to ``manifest.json``.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import configparser
import csv
from dataclasses import dataclass, field
import io
import json
import os
import sys
import time

import numpy as np

from .exceptions import ConfigError, InvalidParameterError, WindowExitError
from .harness.experiments import SCENARIOS, _offspring

__all__ = ["ExperimentConfig", "RunManifest", "RunError", "validate", "run", "main"]

MODEL_KEYS = {
    "sinai": {"sigma", "window_factor", "record"},
    "barriers": {"p", "lam", "window_factor", "record"},
    "brw_bias": {"beta", "d", "horizon", "mode", "step_var", "offspring", "record", "max_jumps"},
    "errw": {"offspring", "alpha0", "steps", "record"},
    "crt_check": {"draws", "K"},
    "brox": {"sigma", "window", "horizon", "paths"},
}


class RunError(RuntimeError):
    """A replication aborted; the message names scenario, ladder value and
    replication."""


@dataclass
class ExperimentConfig:
    scenario: str
    ladder: tuple = ()
    replications: int = 1
    seed: int = 0
    output: str = "runs"
    workers: int = 1
    model: dict = field(default_factory=dict)

    @classmethod
    def from_string(cls, text):
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse configuration: {exc}") from exc
        if "experiment" not in cp:
            raise ConfigError("missing [experiment] section")
        ex = cp["experiment"]
        try:
            ladder = tuple(int(v) for v in ex.get("ladder", "").replace(",", " ").split())
            cfg = cls(
                scenario=ex.get("scenario", "").strip(),
                ladder=ladder,
                replications=int(ex.get("replications", "1")),
                seed=int(ex.get("seed", "0")),
                output=ex.get("output", "runs").strip(),
                workers=int(ex.get("workers", "1")),
                model=dict(cp["model"]) if "model" in cp else {},
            )
        except ValueError as exc:
            raise ConfigError(f"malformed value in [experiment]: {exc}") from exc
        return cfg

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                return cls.from_string(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc

    def to_string(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp["experiment"] = {
            "scenario": self.scenario,
            "ladder": ", ".join(str(v) for v in self.ladder),
            "replications": str(self.replications),
            "seed": str(self.seed),
            "output": self.output,
            "workers": str(self.workers),
        }
        cp["model"] = {k: str(v) for k, v in sorted(self.model.items())}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def seed_for(self, ladder_pos, rep):
        return np.random.SeedSequence(self.seed, spawn_key=(ladder_pos, rep))


@dataclass
class RunManifest:
    config: str
    version: str
    seeds: list
    wall_clock: float
    outputs: list

    def to_json(self):
        return json.dumps(
            {
                "config": self.config,
                "version": self.version,
                "seeds": self.seeds,
                "wall_clock_seconds": self.wall_clock,
                "outputs": self.outputs,
            },
            indent=2,
            sort_keys=True,
        )


def _float(model, key, default):
    return float(model.get(key, default))


def validate(config):
    """List of violated invariants (empty when the configuration is usable)."""
    out = []
    if config.scenario not in SCENARIOS:
        out.append(f"unknown scenario {config.scenario!r}; choose from {sorted(SCENARIOS)}")
        return out
    if not config.ladder:
        out.append("ladder is empty")
    elif any(v <= 0 for v in config.ladder) or any(b <= a for a, b in zip(config.ladder, config.ladder[1:])):
        out.append("ladder values must be positive and strictly increasing")
    if config.replications < 1:
        out.append("replications must be at least 1")
    if config.workers < 1:
        out.append("workers must be at least 1")
    if config.seed < 0:
        out.append("seed must be nonnegative")
    extra = set(config.model) - MODEL_KEYS[config.scenario]
    if extra:
        out.append(f"unknown model keys for {config.scenario}: {sorted(extra)}")
    m = config.model
    try:
        if config.scenario in ("sinai", "brox") and _float(m, "sigma", 1.0) < 0:
            out.append("sigma must be nonnegative")
        if config.scenario == "barriers":
            p = _float(m, "p", 0.7)
            lam = _float(m, "lam", 1.0)
            if not 0 < p < 1:
                out.append("p must lie in (0, 1)")
            if lam <= 0:
                out.append("lam must be positive")
            elif config.ladder and lam > min(config.ladder):
                out.append("lam / n must not exceed 1 (need n >= lam)")
        if config.scenario == "brw_bias":
            if _float(m, "beta", 2.0) < 1:
                out.append("beta must be >= 1")
            if int(m.get("d", 1)) < 1:
                out.append("d must be at least 1")
            if m.get("mode", "max") not in ("max", "sum"):
                out.append("mode must be 'max' or 'sum'")
        if config.scenario in ("brw_bias", "errw"):
            try:
                dist = _offspring(m)
                if not dist.is_critical():
                    out.append(f"offspring law is not critical (mean {dist.mean!r})")
            except InvalidParameterError as exc:
                out.append(f"offspring law invalid: {exc}")
        if config.scenario == "errw":
            rule = m.get("alpha0", "sqrt")
            if rule != "sqrt" and float(rule) <= 0:
                out.append("alpha0 must be 'sqrt' or a positive number")
        if config.scenario == "crt_check":
            if config.ladder and min(config.ladder) < 2:
                out.append("excursion grid size must be at least 2")
            if int(m.get("draws", 1000)) < 1:
                out.append("draws must be positive")
        if config.scenario == "brox" and _float(m, "window", 10.0) <= 0:
            out.append("window must be positive")
    except ValueError as exc:
        out.append(f"malformed model value: {exc}")
    return out


def _version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


def _task(args):
    scenario, model, value, pos, rep, seed = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(pos, rep)))
    try:
        stats, traj = SCENARIOS[scenario](model, value, rng)
    except WindowExitError as exc:
        raise RunError(
            f"{scenario}: ladder value {value}, replication {rep}: {exc} "
            f"(position {exc.position}, window {exc.window})"
        ) from None
    return pos, rep, stats, traj


def _traj_csv(cols, data):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in data:
        w.writerow([repr(float(x)) if not float(x).is_integer() else str(int(x)) for x in row])
    return buf.getvalue()


def run(config, *, seed=None, workers=None, out=None):
    """Execute a configuration; returns the :class:`RunManifest`."""
    if seed is not None:
        config.seed = int(seed)
    if workers is not None:
        config.workers = int(workers)
    if out is not None:
        config.output = str(out)
    problems = validate(config)
    if problems:
        raise ConfigError("; ".join(problems))
    try:
        os.makedirs(config.output, exist_ok=True)
        probe = os.path.join(config.output, ".write_test")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"output directory {config.output!r} is not writable: {exc}") from exc

    tasks = [
        (config.scenario, dict(config.model), v, a, r, config.seed)
        for a, v in enumerate(config.ladder)
        for r in range(config.replications)
    ]
    start = time.perf_counter()
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    elapsed = time.perf_counter() - start

    outputs = []
    stats_path = os.path.join(config.output, "stats.jsonl")
    with open(stats_path, "w") as fh:
        for pos, rep, stats, _ in results:
            rec = {"experiment": config.scenario, "ladder_value": config.ladder[pos], "rep": rep, **stats}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    outputs.append("stats.jsonl")
    for pos, rep, _, traj in results:
        if traj is None:
            continue
        name = f"traj_{config.scenario}_{config.ladder[pos]}_r{rep}.csv"
        with open(os.path.join(config.output, name), "w") as fh:
            fh.write(_traj_csv(*traj))
        outputs.append(name)
    seeds = [
        {"ladder_value": config.ladder[a], "rep": r, "entropy": config.seed, "spawn_key": [a, r]}
        for a in range(len(config.ladder))
        for r in range(config.replications)
    ]
    manifest = RunManifest(config.to_string(), _version(), seeds, elapsed, outputs + ["manifest.json"])
    with open(os.path.join(config.output, "manifest.json"), "w") as fh:
        fh.write(manifest.to_json() + "\n")
    return manifest


def _parser():
    p = argparse.ArgumentParser(prog="rwre", description="Random walks in random environments: experiment runner")
    sub = p.add_subparsers(dest="command", required=True)
    for name in sorted(SCENARIOS):
        s = sub.add_parser(name, help=f"run the {name} scenario")
        s.add_argument("--config", help="INI configuration file")
        s.add_argument("--seed", type=int, help="override the master seed")
        s.add_argument("--workers", type=int, help="worker processes")
        s.add_argument("--out", help="output directory")
        s.add_argument("--ladder", help="comma-separated ladder override")
        s.add_argument("--replications", type=int, help="replication count override")
    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("--config", required=True)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = ExperimentConfig.from_file(args.config)
            problems = validate(cfg)
            for line in problems:
                print(line)
            if not problems:
                print("ok")
            return 1 if problems else 0
        if args.config:
            cfg = ExperimentConfig.from_file(args.config)
            if cfg.scenario and cfg.scenario != args.command:
                raise ConfigError(f"config is for scenario {cfg.scenario!r}, not {args.command!r}")
            cfg.scenario = args.command
        else:
            cfg = ExperimentConfig(args.command)
        if args.ladder:
            cfg.ladder = tuple(int(v) for v in args.ladder.replace(",", " ").split())
        if args.replications is not None:
            cfg.replications = args.replications
        manifest = run(cfg, seed=args.seed, workers=args.workers, out=args.out)
        print(f"wrote {len(manifest.outputs)} files to {cfg.output}")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RunError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
