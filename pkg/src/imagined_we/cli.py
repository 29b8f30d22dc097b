"""Command line entry point: trial generation, rollouts, simulations, reports.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .agents import Model, ModelParams
from .analysis import GROUP_FIELDS, compare_rb_sb, comparisons_to_csv, summarize, summary_to_csv
from .errors import ConfigError
from .experiments import (
    LEVEL_PAIRS,
    SIM1_MODELS,
    SIM2_MODELS,
    Sim1Config,
    Sim2Config,
    comm_optimal_trials,
    default_workers,
    records_from_csv,
    records_to_csv,
    run_sim1,
    run_sim2,
    run_trials,
)
from .grid_env import BarrierCondition, default_grid, dump_trials, load_trials

log = logging.getLogger(__name__)

COMMANDS = ("gen-trials", "run", "sim1", "sim2", "report")

_DEFAULT_N = {"gen-trials": 100, "run": 100, "sim1": 500, "sim2": 200, "report": 1}
_DEFAULT_ITEMS = {"sim1": "2-9"}
_DEFAULT_GROUPING = {
    "sim2": ("barrier", "model", "s_level", "r_level"),
}


@dataclass
class RunConfig:
    command: str
    master_seed: int = 0
    beta: float = 4.0
    s_level: int = 1
    r_level: int = 1
    n_items: tuple = (6,)
    barrier: str = "RB"
    trial_count: int = 100
    models: tuple = ()
    trials: Optional[str] = None
    records: Optional[str] = None
    out: str = "out"
    workers: int = field(default_factory=default_workers)
    group_by: tuple = ("n_items", "model")
    filter_first: bool = True


# config-file key -> RunConfig field
_FILE_KEYS = {
    "seed": "master_seed", "beta": "beta", "s_level": "s_level", "r_level": "r_level",
    "n_items": "n_items", "barrier": "barrier", "n": "trial_count", "models": "models",
    "trials": "trials", "records": "records", "out": "out", "workers": "workers",
    "group_by": "group_by", "filter_first": "filter_first",
}


def parse_items(value):
    """'6' -> (6,), '2-9' -> (2, ..., 9), '3,5' -> (3, 5)."""
    if isinstance(value, int):
        return (value,)
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    text = str(value).strip()
    try:
        if "-" in text:
            lo, hi = (int(p) for p in text.split("-", 1))
            return tuple(range(lo, hi + 1))
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ConfigError("n_items", f"cannot parse {value!r}") from None


def _split(value):
    if isinstance(value, (list, tuple)):
        return tuple(str(v) for v in value)
    return tuple(p.strip() for p in str(value).split(",") if p.strip())


def build_parser():
    parser = argparse.ArgumentParser(prog="imagined-we", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file of settings; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--beta", type=float)
        p.add_argument("--n", type=int, help="trial count (per item count / per cell)")
        p.add_argument("--n-items", dest="n_items", help="e.g. 6, 2-9 or 3,5,7")
        p.add_argument("--barrier", type=str.upper, choices=("RB", "SB"))
        p.add_argument("--models", help="comma list of IW,ARSA,JU,SELF")
        p.add_argument("--s-level", dest="s_level", type=int)
        p.add_argument("--r-level", dest="r_level", type=int)
        p.add_argument("--trials", help="trial JSON file to read")
        p.add_argument("--records", help="records CSV to summarise (report)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int)
        p.add_argument("--group-by", dest="group_by", help="comma list of " + ",".join(GROUP_FIELDS))
        p.add_argument("--post-filter", dest="filter_first", action="store_const", const=False,
                       help="draw N candidates and keep the communication-optimal ones")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def parse_config(argv, file_values=None):
    """Merge defaults, an optional settings file and command-line flags."""
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            file_values = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", str(exc)) from None
    for key, val in (file_values or {}).items():
        if key not in _FILE_KEYS:
            raise ConfigError(key, "unknown setting")
        values[_FILE_KEYS[key]] = val
    for key, target in _FILE_KEYS.items():
        val = getattr(args, key, None)
        if val is not None:
            values[target] = val

    cmd = args.command
    cfg = RunConfig(command=cmd)
    cfg.trial_count = _DEFAULT_N[cmd]
    cfg.n_items = parse_items(_DEFAULT_ITEMS.get(cmd, 6))
    cfg.group_by = _DEFAULT_GROUPING.get(cmd, cfg.group_by)
    cfg.models = tuple(m.value for m in (SIM2_MODELS if cmd == "sim2" else SIM1_MODELS))
    for name, val in values.items():
        setattr(cfg, name, val)
    return _validate(cfg)


def _validate(cfg):
    try:
        cfg.master_seed = int(cfg.master_seed)
    except (TypeError, ValueError):
        raise ConfigError("seed", "must be an integer") from None
    if cfg.master_seed < 0:
        raise ConfigError("seed", "must be non-negative")
    cfg.beta = float(cfg.beta)
    if not cfg.beta >= 0 or cfg.beta == float("inf"):
        raise ConfigError("beta", f"must be finite and non-negative, got {cfg.beta}")
    cfg.trial_count = int(cfg.trial_count)
    if cfg.trial_count < 1:
        raise ConfigError("n", "trial count must be at least 1")
    cfg.n_items = parse_items(cfg.n_items)
    if not cfg.n_items or any(not 2 <= n <= 9 for n in cfg.n_items):
        raise ConfigError("n_items", "item counts must lie in [2, 9]")
    if cfg.command in ("gen-trials", "run", "sim2") and len(cfg.n_items) != 1:
        raise ConfigError("n_items", f"{cfg.command} takes a single item count")
    try:
        cfg.barrier = BarrierCondition.parse(cfg.barrier).value
    except ValueError as exc:
        raise ConfigError("barrier", str(exc)) from None
    try:
        cfg.models = tuple(Model.parse(m).value for m in _split(cfg.models))
    except ValueError as exc:
        raise ConfigError("models", str(exc)) from None
    if not cfg.models:
        raise ConfigError("models", "at least one model is required")
    if cfg.s_level not in (1, 2):
        raise ConfigError("s_level", "must be 1 or 2")
    if cfg.r_level not in (0, 1, 2):
        raise ConfigError("r_level", "must be 0, 1 or 2")
    cfg.workers = int(cfg.workers)
    if cfg.workers < 1:
        raise ConfigError("workers", "must be at least 1")
    cfg.group_by = _split(cfg.group_by)
    bad = [g for g in cfg.group_by if g not in GROUP_FIELDS]
    if bad:
        raise ConfigError("group_by", f"unknown grouping keys {bad}")
    if cfg.command == "report" and not cfg.records:
        raise ConfigError("records", "report needs --records")
    for name in ("trials", "records"):
        path = getattr(cfg, name)
        if path is not None and not Path(path).is_file():
            raise ConfigError(name, f"no such file: {path}")
    out = Path(cfg.out)
    if out.exists() and not out.is_dir():
        raise ConfigError("out", f"{out} exists and is not a directory")
    probe = out if out.exists() else next((p for p in out.parents if p.exists()), Path("."))
    if not os.access(probe, os.W_OK):
        raise ConfigError("out", f"{probe} is not writable")
    return cfg


# -- execution -------------------------------------------------------------------

def git_blob_hash(data):
    """Content hash computed the way git hashes a blob."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(text.encode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _generate_trials(cfg):
    grid = default_grid(cfg.barrier)
    pairs = comm_optimal_trials(cfg.master_seed, grid, cfg.n_items[0], cfg.trial_count, cfg.filter_first)
    return [t for _, t in pairs]


def execute(cfg):
    """Run one command and write its files; returns {filename: text}."""
    outputs = {}
    models = [Model.parse(m) for m in cfg.models]
    if cfg.command == "gen-trials":
        outputs["trials.json"] = dump_trials(_generate_trials(cfg))
    elif cfg.command == "run":
        trials = load_trials(Path(cfg.trials).read_text()) if cfg.trials else _generate_trials(cfg)
        params = [ModelParams(m, cfg.beta, cfg.s_level, cfg.r_level) for m in models]
        records = run_trials(trials, params, cfg.workers)
        outputs["records.csv"] = records_to_csv(records)
        outputs["summary.csv"] = summary_to_csv(summarize(records, cfg.group_by, seed=cfg.master_seed))
    elif cfg.command == "sim1":
        records = run_sim1(Sim1Config(
            n_trials=cfg.trial_count, n_items=cfg.n_items, master_seed=cfg.master_seed,
            beta=cfg.beta, signaler_level=cfg.s_level, receiver_level=cfg.r_level,
            barrier=BarrierCondition.parse(cfg.barrier), models=tuple(models),
            filter_first=cfg.filter_first, workers=cfg.workers))
        outputs["records.csv"] = records_to_csv(records)
        outputs["summary.csv"] = summary_to_csv(summarize(records, cfg.group_by, seed=cfg.master_seed))
    elif cfg.command == "sim2":
        records = run_sim2(Sim2Config(
            n_trials=cfg.trial_count, n_items=cfg.n_items[0], master_seed=cfg.master_seed,
            beta=cfg.beta, level_pairs=LEVEL_PAIRS, models=tuple(models),
            filter_first=cfg.filter_first, workers=cfg.workers))
        outputs["records.csv"] = records_to_csv(records)
        outputs["summary.csv"] = summary_to_csv(summarize(records, cfg.group_by, seed=cfg.master_seed))
        outputs["comparisons.csv"] = comparisons_to_csv(compare_rb_sb(records, seed=cfg.master_seed))
    elif cfg.command == "report":
        records = records_from_csv(Path(cfg.records).read_text())
        outputs["summary.csv"] = summary_to_csv(summarize(records, cfg.group_by, seed=cfg.master_seed))
        if {r.barrier_condition for r in records} >= {"RB", "SB"}:
            outputs["comparisons.csv"] = comparisons_to_csv(compare_rb_sb(records, seed=cfg.master_seed))

    out = Path(cfg.out)
    for name, text in outputs.items():
        atomic_write(out / name, text)
    config_echo = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()}
    manifest = {
        "version": __version__,
        "config": config_echo,
        "outputs": {name: git_blob_hash(text.encode()) for name, text in sorted(outputs.items())},
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return outputs


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"imagined-we: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        outputs = execute(cfg)
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        log.debug("execution failed", exc_info=True)
        print(f"imagined-we: {cfg.command} failed: {exc}", file=sys.stderr)
        return 1
    for name in sorted(outputs):
        print(Path(cfg.out) / name)
    return 0

