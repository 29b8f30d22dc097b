"""Rollouts, communication-optimal filtering and the two simulation batteries."""

from __future__ import annotations

import csv
import enum
import io
import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .agents import (
    ActionKind,
    Model,
    ModelParams,
    TurnAction,
    receiver_after_walk,
    receiver_policy,
    signaler_policy,
)
from .errors import ConfigError, SimulationError
from .grid_env import BarrierCondition, default_grid, trial_from_seed
from .planning import REWARD, Agent, cc_solve, item_distances
from .rng import derive_seed, make_rng

log = logging.getLogger(__name__)

SIM1_MODELS = (Model.IW, Model.ARSA, Model.JU, Model.SELF)
SIM2_MODELS = (Model.IW, Model.ARSA)
LEVEL_PAIRS = tuple(itertools.product((1, 2), (0, 1, 2)))

# stream tags keep trial generation and rollouts on disjoint seed paths
_TRIAL_STREAM = 1
_ROLLOUT_STREAM = 2
_CONDITION_CODE = {BarrierCondition.RB: 0, BarrierCondition.SB: 1, BarrierCondition.CUSTOM: 2}
_MODEL_CODE = {m: i for i, m in enumerate(Model)}


class BehaviorClass(enum.Enum):
    SUCCESSFUL_COMM = "SuccessfulComm"
    UNSUCCESSFUL_COMM = "UnsuccessfulComm"
    SIGNALER_DOES = "SignalerDoes"
    SIGNALER_ERRS = "SignalerErrs"
    QUIT = "Quit"
    FAILED = "Failed"

    @property
    def reported(self):
        """Coarse class for summaries: a wrong walk still counts as doing."""
        return BehaviorClass.SIGNALER_DOES if self is BehaviorClass.SIGNALER_ERRS else self


@dataclass
class TrialRecord:
    trial_id: int
    seed: int
    n_items: int
    barrier_condition: str
    model: str
    signaler_level: int
    receiver_level: int
    signaler_action: Optional[TurnAction]
    receiver_action: Optional[TurnAction]
    achieved_utility: float
    cc_utility: float
    pct_optimal: float
    behavior: BehaviorClass
    steps_total: int
    target_id: int = -1
    error: str = field(default="", compare=False)

    @property
    def signal(self):
        a = self.signaler_action
        return a.feature.value if a is not None and a.kind is ActionKind.SEND else ""

    def sort_key(self):
        return (self.barrier_condition, self.n_items, self.trial_id,
                _MODEL_CODE[Model.parse(self.model)], self.signaler_level, self.receiver_level)


def is_comm_optimal(trial):
    """The central planner sends the receiver, and doing so pays off."""
    plan = cc_solve(trial)
    return plan.actor is Agent.RECEIVER and plan.utility > 0


def classify(record):
    s, r = record.signaler_action, record.receiver_action
    if s is None:
        return BehaviorClass.FAILED
    if s.kind is ActionKind.QUIT:
        return BehaviorClass.QUIT
    if s.kind is ActionKind.GOTO:
        return BehaviorClass.SIGNALER_DOES if s.item == record.target_id else BehaviorClass.SIGNALER_ERRS
    if r is not None and r.kind is ActionKind.GOTO and r.item == record.target_id:
        return BehaviorClass.SUCCESSFUL_COMM
    return BehaviorClass.UNSUCCESSFUL_COMM


def rollout_rng(trial, params):
    return make_rng(derive_seed(trial.seed, _ROLLOUT_STREAM, _MODEL_CODE[params.model],
                                params.signaler_level, params.receiver_level))


def rollout(trial, params, rng=None, trial_id=0):
    """Play one trial: the signaler moves, then (maybe) the receiver."""
    if rng is None:
        rng = rollout_rng(trial, params)
    cc = cc_solve(trial).utility
    rec = TrialRecord(
        trial_id=trial_id, seed=trial.seed, n_items=trial.n_items,
        barrier_condition=trial.grid.barrier_condition.value, model=params.model.value,
        signaler_level=params.signaler_level, receiver_level=params.receiver_level,
        signaler_action=None, receiver_action=None, achieved_utility=0.0,
        cc_utility=cc, pct_optimal=float("nan"), behavior=BehaviorClass.FAILED,
        steps_total=0, target_id=trial.target_id,
    )
    t = trial.target_id
    d_s, d_r = item_distances(trial)
    try:
        act = signaler_policy(trial, t, params).sample(rng)
        rec.signaler_action = act
        utility, steps = 0.0, 0
        follow_up = None
        if act.kind is ActionKind.GOTO:
            steps += int(d_s[act.item])
            utility += REWARD * (act.item == t) - d_s[act.item]
            if act.item != t:
                follow_up = receiver_after_walk(trial, act.item, params)
        elif act.kind is ActionKind.SEND:
            follow_up = receiver_policy(trial, act.feature, params)
        if follow_up is not None:
            r = follow_up.sample(rng)
            rec.receiver_action = r
            if r.kind is ActionKind.GOTO:
                steps += int(d_r[r.item])
                utility += REWARD * (r.item == t) - d_r[r.item]
    except SimulationError as exc:
        log.warning("trial %s (%s) failed: %s", trial_id, params.model.value, exc)
        rec.error = str(exc)
        return rec
    rec.achieved_utility = float(utility)
    rec.steps_total = steps
    if cc > 0:
        rec.pct_optimal = rec.achieved_utility / cc
    rec.behavior = classify(rec)
    return rec


# -- trial sets ----------------------------------------------------------------

def candidate_seed(master_seed, condition, n_items, index):
    return derive_seed(master_seed, _TRIAL_STREAM, _CONDITION_CODE[condition], n_items, index)


def comm_optimal_trials(master_seed, grid, n_items, count, filter_first=True, max_candidates=None):
    """Seeded trials that pass the communication-optimal filter.

    With ``filter_first`` the stream is scanned until ``count`` trials pass;
    otherwise ``count`` candidates are drawn and only the passing ones kept.
    Returns (trial_id, trial) pairs where trial_id is the candidate index.
    """
    cond = grid.barrier_condition
    limit = max_candidates or (count * 200 if filter_first else count)
    out = []
    for i in range(limit):
        if filter_first and len(out) >= count:
            break
        trial = trial_from_seed(candidate_seed(master_seed, cond, n_items, i), grid, n_items)
        if is_comm_optimal(trial):
            out.append((i, trial))
    if filter_first and len(out) < count:
        raise SimulationError(f"only {len(out)} communication-optimal trials in {limit} candidates")
    return out


def _run_job(job):
    trial_id, trial, params = job
    return rollout(trial, params, trial_id=trial_id)


def run_jobs(jobs, workers=1):
    """Roll out (trial_id, trial, params) jobs; output order never depends on workers."""
    jobs = list(jobs)
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [_run_job(j) for j in jobs]
    return sorted(records, key=TrialRecord.sort_key)


@dataclass
class Sim1Config:
    n_trials: int = 500
    n_items: tuple = tuple(range(2, 10))
    master_seed: int = 0
    beta: float = 4.0
    signaler_level: int = 1
    receiver_level: int = 1
    barrier: BarrierCondition = BarrierCondition.RB
    models: tuple = SIM1_MODELS
    filter_first: bool = True
    workers: int = 1

    def validate(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials", "must be at least 1")
        if not self.n_items or any(not 2 <= n <= 9 for n in self.n_items):
            raise ConfigError("n_items", "every item count must lie in [2, 9]")
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ConfigError("beta", "must be finite and non-negative")
        if not self.models:
            raise ConfigError("models", "at least one model is required")


def run_sim1(config):
    """Every model on the same communication-optimal trials, for each item count."""
    config.validate()
    grid = default_grid(config.barrier)
    jobs = []
    for n in config.n_items:
        trials = comm_optimal_trials(config.master_seed, grid, n, config.n_trials, config.filter_first)
        for model in config.models:
            params = ModelParams(model, config.beta, config.signaler_level, config.receiver_level)
            jobs.extend((tid, trial, params) for tid, trial in trials)
    return run_jobs(jobs, config.workers)


@dataclass
class Sim2Config:
    n_trials: int = 200
    n_items: int = 6
    master_seed: int = 0
    beta: float = 4.0
    conditions: tuple = (BarrierCondition.RB, BarrierCondition.SB)
    level_pairs: tuple = LEVEL_PAIRS
    models: tuple = SIM2_MODELS
    filter_first: bool = True
    workers: int = 1

    def validate(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials", "must be at least 1")
        if not 2 <= self.n_items <= 9:
            raise ConfigError("n_items", "must lie in [2, 9]")
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ConfigError("beta", "must be finite and non-negative")
        for s, r in self.level_pairs:
            if s not in (1, 2) or r not in (0, 1, 2):
                raise ConfigError("level_pairs", f"invalid pair ({s}, {r})")


def run_sim2(config):
    """IW and aRSA at every (signaler, receiver) level pair under RB and SB."""
    config.validate()
    jobs = []
    for cond in config.conditions:
        grid = default_grid(cond)
        trials = comm_optimal_trials(config.master_seed, grid, config.n_items,
                                     config.n_trials, config.filter_first)
        for model in config.models:
            for s, r in config.level_pairs:
                params = ModelParams(model, config.beta, s, r)
                jobs.extend((tid, trial, params) for tid, trial in trials)
    return run_jobs(jobs, config.workers)


def run_trials(trials, params_list, workers=1):
    """Roll out explicit trials (e.g. loaded from a file) under each parameter set."""
    jobs = [(i, t, p) for p in params_list for i, t in enumerate(trials)]
    return run_jobs(jobs, workers)


def default_workers():
    return os.cpu_count() or 1


# -- CSV -----------------------------------------------------------------------

RECORD_COLUMNS = (
    "trial_id", "seed", "n_items", "barrier", "model", "s_level", "r_level",
    "signaler_action", "signal", "receiver_action", "achieved_utility",
    "cc_utility", "pct_optimal", "behavior", "steps_total",
)


def _fmt(x):
    return repr(float(x))


def records_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow([
            r.trial_id, r.seed, r.n_items, r.barrier_condition, r.model,
            r.signaler_level, r.receiver_level,
            "" if r.signaler_action is None else str(r.signaler_action), r.signal,
            "" if r.receiver_action is None else str(r.receiver_action),
            _fmt(r.achieved_utility), _fmt(r.cc_utility), _fmt(r.pct_optimal),
            r.behavior.value, r.steps_total,
        ])
    return buf.getvalue()


def records_from_csv(text):
    """Parse a records CSV.  ``target_id`` is not stored, so classify() on
    parsed records is unavailable; the stored behavior column is used instead."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        missing = [c for c in RECORD_COLUMNS if c not in row]
        if missing:
            raise ValueError(f"records CSV lacks columns {missing}")
        out.append(TrialRecord(
            trial_id=int(row["trial_id"]), seed=int(row["seed"]), n_items=int(row["n_items"]),
            barrier_condition=row["barrier"], model=row["model"],
            signaler_level=int(row["s_level"]), receiver_level=int(row["r_level"]),
            signaler_action=TurnAction.parse(row["signaler_action"]) if row["signaler_action"] else None,
            receiver_action=TurnAction.parse(row["receiver_action"]) if row["receiver_action"] else None,
            achieved_utility=float(row["achieved_utility"]), cc_utility=float(row["cc_utility"]),
            pct_optimal=float(row["pct_optimal"]), behavior=BehaviorClass(row["behavior"]),
            steps_total=int(row["steps_total"]),
        ))
    return out


def mean_utility(records):
    return float(np.mean([r.achieved_utility for r in records]))
