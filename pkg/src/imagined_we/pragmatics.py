"""Signal semantics and the literal/pragmatic speaker-listener ladder.

Signal distributions are arrays indexed like ``FEATURES``; referent
distributions are arrays indexed by item id.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import NoConsistentReferent
from .grid_env import FEATURES
from .planning import REWARD, check_beta, item_distances, log_softmax, normalize_log_rows

MAX_LEVEL = 2


def true_features(item):
    return item.features


def consistent(signal, item):
    return signal in item.features


@lru_cache(maxsize=4096)
def consistency_matrix(trial):
    """Boolean (n_features, n_items) truth table of feature f describing item x."""
    m = np.array([[f in it.features for it in trial.items] for f in FEATURES])
    m.setflags(write=False)
    return m


@lru_cache(maxsize=4096)
def receiver_travel_utility(trial):
    """U[g, x]: payoff of the receiver walking to item x when g is the target."""
    _, d_r = item_distances(trial)
    u = REWARD * np.eye(trial.n_items) - d_r[None, :]
    u.setflags(write=False)
    return u


def truthful_signals(trial, goal_id):
    return [f.index for f in FEATURES if f in trial.items[goal_id].features]


def literal_speaker(trial, goal_id):
    """Uniform over the goal item's two true features."""
    p = np.zeros(len(FEATURES))
    p[truthful_signals(trial, goal_id)] = 0.5
    return p


@lru_cache(maxsize=4096)
def _ladder(trial, level, beta):
    """(listener[f, x], log speaker[g, f]) at ``level``; no speaker at level 0.

    Listener rows for signals that describe no item are NaN.
    """
    if level == 0:
        lit = np.array([literal_speaker(trial, g) for g in range(trial.n_items)])
        with np.errstate(divide="ignore"):
            return normalize_log_rows(np.log(lit.T)), None
    prev_listener, _ = _ladder(trial, level - 1, beta)
    utility = receiver_travel_utility(trial)
    log_speaker = np.full((trial.n_items, len(FEATURES)), -np.inf)
    for g in range(trial.n_items):
        sigs = truthful_signals(trial, g)
        # a truthful signal always describes at least the goal, so rows are finite
        eu = [prev_listener[f] @ utility[g] for f in sigs]
        log_speaker[g, sigs] = log_softmax(eu, beta)
    return normalize_log_rows(log_speaker.T), log_speaker


def _check_level(level, lo):
    if not lo <= level <= MAX_LEVEL:
        raise ValueError(f"level must lie in [{lo}, {MAX_LEVEL}], got {level}")


def rsa_listener(level, trial, signal, beta):
    """Referent posterior of a level-``level`` listener under a uniform prior."""
    _check_level(level, 0)
    listener, _ = _ladder(trial, level, check_beta(beta))
    row = listener[signal.index]
    if np.isnan(row).any():
        raise NoConsistentReferent(f"no item is consistent with {signal}")
    return row.copy()


def rsa_speaker(level, trial, goal_id, beta):
    """Signal choice of a pragmatic speaker who knows the goal.

    Soft-max over the goal's truthful features of the receiver's expected
    travel payoff when she interprets the signal one level down.
    """
    _check_level(level, 1)
    _, log_speaker = _ladder(trial, level, check_beta(beta))
    return np.exp(log_speaker[goal_id])

