"""Turn-level decision policies for the Imagined-We model and its baselines.

Every policy is a :class:`TurnPolicy`: a finite list of legal actions with
probabilities.  Signalers choose among walking to an item, sending one
feature, or quitting; receivers walk to an item or pass.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import NoConsistentReferent, Unreachable
from .grid_env import FEATURES, Feature
from .planning import (
    REWARD,
    Agent,
    check_beta,
    item_distances,
    log_softmax,
    normalize_log_rows,
    softmax,
)
from .pragmatics import (
    MAX_LEVEL,
    consistency_matrix,
    literal_speaker,
    receiver_travel_utility,
    rsa_listener,
    rsa_speaker,
    truthful_signals,
)


class ActionKind(enum.Enum):
    GOTO = "goto"
    SEND = "send"
    QUIT = "quit"
    PASS = "pass"


# exact-tie preference used when reading off a policy's mode
_TIE_RANK = {ActionKind.SEND: 0, ActionKind.GOTO: 1, ActionKind.QUIT: 2, ActionKind.PASS: 2}


@dataclass(frozen=True)
class TurnAction:
    kind: ActionKind
    item: Optional[int] = None
    feature: Optional[Feature] = None

    def legal_for(self, agent):
        if agent is Agent.SIGNALER:
            return self.kind in (ActionKind.GOTO, ActionKind.SEND, ActionKind.QUIT)
        return self.kind in (ActionKind.GOTO, ActionKind.PASS)

    def __str__(self):
        if self.kind is ActionKind.GOTO:
            return f"goto:{self.item}"
        if self.kind is ActionKind.SEND:
            return f"send:{self.feature.value}"
        return self.kind.value

    @classmethod
    def parse(cls, text):
        kind, _, arg = text.partition(":")
        kind = ActionKind(kind)
        if kind is ActionKind.GOTO:
            return go_to(int(arg))
        if kind is ActionKind.SEND:
            return send(Feature(arg))
        return cls(kind)


def go_to(item_id):
    return TurnAction(ActionKind.GOTO, item=int(item_id))


def send(feature):
    return TurnAction(ActionKind.SEND, feature=feature)


QUIT = TurnAction(ActionKind.QUIT)
PASS = TurnAction(ActionKind.PASS)


class TurnPolicy:
    """Probability distribution over one agent's turn actions."""

    def __init__(self, actions, probs):
        self.actions = tuple(actions)
        self.probs = np.asarray(probs, dtype=float)
        if len(self.actions) != len(self.probs):
            raise ValueError("actions and probabilities differ in length")
        self._index = {a: i for i, a in enumerate(self.actions)}

    @classmethod
    def soft_max(cls, actions, utilities, beta):
        return cls(actions, softmax(utilities, beta))

    def prob(self, action):
        i = self._index.get(action)
        return 0.0 if i is None else float(self.probs[i])

    def as_dict(self):
        return {a: float(p) for a, p in zip(self.actions, self.probs)}

    def mass(self, kind):
        return float(sum(p for a, p in zip(self.actions, self.probs) if a.kind is kind))

    def mode(self, rtol=1e-9):
        """Most probable action; exact ties prefer Send, then GoTo, then Quit/Pass."""
        top = self.probs.max()
        tied = [a for a, p in zip(self.actions, self.probs) if p >= top * (1 - rtol)]
        return min(tied, key=lambda a: _TIE_RANK[a.kind])

    def sample(self, rng):
        return self.actions[int(rng.choice(len(self.actions), p=self.probs))]

    def __repr__(self):
        body = ", ".join(f"{a}: {p:.4g}" for a, p in zip(self.actions, self.probs) if p > 0)
        return f"TurnPolicy({body})"


class Model(enum.Enum):
    IW = "IW"
    ARSA = "ARSA"
    JU = "JU"
    SELF = "SELF"

    @classmethod
    def parse(cls, text):
        for m in cls:
            if m.value.lower() == str(text).lower():
                return m
        raise ValueError(f"unknown model {text!r}")


@dataclass(frozen=True)
class ModelParams:
    model: Model = Model.IW
    beta: float = 4.0
    signaler_level: int = 1
    receiver_level: int = 1

    def __post_init__(self):
        object.__setattr__(self, "beta", check_beta(self.beta))
        if not 1 <= self.signaler_level <= MAX_LEVEL:
            raise ValueError(f"signaler_level must lie in [1, {MAX_LEVEL}]")
        if not 0 <= self.receiver_level <= MAX_LEVEL:
            raise ValueError(f"receiver_level must lie in [0, {MAX_LEVEL}]")


def _signaler_goto_utilities(trial, goal_id):
    d_s, _ = item_distances(trial)
    return REWARD * (np.arange(trial.n_items) == goal_id) - d_s


def _goto_actions(n):
    return [go_to(x) for x in range(n)]


# -- Imagined We -------------------------------------------------------------

def cooperative_log_prior(trial, beta):
    """log P(signal sent | g) under a joint-utility signaler, for every goal g.

    The three categories are doing it yourself (8 - d_s), having the partner
    do it (8 - d_r) and quitting (0).
    """
    d_s, d_r = item_distances(trial)
    return np.array([
        log_softmax([REWARD - d_s[g], REWARD - d_r[g], 0.0], beta)[1]
        for g in range(trial.n_items)
    ])


@lru_cache(maxsize=4096)
def _receiver_goal_matrix(trial, beta):
    """Row g: receiver's soft-max plan over GoTo(0..n-1), Pass given goal g."""
    u = receiver_travel_utility(trial)
    full = np.hstack([u, np.zeros((trial.n_items, 1))])
    return np.array([softmax(row, beta) for row in full]), full


def receiver_goal_policy(trial, goal_id, beta):
    probs, _ = _receiver_goal_matrix(trial, check_beta(beta))
    return TurnPolicy(_goto_actions(trial.n_items) + [PASS], probs[goal_id])


@lru_cache(maxsize=4096)
def _iw_receiver(trial, level, beta):
    """(posterior[f, g], action_dist[f, a]) for a level-``level`` IW receiver."""
    if level == 0:
        lit = np.array([literal_speaker(trial, g) for g in range(trial.n_items)]).T
        with np.errstate(divide="ignore"):
            log_lik = np.log(lit)
    else:
        _, log_send = _iw_signaler(trial, level, beta)
        log_lik = log_send.T
    log_post = log_lik + cooperative_log_prior(trial, beta)[None, :]
    posterior = normalize_log_rows(log_post)
    plans, _ = _receiver_goal_matrix(trial, beta)
    return posterior, posterior @ plans


@lru_cache(maxsize=4096)
def _iw_signaler(trial, level, beta):
    """(signal utilities[g, f], log P(Send f | g, a signal was sent)[g, f])."""
    _, actions = _iw_receiver(trial, level - 1, beta)
    _, payoff = _receiver_goal_matrix(trial, beta)
    n = trial.n_items
    su = np.full((n, len(FEATURES)), np.nan)
    log_send = np.full((n, len(FEATURES)), -np.inf)
    for g in range(n):
        sigs = truthful_signals(trial, g)
        su[g, sigs] = actions[sigs] @ payoff[g]
        # renormalising the full turn policy over sends is a soft-max over sends alone
        log_send[g, sigs] = log_softmax(su[g, sigs], beta)
    return su, log_send


def _check_signal(trial, signal):
    if not consistency_matrix(trial)[signal.index].any():
        raise NoConsistentReferent(f"no item is consistent with {signal}")


def _check_level(level, lo):
    if not lo <= level <= MAX_LEVEL:
        raise ValueError(f"level must lie in [{lo}, {MAX_LEVEL}], got {level}")


def iw_goal_posterior(trial, signal, receiver_level, beta):
    """Posterior over the joint goal after observing ``signal``.

    Likelihood: the literal speaker at level 0, otherwise the level-k IW
    signaler's choice among signals.  Prior: how likely a cooperative
    signaler would have been to ask for help at all, for each goal.
    """
    _check_level(receiver_level, 0)
    _check_signal(trial, signal)
    posterior, _ = _iw_receiver(trial, receiver_level, check_beta(beta))
    return posterior[signal.index].copy()


def iw_receiver_action_dist(trial, signal, receiver_level, beta):
    """Mixture of per-goal receiver plans weighted by the goal posterior."""
    _check_level(receiver_level, 0)
    _check_signal(trial, signal)
    _, actions = _iw_receiver(trial, receiver_level, check_beta(beta))
    return TurnPolicy(_goto_actions(trial.n_items) + [PASS], actions[signal.index])


def iw_signal_utility(trial, signal, goal_id, speaker_level, beta):
    """Expected payoff of the receiver's predicted response to ``signal``
    when ``goal_id`` is the real target."""
    _check_level(speaker_level, 1)
    if signal not in trial.items[goal_id].features:
        raise ValueError(f"{signal} is not true of item {goal_id}")
    su, _ = _iw_signaler(trial, speaker_level, check_beta(beta))
    return float(su[goal_id, signal.index])


def iw_signaler_policy(trial, goal_id, speaker_level, beta):
    _check_level(speaker_level, 1)
    beta = check_beta(beta)
    su, _ = _iw_signaler(trial, speaker_level, beta)
    sigs = truthful_signals(trial, goal_id)
    actions = [send(FEATURES[f]) for f in sigs] + _goto_actions(trial.n_items) + [QUIT]
    utilities = np.concatenate([su[goal_id, sigs], _signaler_goto_utilities(trial, goal_id), [0.0]])
    return TurnPolicy.soft_max(actions, utilities, beta)


def iw_receiver_after_walk(trial, excluded, beta):
    """Receiver's turn after the signaler walked to the wrong item ``excluded``.

    No signal arrived, so the goal belief is the cooperative prior over the
    remaining items; each goal's plan ignores the excluded item.
    """
    beta = check_beta(beta)
    keep = [x for x in range(trial.n_items) if x != excluded]
    belief = normalize_log_rows(cooperative_log_prior(trial, beta)[keep])
    _, d_r = item_distances(trial)
    actions = [go_to(x) for x in keep] + [PASS]
    mix = np.zeros(len(actions))
    for g, w in zip(keep, belief):
        u = [REWARD * (x == g) - d_r[x] for x in keep] + [0.0]
        mix += w * softmax(u, beta)
    return TurnPolicy(actions, mix)


# -- acting RSA --------------------------------------------------------------

def arsa_signal_utility(trial, signal, goal_id, speaker_level, beta):
    """Receiver-travel payoff averaged over a lower-level listener's referents."""
    _check_level(speaker_level, 1)
    if signal not in trial.items[goal_id].features:
        raise ValueError(f"{signal} is not true of item {goal_id}")
    listener = rsa_listener(speaker_level - 1, trial, signal, beta)
    return float(listener @ receiver_travel_utility(trial)[goal_id])


def arsa_signaler_policy(trial, goal_id, speaker_level, beta):
    _check_level(speaker_level, 1)
    sigs = [FEATURES[f] for f in truthful_signals(trial, goal_id)]
    su = [arsa_signal_utility(trial, f, goal_id, speaker_level, beta) for f in sigs]
    actions = [send(f) for f in sigs] + _goto_actions(trial.n_items) + [QUIT]
    utilities = np.concatenate([su, _signaler_goto_utilities(trial, goal_id), [0.0]])
    return TurnPolicy.soft_max(actions, utilities, beta)


def arsa_receiver_policy(trial, signal, receiver_level, beta):
    return TurnPolicy(_goto_actions(trial.n_items), rsa_listener(receiver_level, trial, signal, beta))


def arsa_receiver_after_walk(trial, excluded):
    keep = [x for x in range(trial.n_items) if x != excluded]
    return TurnPolicy([go_to(x) for x in keep], np.full(len(keep), 1.0 / len(keep)))


# -- joint utility -----------------------------------------------------------

def ju_responsibility(trial):
    """Item -> agent who reaches it strictly cheaper; ties stay with the signaler."""
    d_s, d_r = item_distances(trial)
    return {x: Agent.RECEIVER if d_r[x] < d_s[x] else Agent.SIGNALER
            for x in range(trial.n_items)}


def ju_signaler_policy(trial, goal_id, beta):
    d_s, d_r = item_distances(trial)
    p_do, p_sig, p_quit = softmax([REWARD - d_s[goal_id], REWARD - d_r[goal_id], 0.0], beta)
    sigs = [FEATURES[f] for f in truthful_signals(trial, goal_id)]
    actions = [go_to(goal_id)] + [send(f) for f in sigs] + [QUIT]
    probs = [p_do] + [p_sig / len(sigs)] * len(sigs) + [p_quit]
    return TurnPolicy(actions, probs)


def _ju_pick(trial, candidates, beta):
    resp = ju_responsibility(trial)
    mine = [x for x in candidates if resp[x] is Agent.RECEIVER]
    pool = mine or list(candidates)
    _, d_r = item_distances(trial)
    return TurnPolicy([go_to(x) for x in pool], softmax([REWARD - d_r[x] for x in pool], beta))


def ju_receiver_policy(trial, signal, beta):
    """Soft-max by receiver payoff over consistent items she is responsible for,
    falling back to every consistent item when she is responsible for none."""
    _check_signal(trial, signal)
    candidates = np.flatnonzero(consistency_matrix(trial)[signal.index]).tolist()
    return _ju_pick(trial, candidates, beta)


def ju_receiver_after_walk(trial, excluded, beta):
    return _ju_pick(trial, [x for x in range(trial.n_items) if x != excluded], beta)


# -- do it yourself ----------------------------------------------------------

def self_policy(trial, goal_id):
    d_s, _ = item_distances(trial)
    if not np.isfinite(d_s[goal_id]):
        raise Unreachable(f"signaler cannot reach item {goal_id}")
    return TurnPolicy([go_to(goal_id)], [1.0])


# -- dispatch ----------------------------------------------------------------

def signaler_policy(trial, goal_id, params):
    m = params.model
    if m is Model.IW:
        return iw_signaler_policy(trial, goal_id, params.signaler_level, params.beta)
    if m is Model.ARSA:
        return arsa_signaler_policy(trial, goal_id, params.signaler_level, params.beta)
    if m is Model.JU:
        return ju_signaler_policy(trial, goal_id, params.beta)
    return self_policy(trial, goal_id)


def receiver_policy(trial, signal, params):
    m = params.model
    if m is Model.IW:
        return iw_receiver_action_dist(trial, signal, params.receiver_level, params.beta)
    if m is Model.ARSA:
        return arsa_receiver_policy(trial, signal, params.receiver_level, params.beta)
    if m is Model.JU:
        return ju_receiver_policy(trial, signal, params.beta)
    raise ValueError(f"{m.value} signalers never send signals")


def receiver_after_walk(trial, excluded, params):
    m = params.model
    if m is Model.IW:
        return iw_receiver_after_walk(trial, excluded, params.beta)
    if m is Model.ARSA:
        return arsa_receiver_after_walk(trial, excluded)
    if m is Model.JU:
        return ju_receiver_after_walk(trial, excluded, params.beta)
    raise ValueError(f"{m.value} signalers never walk to a wrong item")
