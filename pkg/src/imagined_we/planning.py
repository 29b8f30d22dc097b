"""Path costs, action utilities, the central-control oracle and soft-max choice."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BadOrigin, EmptyChoiceSet, Unreachable
from .grid_env import MOVES, Cell

REWARD = 8.0
STEP_COST = 1.0
UNREACHABLE = -1


class Agent(enum.Enum):
    SIGNALER = "Signaler"
    RECEIVER = "Receiver"


@dataclass(frozen=True)
class PathCostTable:
    origin: Cell
    cost: np.ndarray  # (height, width) int array, UNREACHABLE where no path

    def __getitem__(self, cell):
        return int(self.cost[cell[0], cell[1]])

    def reachable(self, cell):
        return self.cost[cell[0], cell[1]] != UNREACHABLE


@lru_cache(maxsize=512)
def path_costs(grid, origin):
    """Breadth-first 4-connected step counts from ``origin`` around the barrier."""
    origin = Cell(*origin)
    if not grid.passable(origin):
        raise BadOrigin(f"origin {tuple(origin)} is out of bounds or a barrier cell")
    cost = np.full((grid.height, grid.width), UNREACHABLE, dtype=np.int64)
    cost[origin] = 0
    queue = deque([origin])
    while queue:
        cur = queue.popleft()
        for nxt in grid.neighbors(cur):
            if cost[nxt] == UNREACHABLE:
                cost[nxt] = cost[cur] + 1
                queue.append(nxt)
    cost.setflags(write=False)
    return PathCostTable(origin, cost)


def start_of(grid, actor):
    return grid.signaler_start if actor is Agent.SIGNALER else grid.receiver_start


def steps_to(trial, actor, item_id):
    table = path_costs(trial.grid, start_of(trial.grid, actor))
    cell = trial.items[item_id].cell
    if not table.reachable(cell):
        raise Unreachable(f"{actor.value} cannot reach item {item_id}")
    return table[cell]


def action_utility(trial, actor, item_id, goal_id):
    """Shared payoff of ``actor`` walking to ``item_id`` when ``goal_id`` is the target."""
    return REWARD * (item_id == goal_id) - STEP_COST * steps_to(trial, actor, item_id)


@lru_cache(maxsize=4096)
def item_distances(trial):
    """(signaler, receiver) step counts to every item as float arrays; NaN if unreachable."""
    out = []
    for actor in (Agent.SIGNALER, Agent.RECEIVER):
        table = path_costs(trial.grid, start_of(trial.grid, actor))
        d = np.array([table[it.cell] for it in trial.items], dtype=float)
        d[d == UNREACHABLE] = np.nan
        d.setflags(write=False)
        out.append(d)
    return tuple(out)


# -- central control ------------------------------------------------------------

@dataclass(frozen=True)
class CCPlan:
    actor: Agent
    item_id: int
    utility: float


@lru_cache(maxsize=1024)
def joint_values(grid, target):
    """Value iteration over joint (signaler cell, receiver cell) states.

    Each step one agent moves one cell (the concatenation of both agents'
    move sets) at cost 1; a state with either agent on ``target`` is terminal
    and pays the reward.  Iterates until no value changes; discount is 1.
    Returns V with shape (H, W, H, W), -inf where the state is hopeless.
    """
    H, W = grid.height, grid.width
    blocked = np.zeros((H, W), dtype=bool)
    for c in grid.barrier:
        blocked[c] = True
    terminal = np.zeros((H, W, H, W), dtype=bool)
    terminal[target[0], target[1], :, :] = True
    terminal[:, :, target[0], target[1]] = True
    invalid = blocked[:, :, None, None] | blocked[None, None, :, :]

    V = np.full((H, W, H, W), -np.inf)
    V[terminal] = REWARD
    V[invalid] = -np.inf
    for _ in range(2 * H * W + 1):
        best = np.full_like(V, -np.inf)
        for axis in range(4):
            for shift in (1, -1):
                moved = _shift(V, axis, shift)
                np.maximum(best, moved, out=best)
        new = np.where(terminal, REWARD, best - STEP_COST)
        new[invalid] = -np.inf
        if np.array_equal(new, V):
            break
        V = new
    V.setflags(write=False)
    return V


def _shift(V, axis, shift):
    """Value of the neighbour one cell away along ``axis``; -inf off the grid."""
    out = np.full_like(V, -np.inf)
    src = [slice(None)] * 4
    dst = [slice(None)] * 4
    if shift == 1:
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
    else:
        src[axis], dst[axis] = slice(None, -1), slice(1, None)
    out[tuple(dst)] = V[tuple(src)]
    return out


def cc_solve(trial):
    """Best joint plan with full knowledge of the target; ties go to the signaler."""
    grid = trial.grid
    target = trial.target.cell
    V = joint_values(grid, target)
    s, r = grid.signaler_start, grid.receiver_start
    if not np.isfinite(V[s + r]):
        raise Unreachable("neither agent can reach the target")

    def q(actor):
        # an agent already standing on the target cannot happen: items avoid starts
        best = -np.inf
        for dr, dc in MOVES:
            if actor is Agent.SIGNALER:
                nxt, state = Cell(s.row + dr, s.col + dc), None
                if grid.passable(nxt):
                    state = nxt + r
            else:
                nxt, state = Cell(r.row + dr, r.col + dc), None
                if grid.passable(nxt):
                    state = s + nxt
            if state is not None:
                best = max(best, V[state] - STEP_COST)
        return best

    q_s, q_r = q(Agent.SIGNALER), q(Agent.RECEIVER)
    actor = Agent.SIGNALER if q_s >= q_r else Agent.RECEIVER
    return CCPlan(actor, trial.target_id, float(max(q_s, q_r)))


def cc_closed_form(trial):
    """max over agents of reward minus shortest-path distance to the target."""
    d_s, d_r = item_distances(trial)
    t = trial.target_id
    u_s = REWARD - d_s[t] if np.isfinite(d_s[t]) else -np.inf
    u_r = REWARD - d_r[t] if np.isfinite(d_r[t]) else -np.inf
    if not (np.isfinite(u_s) or np.isfinite(u_r)):
        raise Unreachable("neither agent can reach the target")
    actor = Agent.SIGNALER if u_s >= u_r else Agent.RECEIVER
    return CCPlan(actor, t, float(max(u_s, u_r)))


# -- soft-max -------------------------------------------------------------------

def check_beta(beta):
    beta = float(beta)
    if not math.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be finite and non-negative, got {beta}")
    return beta


def log_softmax(utilities, beta):
    u = np.asarray(utilities, dtype=float)
    if u.size == 0:
        raise EmptyChoiceSet("soft-max over an empty choice set")
    if not np.all(np.isfinite(u)):
        raise ValueError("utilities must be finite")
    z = check_beta(beta) * (u - u.max())
    return z - np.log(np.exp(z).sum())


def softmax(utilities, beta):
    """p_i proportional to exp(beta * u_i), shifted by the max for stability."""
    return np.exp(log_softmax(utilities, beta))


def normalize_log_rows(logm):
    """Exponentiate and normalise each row of log-weights.

    Rows that are entirely -inf come back as NaN.
    """
    logm = np.asarray(logm, dtype=float)
    top = logm.max(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        w = np.exp(logm - np.where(np.isfinite(top), top, 0.0))
        totals = w.sum(axis=-1, keepdims=True)
        return np.where(totals > 0, w / np.where(totals > 0, totals, 1.0), np.nan)
