"""Gridworld arena, feature-typed items and seeded trial generation."""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import BadArity, InsufficientSpace, InvalidGrid, InvalidTrial


class Dimension(enum.Enum):
    SHAPE = "shape"
    COLOR = "color"


class Feature(enum.Enum):
    """One value of one item dimension.  Also the whole signal vocabulary."""

    CIRCLE = "circle"
    TRIANGLE = "triangle"
    SQUARE = "square"
    RED = "red"
    GREEN = "green"
    PURPLE = "purple"

    @property
    def dimension(self):
        return Dimension.SHAPE if self in SHAPES else Dimension.COLOR

    @property
    def index(self):
        return FEATURES.index(self)

    def __str__(self):
        return self.value


FEATURES = tuple(Feature)
SHAPES = (Feature.CIRCLE, Feature.TRIANGLE, Feature.SQUARE)
COLORS = (Feature.RED, Feature.GREEN, Feature.PURPLE)
# (shape, color) pairs in a fixed order; sampling indexes into this list
FEATURE_PAIRS = tuple((s, c) for s in SHAPES for c in COLORS)


class BarrierCondition(enum.Enum):
    RB = "RB"
    SB = "SB"
    CUSTOM = "Custom"

    @classmethod
    def parse(cls, text):
        for member in cls:
            if member.value.lower() == str(text).lower():
                return member
        raise ValueError(f"unknown barrier condition {text!r}")


class Cell(NamedTuple):
    row: int
    col: int


MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    barrier: frozenset = field(default_factory=frozenset)
    signaler_start: Cell = Cell(0, 0)
    receiver_start: Cell = Cell(0, 1)
    barrier_condition: BarrierCondition = BarrierCondition.CUSTOM

    def __post_init__(self):
        object.__setattr__(self, "barrier", frozenset(Cell(*c) for c in self.barrier))
        object.__setattr__(self, "signaler_start", Cell(*self.signaler_start))
        object.__setattr__(self, "receiver_start", Cell(*self.receiver_start))
        if self.width < 2 or self.height < 2:
            raise InvalidGrid(f"grid must be at least 2x2, got {self.width}x{self.height}")
        for c in self.barrier:
            if not self.in_bounds(c):
                raise InvalidGrid(f"barrier cell {tuple(c)} out of bounds")
        for name in ("signaler_start", "receiver_start"):
            c = getattr(self, name)
            if not self.in_bounds(c):
                raise InvalidGrid(f"{name} {tuple(c)} out of bounds")
            if c in self.barrier:
                raise InvalidGrid(f"{name} {tuple(c)} is a barrier cell")
        if self.signaler_start == self.receiver_start:
            raise InvalidGrid("agents must start in different cells")
        self._check_connected()

    def in_bounds(self, cell):
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def passable(self, cell):
        return self.in_bounds(cell) and cell not in self.barrier

    def neighbors(self, cell):
        for dr, dc in MOVES:
            nxt = Cell(cell[0] + dr, cell[1] + dc)
            if self.passable(nxt):
                yield nxt

    def open_cells(self):
        return [Cell(r, c) for r in range(self.height) for c in range(self.width)
                if Cell(r, c) not in self.barrier]

    def free_cells(self):
        """Cells an item may occupy: not barrier, not a start cell."""
        starts = {self.signaler_start, self.receiver_start}
        return [c for c in self.open_cells() if c not in starts]

    def _check_connected(self):
        seen = {self.signaler_start}
        queue = deque([self.signaler_start])
        while queue:
            cur = queue.popleft()
            for nxt in self.neighbors(cur):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        # one flood fill suffices: reachability is symmetric on 4-connected grids
        if len(seen) != len(self.open_cells()):
            raise InvalidGrid("some open cells are unreachable from the start cells")


RB_BARRIER = (Cell(2, 3), Cell(2, 4), Cell(2, 5), Cell(2, 6))
SB_SHIFT = 3


def default_grid(condition=BarrierCondition.RB):
    """The canonical 10x10 arena with a four-cell barrier in front of the receiver.

    The SB variant moves the same barrier three rows toward the signaler.
    """
    if isinstance(condition, str):
        condition = BarrierCondition.parse(condition)
    if condition is BarrierCondition.RB:
        barrier = RB_BARRIER
    elif condition is BarrierCondition.SB:
        barrier = tuple(Cell(r + SB_SHIFT, c) for r, c in RB_BARRIER)
    else:
        raise InvalidGrid("default_grid only knows the RB and SB layouts")
    return GridSpec(
        width=10,
        height=10,
        barrier=frozenset(barrier),
        signaler_start=Cell(9, 4),
        receiver_start=Cell(0, 4),
        barrier_condition=condition,
    )


@dataclass(frozen=True)
class Item:
    id: int
    cell: Cell
    shape: Feature
    color: Feature

    def __post_init__(self):
        object.__setattr__(self, "cell", Cell(*self.cell))
        if self.shape not in SHAPES:
            raise InvalidTrial(f"{self.shape} is not a shape")
        if self.color not in COLORS:
            raise InvalidTrial(f"{self.color} is not a color")

    @property
    def features(self):
        return frozenset((self.shape, self.color))

    def __str__(self):
        return f"{self.color.value} {self.shape.value}@({self.cell.row},{self.cell.col})"


@dataclass(frozen=True)
class Trial:
    grid: GridSpec
    items: tuple
    target_id: int
    seed: int = 0

    def __post_init__(self):
        items = tuple(self.items)
        object.__setattr__(self, "items", items)
        if not 2 <= len(items) <= 9:
            raise InvalidTrial(f"trials hold 2..9 items, got {len(items)}")
        for i, item in enumerate(items):
            if item.id != i:
                raise InvalidTrial("item ids must equal their position")
            if item.cell in self.grid.barrier or not self.grid.in_bounds(item.cell):
                raise InvalidTrial(f"item {i} is not on an open cell")
            if item.cell in (self.grid.signaler_start, self.grid.receiver_start):
                raise InvalidTrial(f"item {i} sits on a start cell")
        if len({it.cell for it in items}) != len(items):
            raise InvalidTrial("item cells must be distinct")
        if len({(it.shape, it.color) for it in items}) != len(items):
            raise InvalidTrial("item feature pairs must be distinct")
        if not 0 <= self.target_id < len(items):
            raise InvalidTrial(f"target_id {self.target_id} out of range")

    @property
    def n_items(self):
        return len(self.items)

    @property
    def target(self):
        return self.items[self.target_id]


def sample_trial(rng, grid, n_items, seed=0):
    """Draw distinct feature pairs, distinct free cells and a uniform target.

    ``seed`` is only recorded on the trial; all randomness comes from ``rng``.
    """
    if not 2 <= n_items <= 9:
        raise BadArity(f"n_items must lie in [2, 9], got {n_items}")
    free = grid.free_cells()
    if len(free) < n_items:
        raise InsufficientSpace(f"{len(free)} free cells cannot hold {n_items} items")
    pair_idx = rng.choice(len(FEATURE_PAIRS), size=n_items, replace=False)
    cell_idx = rng.choice(len(free), size=n_items, replace=False)
    target = int(rng.integers(n_items))
    items = tuple(
        Item(i, free[int(c)], *FEATURE_PAIRS[int(p)])
        for i, (p, c) in enumerate(zip(pair_idx, cell_idx))
    )
    return Trial(grid, items, target, int(seed))


def trial_from_seed(seed, grid, n_items):
    from .rng import make_rng

    return sample_trial(make_rng(seed), grid, n_items, seed=seed)


def is_overloaded(trial):
    """True when every truthful signal about the target also fits another item."""
    target = trial.target
    others = [it for it in trial.items if it.id != target.id]
    return all(any(f in it.features for it in others) for f in target.features)


# -- JSON ---------------------------------------------------------------------

def grid_to_dict(grid):
    return {
        "width": grid.width,
        "height": grid.height,
        "barrier": sorted([list(c) for c in grid.barrier]),
        "signaler_start": list(grid.signaler_start),
        "receiver_start": list(grid.receiver_start),
        "barrier_condition": grid.barrier_condition.value,
    }


def grid_from_dict(d):
    return GridSpec(
        width=int(d["width"]),
        height=int(d["height"]),
        barrier=frozenset(Cell(*c) for c in d["barrier"]),
        signaler_start=Cell(*d["signaler_start"]),
        receiver_start=Cell(*d["receiver_start"]),
        barrier_condition=BarrierCondition.parse(d.get("barrier_condition", "Custom")),
    )


def trial_to_dict(trial):
    return {
        **grid_to_dict(trial.grid),
        "items": [
            {"id": it.id, "row": it.cell.row, "col": it.cell.col,
             "shape": it.shape.value, "color": it.color.value}
            for it in trial.items
        ],
        "target_id": trial.target_id,
        "seed": trial.seed,
    }


def trial_from_dict(d):
    items = tuple(
        Item(int(it["id"]), Cell(int(it["row"]), int(it["col"])),
             Feature(it["shape"]), Feature(it["color"]))
        for it in d["items"]
    )
    return Trial(grid_from_dict(d), items, int(d["target_id"]), int(d["seed"]))


def dump_trials(trials):
    return json.dumps({"trials": [trial_to_dict(t) for t in trials]}, indent=1)


def load_trials(text):
    data = json.loads(text)
    if isinstance(data, dict) and "trials" in data:
        data = data["trials"]
    elif isinstance(data, dict):
        data = [data]
    return [trial_from_dict(d) for d in data]


def micro_grid_trial(target="A"):
    """A 5x5 open arena with three items, handy for hand-checked examples.

    Signaler at (4,2), receiver at (0,2); A=(red,circle)@(0,0),
    B=(red,triangle)@(4,4), C=(green,circle)@(2,2).
    """
    grid = GridSpec(5, 5, frozenset(), Cell(4, 2), Cell(0, 2))
    items = (
        Item(0, Cell(0, 0), Feature.CIRCLE, Feature.RED),
        Item(1, Cell(4, 4), Feature.TRIANGLE, Feature.RED),
        Item(2, Cell(2, 2), Feature.CIRCLE, Feature.GREEN),
    )
    return Trial(grid, items, "ABC".index(target))

