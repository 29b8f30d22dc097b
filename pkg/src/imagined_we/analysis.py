"""Summary tables: bootstrap intervals, behaviour breakdowns, RB/SB tests."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import stats
from statsmodels.stats.multitest import multipletests

from .errors import EmptyGroup, InsufficientData
from .experiments import BehaviorClass
from .rng import derive_seed, make_rng

N_BOOT = 10_000
N_PERM = 10_000

GROUP_FIELDS = {
    "n_items": "n_items",
    "barrier": "barrier_condition",
    "model": "model",
    "s_level": "signaler_level",
    "r_level": "receiver_level",
}

_REPORTED = (
    ("p_success", BehaviorClass.SUCCESSFUL_COMM),
    ("p_unsuccess", BehaviorClass.UNSUCCESSFUL_COMM),
    ("p_does", BehaviorClass.SIGNALER_DOES),
    ("p_quit", BehaviorClass.QUIT),
)


@dataclass
class SummaryRow:
    keys: dict
    n: int
    mean_pct: float
    ci_low: float
    ci_high: float
    proportions: dict
    mean_utility: float = float("nan")


def bootstrap_ci(values, n_resamples=N_BOOT, seed=0, level=0.95):
    """Percentile bootstrap interval for the mean."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptyGroup("cannot bootstrap an empty sample")
    if x.size == 1 or np.all(x == x[0]):
        return float(x[0]), float(x[0])
    res = stats.bootstrap((x,), np.mean, n_resamples=n_resamples, confidence_level=level,
                          method="percentile", random_state=make_rng(seed))
    ci = res.confidence_interval
    return float(ci.low), float(ci.high)


def behavior_proportions(records):
    """Share of each coarse behaviour class; wrong walks fold into 'does'."""
    counts = defaultdict(int)
    for r in records:
        counts[r.behavior.reported] += 1
    n = len(records)
    props = {name: counts[cls] / n for name, cls in _REPORTED}
    failed = counts[BehaviorClass.FAILED] / n
    if failed:
        props["p_failed"] = failed
    return props


def _group(records, grouping):
    groups = defaultdict(list)
    for r in records:
        groups[tuple(getattr(r, GROUP_FIELDS[g]) for g in grouping)].append(r)
    return groups


def summarize(records, grouping=("n_items", "model"), n_resamples=N_BOOT, seed=0):
    """One row per group: mean per-trial percent of optimal with a 95% CI."""
    if not records:
        raise EmptyGroup("no records to summarize")
    rows = []
    for i, (key, recs) in enumerate(sorted(_group(records, grouping).items())):
        pct = [r.pct_optimal for r in recs if np.isfinite(r.pct_optimal)]
        if not pct:
            raise EmptyGroup(f"group {key} has no finite percent-of-optimal values")
        lo, hi = bootstrap_ci(pct, n_resamples, seed=derive_seed(seed, i))
        rows.append(SummaryRow(
            keys=dict(zip(grouping, key)),
            n=len(recs),
            mean_pct=float(np.mean(pct)),
            ci_low=lo,
            ci_high=hi,
            proportions=behavior_proportions(recs),
            mean_utility=float(np.mean([r.achieved_utility for r in recs])),
        ))
    return rows


def permutation_pvalue(x, y, n_resamples=N_PERM, seed=0):
    """Two-sided permutation p-value for a difference in means.

    Enumerates every relabelling when there are no more than ``n_resamples``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 1 or y.size < 1:
        raise InsufficientData("both groups need at least one observation")

    def diff(a, b, axis):
        return a.mean(axis=axis) - b.mean(axis=axis)

    res = stats.permutation_test((x, y), diff, vectorized=True, n_resamples=n_resamples,
                                 alternative="two-sided", random_state=make_rng(seed))
    return float(min(1.0, res.pvalue))


@dataclass
class PairComparison:
    model: str
    s_level: int
    r_level: int
    mean_rb: float
    mean_sb: float
    p_value: float
    p_adjusted: float


def compare_rb_sb(records, metric="achieved_utility", n_resamples=N_PERM, seed=0):
    """RB versus SB permutation tests per (model, level pair), Holm-adjusted
    across the level pairs of each model."""
    cells = defaultdict(lambda: {"RB": [], "SB": []})
    for r in records:
        if r.barrier_condition in ("RB", "SB"):
            cells[(r.model, r.signaler_level, r.receiver_level)][r.barrier_condition].append(
                getattr(r, metric))
    if not cells:
        raise InsufficientData("no RB/SB records")
    out = []
    for i, (key, groups) in enumerate(sorted(cells.items())):
        rb, sb = groups["RB"], groups["SB"]
        if not rb or not sb:
            raise InsufficientData(f"{key} lacks records for one barrier condition")
        p = permutation_pvalue(rb, sb, n_resamples, seed=derive_seed(seed, i))
        out.append(PairComparison(key[0], key[1], key[2], float(np.mean(rb)), float(np.mean(sb)), p, p))
    by_model = defaultdict(list)
    for c in out:
        by_model[c.model].append(c)
    for comps in by_model.values():
        adjusted = multipletests([c.p_value for c in comps], method="holm")[1]
        for c, p in zip(comps, adjusted):
            c.p_adjusted = float(p)
    return out


# -- CSV -----------------------------------------------------------------------

def summary_to_csv(rows):
    if not rows:
        return ""
    keys = list(rows[0].keys)
    extra = sorted({k for r in rows for k in r.proportions} - {name for name, _ in _REPORTED})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys + ["n", "mean_pct", "ci_low", "ci_high"]
               + [name for name, _ in _REPORTED] + extra + ["mean_utility"])
    for r in rows:
        w.writerow([r.keys[k] for k in keys]
                   + [r.n, repr(r.mean_pct), repr(r.ci_low), repr(r.ci_high)]
                   + [repr(r.proportions.get(name, 0.0)) for name, _ in _REPORTED]
                   + [repr(r.proportions.get(name, 0.0)) for name in extra]
                   + [repr(r.mean_utility)])
    return buf.getvalue()


def comparisons_to_csv(comps):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "s_level", "r_level", "mean_rb", "mean_sb", "p_value", "p_adjusted"])
    for c in comps:
        w.writerow([c.model, c.s_level, c.r_level, repr(c.mean_rb), repr(c.mean_sb),
                    repr(c.p_value), repr(c.p_adjusted)])
    return buf.getvalue()
