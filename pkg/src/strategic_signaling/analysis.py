"""Bound checks, comparative statics and sweep tables.

Every check returns :class:`BoundCheck` records instead of raising, so a
caller can see how close each inequality comes to failing.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .metrics import closed_form, no_test_curves, with_test_curves
from .model import (
    AssumptionError,
    ModelParams,
    Sign,
    UsageError,
    posterior_utility,
    regime_boundaries,
    require,
)

BOUND_TOL = 1e-9
DEFAULT_PAIR_GRID = 200
DEFAULT_FIGURE_GRID = 801
TICK_STEP = 0.05

FIGURE_COLUMNS = (
    "q",
    "U_r_notest",
    "U_s_notest",
    "ratio_notest",
    "U_r_test",
    "U_s_test",
    "ratio_test",
    "regime_10",
    "regime_01",
)
FLAG_COLUMNS = ("regime_10", "regime_01")


@dataclass(frozen=True)
class BoundCheck:
    name: str
    margin: float
    witness: Dict[str, float] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.margin >= -BOUND_TOL

    def to_dict(self) -> dict:
        return {"name": self.name, "holds": self.holds, "margin": self.margin, "witness": dict(self.witness)}

    @classmethod
    def from_dict(cls, d) -> "BoundCheck":
        return cls(d["name"], float(d["margin"]), {k: float(v) for k, v in d["witness"].items()})


def checks_to_json(checks: Sequence[BoundCheck], **kw) -> str:
    return json.dumps([c.to_dict() for c in checks], **kw)


def checks_from_json(text: str) -> List[BoundCheck]:
    return [BoundCheck.from_dict(d) for d in json.loads(text)]


def _q_grid(p: float, q_grid, n: int) -> np.ndarray:
    if q_grid is None:
        return np.linspace(1.0 - p, 1.0, n)
    grid = np.sort(np.asarray(q_grid, dtype=float))
    if grid.size == 0:
        raise UsageError("q grid is empty")
    if grid[0] - (1.0 - p) < -BOUND_TOL or grid[-1] > 1.0:
        raise UsageError(f"q grid must lie within [1-p, 1] = [{1 - p:g}, 1]")
    return np.clip(grid, 1.0 - p, 1.0)


def _check_prior(p: float) -> None:
    if not 0 < p < 0.5:
        raise AssumptionError("assumption 1", f"p = {p!r} must lie in (0, 1/2)")


def _pairwise(name: str, slack: np.ndarray, grid: np.ndarray) -> BoundCheck:
    """Minimum of ``slack[i, j]`` over pairs with ``grid[i] > grid[j]``."""
    mask = grid[:, None] > grid[None, :]
    if not mask.any():
        return BoundCheck(name, 0.0)  # vacuous
    vals = np.where(mask, slack, np.inf)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    return BoundCheck(name, float(vals[i, j]), {"q": float(grid[i]), "q_prime": float(grid[j])})


def _pointwise(name: str, slack: np.ndarray, grid: np.ndarray, key: str = "q") -> BoundCheck:
    k = int(np.argmin(slack))
    return BoundCheck(name, float(slack[k]), {key: float(grid[k])})


def _tight(name: str, lhs: float, rhs: float, **witness) -> BoundCheck:
    return BoundCheck("tight:" + name, -abs(lhs - rhs), witness)


def check_utility_comparison(p: float, q_grid=None) -> List[BoundCheck]:
    """Utility bounds of strategic against revealing schools and across grade accuracies."""
    _check_prior(p)
    q = _q_grid(p, q_grid, DEFAULT_PAIR_GRID)
    c = no_test_curves(p, q)
    us, ur = c["U_s"], c["U_r"]
    # rows index q, columns index q' (pairs with q > q')
    out = [
        _pairwise("strategic_gain_bounded", us[None, :] / (1 - p) - us[:, None], q),
        _pairwise("strategic_increasing", us[:, None] - us[None, :], q),
        _pointwise("strategic_at_most_double", 2 * ur - us, q),
        _pointwise("strategic_at_least_revealing", us - ur, q),
        _pairwise("revealing_loss_bounded", 2 * (1 - p) * ur[:, None] - ur[None, :], q),
        _pairwise("revealing_decreasing", ur[None, :] - ur[:, None], q),
    ]
    lo = no_test_curves(p, 1.0 - p)
    hi = no_test_curves(p, 1.0)
    ends = dict(q=1.0, q_prime=1.0 - p)
    out += [
        _tight("strategic_gain_bounded", float(lo["U_s"]) / (1 - p), float(hi["U_s"]), **ends),
        _tight("strategic_at_most_double", 2 * float(hi["U_r"]), float(hi["U_s"]), q=1.0),
        _tight("strategic_at_least_revealing", float(lo["U_s"]), float(lo["U_r"]), q=1.0 - p),
        _tight("revealing_loss_bounded", 2 * (1 - p) * float(hi["U_r"]), float(lo["U_r"]), **ends),
    ]
    return out


def check_fpr_fnr_comparison(p: float, q_grid=None) -> List[BoundCheck]:
    """False positive and negative rate bounds without a test."""
    _check_prior(p)
    q = _q_grid(p, q_grid, DEFAULT_PAIR_GRID)
    c = no_test_curves(p, q)
    fps, fns, fpr, fnr = c["FPR_s"], c["FNR_s"], c["FPR_r"], c["FNR_r"]
    k = (1 - 2 * p) / (1 - p)
    out = [
        _pairwise("strategic_fpr_gain_bounded", fps[None, :] / (1 - p) - fps[:, None], q),
        _pairwise("strategic_fpr_increasing", fps[:, None] - fps[None, :], q),
        _pairwise("strategic_fnr_decreasing", fns[None, :] - fns[:, None], q),
        _pointwise("signaling_raises_fpr", fps - fpr, q),
        _pointwise("signaling_fnr_lower", fns - k * fnr, q),
        _pointwise("signaling_lowers_fnr", fnr - fns, q),
        _pairwise("revealing_fpr_decreasing", fpr[None, :] - fpr[:, None], q),
        _pairwise("revealing_fnr_decreasing", fnr[None, :] - fnr[:, None], q),
    ]
    lo = no_test_curves(p, 1.0 - p)
    hi = no_test_curves(p, 1.0)
    # FNR_s / FNR_r only approaches its bound as q -> 1, where both vanish
    near_one = 1.0 - 2.0 ** -40
    near = no_test_curves(p, near_one)
    out += [
        _tight("strategic_fpr_gain_bounded", float(lo["FPR_s"]) / (1 - p), float(hi["FPR_s"]), q=1.0, q_prime=1.0 - p),
        _tight("signaling_raises_fpr", float(lo["FPR_s"]), float(lo["FPR_r"]), q=1.0 - p),
        _tight("signaling_lowers_fnr", float(lo["FNR_s"]), float(lo["FNR_r"]), q=1.0 - p),
        _tight("signaling_fnr_lower", float(near["FNR_s"]) / float(near["FNR_r"]), k, q=near_one),
    ]
    return out


def _test_rows(p: float, delta: float, q: np.ndarray):
    ur, us, f10, f01 = [], [], [], []
    for qv in q:
        params = ModelParams(p, float(qv), delta)
        c = with_test_curves(params)
        ur.append(c["U_r"])
        us.append(c["U_s"])
        f10.append(Sign.of(posterior_utility(params, 1, 0)).value)
        f01.append(Sign.of(posterior_utility(params, 0, 1)).value)
    return np.array(ur), np.array(us), f10, f01


def _segments(f10: Sequence[str], f01: Sequence[str]) -> List[Tuple[int, int, Tuple[str, str]]]:
    """Maximal runs ``[start, stop)`` of constant regime flags."""
    out = []
    start = 0
    for i in range(1, len(f10) + 1):
        if i == len(f10) or (f10[i], f01[i]) != (f10[start], f01[start]):
            out.append((start, i, (f10[start], f01[start])))
            start = i
    return out


def _steps(name: str, y: np.ndarray, q: np.ndarray, sign: int) -> BoundCheck:
    """sign = 1 increasing, -1 decreasing, 0 constant."""
    if y.size < 2:
        return BoundCheck(name, 0.0, {"q": float(q[0])})  # vacuous
    d = np.diff(y)
    slack = -np.abs(d) if sign == 0 else sign * d
    k = int(np.argmin(slack))
    return BoundCheck(name, float(slack[k]), {"q": float(q[k + 1])})


_NEG, _NONNEG = Sign.NEG.value, Sign.NONNEG.value
# (regime_10, regime_01) -> expected direction of (U_r, U_s) within the segment
_SEGMENT_SHAPE = {
    (_NEG, _NONNEG): ("low", 0, 0),
    (_NEG, _NEG): ("mid", 1, 0),
    (_NONNEG, _NEG): ("high", -1, 1),
}


def check_monotonicity(p: float, delta: Optional[float] = None, q_grid=None) -> List[BoundCheck]:
    """Direction of every utility and error rate in q.

    Without a test each curve is monotone on the whole grid.  With a test
    the utilities are piecewise: U_r drops where u(0,1) turns negative and
    both utilities jump up where u(1,0) turns non-negative.
    """
    _check_prior(p)
    if delta is None:
        q = _q_grid(p, q_grid, DEFAULT_PAIR_GRID)
        c = no_test_curves(p, q)
        return [
            _steps("strategic_utility_increasing", c["U_s"], q, 1),
            _steps("strategic_fpr_increasing", c["FPR_s"], q, 1),
            _steps("revealing_utility_decreasing", c["U_r"], q, -1),
            _steps("revealing_fpr_decreasing", c["FPR_r"], q, -1),
            _steps("revealing_fnr_decreasing", c["FNR_r"], q, -1),
            _steps("strategic_fnr_decreasing", c["FNR_s"], q, -1),
        ]
    require(ModelParams(p, 1.0, delta), grades=False, test="strict")
    q = _q_grid(p, q_grid, DEFAULT_FIGURE_GRID)
    ur, us, f10, f01 = _test_rows(p, delta, q)
    out = []
    segs = _segments(f10, f01)
    for a, b, key in segs:
        shape = _SEGMENT_SHAPE.get(key)
        if shape is None:
            continue
        label, dr, ds = shape
        out.append(_steps(f"{label}_segment_revealing", ur[a:b], q[a:b], dr))
        out.append(_steps(f"{label}_segment_strategic", us[a:b], q[a:b], ds))
    for (_, b, k0), (a, _, k1) in zip(segs, segs[1:]):
        at = {"q": float(q[a]), "q_prev": float(q[b - 1])}
        if k0[1] == _NONNEG and k1[1] == _NEG:
            out.append(BoundCheck("revealing_drops_at_q1", float(ur[b - 1] - ur[a]), at))
        if k0[0] == _NEG and k1[0] == _NONNEG:
            out.append(BoundCheck("revealing_jumps_at_q2", float(ur[a] - ur[b - 1]), at))
            out.append(BoundCheck("strategic_jumps_at_q2", float(us[a] - us[b - 1]), at))
    return out


def _delta_threshold(p: float, q: float) -> float:
    return max(p * q / (p * q + (1 - p) * (1 - q)), (1 - p) * q / (p * (1 - q) + (1 - p) * q))


def ratio_with_test(p: float, q: float, delta: float) -> float:
    c = with_test_curves(ModelParams(p, q, delta))
    return c["U_s"] / c["U_r"]


def check_test_ratio_lemmas(p: float, q: float, delta_grid=None) -> List[BoundCheck]:
    """Strategic-to-revealing utility ratio with a test, across test accuracies.

    For q < 1 the ratio is exactly 1 once the test is accurate enough that
    only high scores are admitted; for q = 1 it equals (1 - delta + p)/p.
    """
    _check_prior(p)
    if delta_grid is None:
        delta_grid = np.linspace(1.0 - p, 1.0, 401)
    deltas = np.sort(np.asarray(delta_grid, dtype=float))
    for d in deltas:
        require(ModelParams(p, q, float(d)), test="strict")
    ratio = np.array([ratio_with_test(p, q, float(d)) for d in deltas])
    if q < 1:
        thr = _delta_threshold(p, q)
        above = deltas > thr
        out = []
        if above.any():
            out.append(_pointwise("ratio_one_above_threshold", -np.abs(ratio[above] - 1), deltas[above], "delta"))
        if (~above).any():
            out.append(_pointwise("ratio_above_one_below_threshold", ratio[~above] - 1, deltas[~above], "delta"))
        return out
    formula = (1 - deltas + p) / p
    return [
        _pointwise("accurate_grades_ratio_formula", -np.abs(ratio - formula), deltas, "delta"),
        _pointwise("accurate_grades_ratio_at_least_one", ratio - 1, deltas, "delta"),
        _pointwise("accurate_grades_ratio_at_most_two", 2 - ratio, deltas, "delta"),
    ]


# -- sweep tables ------------------------------------------------------------

@dataclass
class SweepResult:
    """Table of per-point values along one parameter axis."""

    axis: str
    columns: Tuple[str, ...]
    rows: List[tuple]
    warnings: List[str] = field(default_factory=list)

    def column(self, name: str):
        k = self.columns.index(name)
        vals = [r[k] for r in self.rows]
        return vals if name in FLAG_COLUMNS else np.array(vals, dtype=float)

    @property
    def values(self) -> np.ndarray:
        return self.column(self.axis)

    def row_at(self, value: float, tol: float = 1e-12) -> dict:
        vals = self.values
        k = int(np.argmin(np.abs(vals - value)))
        if abs(vals[k] - value) > tol:
            raise KeyError(f"no row with {self.axis} = {value!r}")
        return dict(zip(self.columns, self.rows[k]))

    def regime_transitions(self) -> Dict[str, List[float]]:
        """Axis values at which each regime flag changes."""
        vals = self.values
        out = {}
        for name in FLAG_COLUMNS:
            if name not in self.columns:
                continue
            flags = self.column(name)
            out[name] = [float(vals[i]) for i in range(1, len(flags)) if flags[i] != flags[i - 1]]
        return out

    def to_csv(self, float_format: str = ".17g") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([v if isinstance(v, str) else format(v, float_format) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, axis: Optional[str] = None) -> "SweepResult":
        reader = csv.reader(io.StringIO(text))
        columns = tuple(next(reader))
        rows = [
            tuple(v if c in FLAG_COLUMNS else float(v) for c, v in zip(columns, line))
            for line in reader
            if line
        ]
        return cls(axis or columns[0], columns, rows)


def figure_grid(p: float, n: int, extra: Iterable[float]) -> np.ndarray:
    grid = np.linspace(1.0 - p, 1.0, n)
    ticks = np.arange(math.ceil((1.0 - p) / TICK_STEP), math.floor(1.0 / TICK_STEP) + 1) * TICK_STEP
    ticks = np.round(ticks, 12)
    pts = np.concatenate([grid, ticks[(ticks >= 1.0 - p) & (ticks <= 1.0)], np.asarray(list(extra), float)])
    pts = np.unique(pts)
    # drop points that merely duplicate a grid point up to rounding
    keep = np.concatenate([[True], np.diff(pts) > 1e-12])
    return pts[keep]


def figure_data(p: float, delta: float, q_grid=None, extra_q: Iterable[float] = ()) -> SweepResult:
    """Utilities and ratios with and without a test along q.

    The default grid is :data:`DEFAULT_FIGURE_GRID` evenly spaced points over
    [1 - p, 1] plus every multiple of 0.05 in that range, so round q values
    can be read off directly.  Boundaries outside the range are reported in
    ``warnings``.
    """
    _check_prior(p)
    q1, q2 = regime_boundaries(p, delta)
    if q_grid is None:
        q = figure_grid(p, DEFAULT_FIGURE_GRID, extra_q)
    else:
        q = np.unique(np.concatenate([_q_grid(p, q_grid, 0), np.asarray(list(extra_q), float)]))
        q = _q_grid(p, q, 0)
    if len(q) < 400:
        warn_grid = [f"grid has {len(q)} points; at least 400 are needed to bracket both boundaries"]
    else:
        warn_grid = []
    warnings = warn_grid + [
        f"{name} = {val:.12g} lies outside [1-p, 1]"
        for name, val in (("q1", q1), ("q2", q2))
        if not (1.0 - p <= val <= 1.0)
    ]
    nt = no_test_curves(p, q)
    ur, us, f10, f01 = _test_rows(p, delta, q)
    rows = [
        (
            float(q[i]),
            float(nt["U_r"][i]),
            float(nt["U_s"][i]),
            float(nt["U_s"][i] / nt["U_r"][i]),
            float(ur[i]),
            float(us[i]),
            float(us[i] / ur[i]),
            f10[i],
            f01[i],
        )
        for i in range(len(q))
    ]
    return SweepResult("q", FIGURE_COLUMNS, rows, warnings)


def check_figure_regimes(result: SweepResult, p: float, delta: float) -> List[BoundCheck]:
    """Each regime flag flips at most once, one grid step from its boundary."""
    q1, q2 = regime_boundaries(p, delta)
    vals = result.values
    step = float(np.max(np.diff(vals))) if len(vals) > 1 else 0.0
    out = []
    for name, bound in (("regime_01", q1), ("regime_10", q2)):
        flips = result.regime_transitions()[name]
        out.append(BoundCheck(f"{name}_single_flip", 0.0 if len(flips) <= 1 else -float(len(flips) - 1)))
        if flips:
            out.append(BoundCheck(f"{name}_flip_at_boundary", step - abs(flips[0] - bound), {"q": flips[0]}))
    return out


METRIC_COLUMNS = ("U_r", "FPR_r", "FNR_r", "UU_r", "U_s", "FPR_s", "FNR_s", "UU_s")


def metric_sweep(base: ModelParams, axis: str, values) -> SweepResult:
    """Closed-form metrics for both school types with one parameter varied."""
    if axis not in ("q", "delta"):
        raise UsageError(f"sweep axis must be 'q' or 'delta', got {axis!r}")
    if axis == "delta" and not base.has_test:
        raise UsageError("a delta sweep needs a test accuracy")
    with_flags = base.has_test
    columns = (axis,) + METRIC_COLUMNS + (FLAG_COLUMNS if with_flags else ())
    rows = []
    for v in np.sort(np.asarray(values, dtype=float)):
        params = base.with_q(float(v)) if axis == "q" else base.with_delta(float(v))
        row = [float(v)]
        for strategic in (False, True):
            m = closed_form(params, strategic)
            row += [m.school_utility, m.fpr, m.fnr, m.university_utility]
        if with_flags:
            row += [Sign.of(posterior_utility(params, 1, 0)).value, Sign.of(posterior_utility(params, 0, 1)).value]
        rows.append(tuple(row))
    return SweepResult(axis, columns, rows)
