"""Signaling schemes: revealing, optimal strategic, and collapse of general schemes."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .model import (
    Cell,
    ModelParams,
    UsageError,
    accepts,
    joint,
    posterior_utility,
    require,
    utility_numerator,
)

ROW_TOL = 1e-12


class Variant(str, enum.Enum):
    NO_TEST = "NoTest"
    WITH_TEST = "WithTest"

    @classmethod
    def for_params(cls, params: ModelParams) -> "Variant":
        return cls.WITH_TEST if params.has_test else cls.NO_TEST


def cells(variant: Variant) -> Tuple[Cell, ...]:
    """Conditioning cells ``(g, s)`` in canonical order; ``s`` is None without a test."""
    if Variant(variant) is Variant.NO_TEST:
        return ((1, None), (0, None))
    return ((1, 1), (1, 0), (0, 1), (0, 0))


def scores(variant: Variant) -> Tuple[Optional[int], ...]:
    return (None,) if Variant(variant) is Variant.NO_TEST else (1, 0)


def _normalize_cell(variant: Variant, key) -> Cell:
    if isinstance(key, int):
        key = (key, None)
    g, s = key
    cell = (int(g), None if s is None else int(s))
    if cell not in cells(variant):
        raise UsageError(f"cell {key!r} is not valid for variant {variant.value}")
    return cell


def check_variant(params: ModelParams, variant: Variant) -> None:
    if Variant.for_params(params) is not variant:
        raise UsageError(
            f"scheme variant {variant.value} does not match parameters "
            f"({'with' if params.has_test else 'without'} a test)"
        )


@dataclass(frozen=True)
class SignalingScheme:
    """Binary scheme: probability of the accept signal for every cell."""

    variant: Variant
    accept_prob: Mapping[Cell, float]

    def __post_init__(self):
        variant = Variant(self.variant)
        probs = {_normalize_cell(variant, k): float(v) for k, v in dict(self.accept_prob).items()}
        if set(probs) != set(cells(variant)):
            raise UsageError(f"{variant.value} scheme needs exactly the cells {cells(variant)}")
        for cell, v in probs.items():
            if not 0.0 <= v <= 1.0 or math.isnan(v):
                raise UsageError(f"accept probability for cell {cell} must be in [0, 1], got {v!r}")
        object.__setattr__(self, "variant", variant)
        object.__setattr__(self, "accept_prob", {c: probs[c] for c in cells(variant)})

    def prob(self, g: int, s: Optional[int] = None) -> float:
        return self.accept_prob[(g, s)]

    def as_general(self) -> "GeneralScheme":
        return GeneralScheme(
            self.variant,
            ("accept", "reject"),
            {c: (x, 1.0 - x) for c, x in self.accept_prob.items()},
        )

    def to_dict(self) -> dict:
        rows = []
        for (g, s), x in self.accept_prob.items():
            row = {"g": g}
            if s is not None:
                row["s"] = s
            row["accept_prob"] = x
            rows.append(row)
        return {"variant": self.variant.value, "cells": rows}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SignalingScheme":
        variant = Variant(d["variant"])
        probs = {(int(r["g"]), r.get("s")): float(r["accept_prob"]) for r in d["cells"]}
        return cls(variant, probs)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "SignalingScheme":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GeneralScheme:
    """Scheme over a finite signal set; ``dist[cell]`` is a distribution over ``signals``."""

    variant: Variant
    signals: Tuple[str, ...]
    dist: Mapping[Cell, Sequence[float]]

    def __post_init__(self):
        variant = Variant(self.variant)
        signals = tuple(self.signals)
        if len(signals) < 2:
            raise UsageError("a general scheme needs at least two signals")
        dist = {_normalize_cell(variant, k): tuple(float(x) for x in v) for k, v in dict(self.dist).items()}
        if set(dist) != set(cells(variant)):
            raise UsageError(f"{variant.value} scheme needs exactly the cells {cells(variant)}")
        for cell, row in dist.items():
            if len(row) != len(signals):
                raise UsageError(f"row for cell {cell} has {len(row)} entries, expected {len(signals)}")
            if any(x < 0 or math.isnan(x) for x in row) or abs(math.fsum(row) - 1.0) > ROW_TOL:
                raise UsageError(f"row for cell {cell} is not a probability distribution: {row}")
        object.__setattr__(self, "variant", variant)
        object.__setattr__(self, "signals", signals)
        object.__setattr__(self, "dist", {c: dist[c] for c in cells(variant)})


def revealing_scheme(variant: Variant) -> SignalingScheme:
    """The accept signal is sent exactly to high-grade students, whatever the score."""
    variant = Variant(variant)
    return SignalingScheme(variant, {(g, s): float(g) for g, s in cells(variant)})


def reject_all_scheme(variant: Variant) -> SignalingScheme:
    variant = Variant(variant)
    return SignalingScheme(variant, {c: 0.0 for c in cells(variant)})


def optimal_scheme_no_test(params: ModelParams) -> SignalingScheme:
    """Accept every high grade and pack low grades up to the university's break-even.

    Pr[accept | g=0] = (p + q - 1) / (q - p).
    """
    if params.has_test:
        params = params.with_delta(None)
    require(params)
    p, q = params.p, params.q
    low = (q - (1.0 - p)) / (q - p)
    return SignalingScheme(Variant.NO_TEST, {(1, None): 1.0, (0, None): low})


def _packing_fraction(params: ModelParams) -> float:
    # Share of (g=0, s=0) students that keeps the accept signal at s=0 break-even
    # when every (g=1, s=0) student is sent it too.
    return utility_numerator(params, 1, 0) / -utility_numerator(params, 0, 0)


def optimal_scheme_with_test(params: ModelParams) -> SignalingScheme:
    """Optimal scheme when both score levels are informative on their own.

    Every high-score student gets the accept signal.  Low-score students
    get it only when a high grade outweighs the low score, in which case
    low-grade low-score students are packed in up to break-even.
    """
    require(params, test="strict")
    if posterior_utility(params, 1, 0) >= 0:
        x10, x00 = 1.0, _packing_fraction(params)
    else:
        x10, x00 = 0.0, 0.0
    return SignalingScheme(
        Variant.WITH_TEST, {(1, 1): 1.0, (0, 1): 1.0, (1, 0): x10, (0, 0): x00}
    )


def optimal_scheme_relaxed(params: ModelParams) -> SignalingScheme:
    """Optimal scheme when only u(0,0) < 0 <= u(1,1) is assumed.

    A low score no longer forces rejection, so low-grade high-score
    students may also need to be rationed; both fractional cells are
    capped at 1.
    """
    rep = require(params, test="relaxed")
    deficit = -utility_numerator(params, 0, 1)
    # When the whole s=1 block breaks even the fraction is >= 1; checking that
    # in reduced form avoids 1 - 1e-16 on the boundary.  deficit <= 0 with
    # u(0,1) < 0 only happens for the empty cell at q = delta = 1.
    if rep.a3_high_score_ok or posterior_utility(params, 0, 1) >= 0 or deficit <= 0:
        x01 = 1.0
    else:
        x01 = min(1.0, utility_numerator(params, 1, 1) / deficit)
    if posterior_utility(params, 1, 0) >= 0:
        x10, x00 = 1.0, min(1.0, _packing_fraction(params))
    else:
        x10, x00 = 0.0, 0.0
    return SignalingScheme(
        Variant.WITH_TEST, {(1, 1): 1.0, (0, 1): x01, (1, 0): x10, (0, 0): x00}
    )


def optimal_scheme(params: ModelParams, relaxed: bool = False) -> SignalingScheme:
    if not params.has_test:
        return optimal_scheme_no_test(params)
    if relaxed:
        return optimal_scheme_relaxed(params)
    return optimal_scheme_with_test(params)


def signal_masses(params: ModelParams, general: GeneralScheme) -> Dict[Tuple[int, Optional[int]], Tuple[float, float]]:
    """Joint mass of high and low types for each (signal index, score)."""
    check_variant(params, general.variant)
    out = {}
    for s in scores(general.variant):
        for k in range(len(general.signals)):
            hi = lo = 0.0
            for g in (1, 0):
                x = general.dist[(g, s)][k]
                hi += joint(params, 1, g, s) * x
                lo += joint(params, 0, g, s) * x
            out[(k, s)] = (hi, lo)
    return out


def accepted_signals(params: ModelParams, general: GeneralScheme) -> Dict[Optional[int], Tuple[int, ...]]:
    """Signals (by index) the university accepts at each score level."""
    masses = signal_masses(params, general)
    return {
        s: tuple(k for k in range(len(general.signals)) if accepts(*masses[(k, s)]))
        for s in scores(general.variant)
    }


def collapse_scheme(params: ModelParams, general) -> SignalingScheme:
    """Merge accept-inducing signals into one accept signal and the rest into reject.

    The university best-responds to every (signal, score) pair; the
    returned binary scheme induces the same school and university
    utilities and is obeyed.
    """
    if isinstance(general, SignalingScheme):
        general = general.as_general()
    acc = accepted_signals(params, general)
    probs = {}
    for g, s in cells(general.variant):
        row = general.dist[(g, s)]
        probs[(g, s)] = min(1.0, math.fsum(row[k] for k in acc[s]))
    return SignalingScheme(general.variant, probs)


def obedience_margins(params: ModelParams, scheme: SignalingScheme) -> Dict[Tuple[str, Optional[int]], Optional[float]]:
    """Posterior utility of the accept and reject signal at each score (None if never sent)."""
    masses = signal_masses(params, scheme.as_general())
    out = {}
    for (k, s), (hi, lo) in masses.items():
        name = "accept" if k == 0 else "reject"
        out[(name, s)] = (hi - lo) / (hi + lo) if hi + lo > 0 else None
    return out


def embed(scheme: SignalingScheme, labels: Iterable[str] = ("accept", "reject")) -> GeneralScheme:
    return GeneralScheme(scheme.variant, tuple(labels), scheme.as_general().dist)
