"""School utility, false positive/negative rates and university utility.

``evaluate`` works for any scheme by letting the university best-respond;
the ``closed_form_*`` functions are the explicit expressions for the
revealing and optimal schemes.  The no-test curves accept numpy arrays.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np

from .model import ModelParams, joint, posterior_utility, require
from .schemes import (
    GeneralScheme,
    SignalingScheme,
    Variant,
    cells,
    collapse_scheme,
    check_variant,
)


@dataclass(frozen=True)
class OutcomeMetrics:
    school_utility: float
    fpr: float
    fnr: float
    university_utility: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "OutcomeMetrics":
        return cls(**{k: float(d[k]) for k in ("school_utility", "fpr", "fnr", "university_utility")})

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "OutcomeMetrics":
        return cls.from_dict(json.loads(text))


def _from_rates(p: float, fpr: float, fnr: float, utility: float) -> OutcomeMetrics:
    return OutcomeMetrics(utility, fpr, fnr, p * (1 - fnr) - (1 - p) * fpr)


def evaluate(params: ModelParams, scheme) -> OutcomeMetrics:
    """Exact outcome of ``scheme`` against a best-responding university.

    Accepts a :class:`SignalingScheme` or a :class:`GeneralScheme`.  The
    scheme is first collapsed, so a student is admitted exactly when the
    collapsed scheme sends the accept signal.
    """
    variant = scheme.variant
    check_variant(params, variant)
    binary = collapse_scheme(params, scheme)
    acc_hi = acc_lo = 0.0
    for g, s in cells(variant):
        x = binary.prob(g, s)
        acc_hi += joint(params, 1, g, s) * x
        acc_lo += joint(params, 0, g, s) * x
    p = params.p
    return OutcomeMetrics(
        school_utility=acc_hi + acc_lo,
        fpr=acc_lo / (1 - p),
        fnr=1.0 - acc_hi / p,
        university_utility=acc_hi - acc_lo,
    )


# -- without a test ---------------------------------------------------------

def utility_revealing(p, q):
    return p * q + (1 - p) * (1 - q)


def utility_strategic(p, q):
    return 1 + (p + q - 2 * p * q) * (2 * p - 1) / (q - p)


def fpr_revealing(p, q):
    return 1 - q + 0 * p


def fnr_revealing(p, q):
    return 1 - q + 0 * p


def fpr_strategic(p, q):
    return 1 - q + q * (q - (1 - p)) / (q - p)


def fnr_strategic(p, q):
    return (1 - q) * (1 - 2 * p) / (q - p)


def no_test_curves(p, q) -> dict:
    """All no-test closed forms, vectorised over ``q`` (and ``p``)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return {
        "U_r": utility_revealing(p, q),
        "U_s": utility_strategic(p, q),
        "FPR_r": fpr_revealing(p, q),
        "FNR_r": fnr_revealing(p, q),
        "FPR_s": fpr_strategic(p, q),
        "FNR_s": fnr_strategic(p, q),
    }


def closed_form_no_test(params: ModelParams, strategic: bool) -> OutcomeMetrics:
    if params.has_test:
        params = params.with_delta(None)
    require(params)
    p, q = params.p, params.q
    if strategic:
        return _from_rates(p, fpr_strategic(p, q), fnr_strategic(p, q), utility_strategic(p, q))
    return _from_rates(p, fpr_revealing(p, q), fnr_revealing(p, q), utility_revealing(p, q))


# -- with a test ------------------------------------------------------------

def _mass(params: ModelParams, g: int, s: int) -> float:
    return joint(params, 1, g, s) + joint(params, 0, g, s)


def with_test_curves(params: ModelParams) -> dict:
    """Closed-form expressions with a test, without checking any assumption.

    The revealing expressions hold whenever u(0,0) < 0 <= u(1,1); the
    strategic ones additionally need assumption 3.
    """
    p, q, d = params.p, params.q, params.delta
    hi_low = posterior_utility(params, 1, 0) >= 0
    lo_high = posterior_utility(params, 0, 1) >= 0
    out = {
        "U_r": (
            _mass(params, 1, 1)
            + (_mass(params, 1, 0) if hi_low else 0.0)
            + (_mass(params, 0, 1) if lo_high else 0.0)
        ),
        "FPR_r": (1 - q) * (1 - d) + ((1 - q) * d if hi_low else 0.0) + (q * (1 - d) if lo_high else 0.0),
        "FNR_r": (1 - q) * (1 - d) + (0.0 if hi_low else q * (1 - d)) + (0.0 if lo_high else (1 - q) * d),
    }
    if not hi_low:
        # only high scores are admitted
        out.update(U_s=_mass(params, 1, 1) + _mass(params, 0, 1), FPR_s=1 - d, FNR_s=1 - d)
        return out
    frac = (p * q * (1 - d) - (1 - p) * (1 - q) * d) / ((1 - p) * q * d - p * (1 - q) * (1 - d))
    low_low = p * (1 - q) * (1 - d) + (1 - p) * q * d
    out.update(
        U_s=(1 - low_low) + low_low * frac,
        FPR_s=(1 - q * d) + q * d * frac,
        FNR_s=(1 - q) * (1 - d) * (1 - frac),
    )
    return out


def closed_form_with_test(params: ModelParams, strategic: bool) -> OutcomeMetrics:
    """Closed forms branching on the signs of u(1,0) and u(0,1).

    Strategic values need assumptions 1-3; revealing values only need the
    relaxed assumption, since they just sum the cells the university admits.
    """
    require(params, test="strict" if strategic else "relaxed")
    c = with_test_curves(params)
    key = "s" if strategic else "r"
    return _from_rates(params.p, c["FPR_" + key], c["FNR_" + key], c["U_" + key])


def closed_form(params: ModelParams, strategic: bool) -> OutcomeMetrics:
    if params.has_test:
        return closed_form_with_test(params, strategic)
    return closed_form_no_test(params, strategic)
