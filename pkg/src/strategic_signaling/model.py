"""Model parameters, assumption checks and posterior utilities.

A student has a binary type ``t`` (1 = qualified) drawn with prior ``p``.
The school sees a grade ``g`` that equals ``t`` with probability ``q``;
optionally a public test score ``s`` equals ``t`` with probability ``delta``,
independently of the grade.  The university gains +1 for admitting a
qualified student and -1 otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

# Posterior utilities within this distance of zero count as indifference
# for the university's accept decision on a signal (it accepts when
# indifferent).  Optimal schemes sit exactly on that boundary, so rounding
# would otherwise flip the decision.  Regime classification of the
# parameters themselves uses exact signs.
TIE_TOL = 1e-12

# Distance to a boundary below which ``near_boundaries`` reports a margin.
BOUNDARY_TOL = 1e-9

Cell = Tuple[int, Optional[int]]


class ParameterError(ValueError):
    """A model parameter lies outside its declared range."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class AssumptionError(ValueError):
    """Parameters violate an assumption required by an operation."""

    def __init__(self, assumption: str, message: str):
        super().__init__(f"{assumption} fails: {message}")
        self.assumption = assumption


class DegenerateRegimeError(AssumptionError):
    """The university accepts everyone or no one regardless of the signal."""

    def __init__(self, outcome: str, message: str):
        super().__init__("relaxed assumption", f"{message} ({outcome} regardless of signal)")
        self.outcome = outcome


class UsageError(ValueError):
    """An operation was called with inconsistent arguments."""


class Sign(str, enum.Enum):
    NONNEG = "nonneg"
    NEG = "neg"

    @classmethod
    def of(cls, value: float) -> "Sign":
        return cls.NONNEG if value >= 0 else cls.NEG


def _check_prob(name: str, value, lo: float, hi: float, open_ends: bool = False) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ParameterError(name, f"not a number: {value!r}") from None
    if math.isnan(value):
        raise ParameterError(name, "is NaN")
    if open_ends:
        if not lo < value < hi:
            raise ParameterError(name, f"must lie in ({lo:g}, {hi:g}), got {value!r}")
    elif not lo <= value <= hi:
        raise ParameterError(name, f"must lie in [{lo:g}, {hi:g}], got {value!r}")
    return value


@dataclass(frozen=True)
class ModelParams:
    """Prior ``p``, grade accuracy ``q`` and optional test accuracy ``delta``.

    Accuracies below 1/2 are rejected; use :meth:`canonical` to relabel
    grades (``q -> 1 - q``) explicitly.
    """

    p: float
    q: float
    delta: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "p", _check_prob("p", self.p, 0.0, 1.0, open_ends=True))
        object.__setattr__(self, "q", _check_prob("q", self.q, 0.5, 1.0))
        if self.delta is not None:
            object.__setattr__(self, "delta", _check_prob("delta", self.delta, 0.5, 1.0))

    @classmethod
    def canonical(cls, p: float, q: float, delta: Optional[float] = None) -> "ModelParams":
        """Build params, flipping accuracies below 1/2 by relabelling the observation."""
        if q < 0.5:
            q = 1.0 - q
        if delta is not None and delta < 0.5:
            delta = 1.0 - delta
        return cls(p, q, delta)

    @property
    def has_test(self) -> bool:
        return self.delta is not None

    def with_q(self, q: float) -> "ModelParams":
        return ModelParams(self.p, q, self.delta)

    def with_delta(self, delta: Optional[float]) -> "ModelParams":
        return ModelParams(self.p, self.q, delta)

    def report(self) -> "AssumptionReport":
        return validate(self)

    def to_dict(self) -> dict:
        d = {"p": self.p, "q": self.q}
        if self.delta is not None:
            d["delta"] = self.delta
        return d


def joint(params: ModelParams, t: int, g: int, s: Optional[int] = None) -> float:
    """Pr[t, g] or Pr[t, g, s]."""
    p, q, d = params.p, params.q, params.delta
    pr = p if t == 1 else 1.0 - p
    pr *= q if g == t else 1.0 - q
    if s is not None:
        if d is None:
            raise UsageError("score given but the model has no test (delta is None)")
        pr *= d if s == t else 1.0 - d
    return pr


def utility_numerator(params: ModelParams, g: int, s: Optional[int] = None) -> float:
    """Pr[t=1, g, s] - Pr[t=0, g, s]; has the sign of the posterior utility."""
    return joint(params, 1, g, s) - joint(params, 0, g, s)


def _perfectly_correlated(params: ModelParams) -> bool:
    return params.q == 1.0 and params.delta == 1.0


def posterior_utility(params: ModelParams, g: int, s: Optional[int] = None) -> float:
    """E[2t - 1 | g] or E[2t - 1 | g, s] by Bayes' rule.

    With ``q = delta = 1`` a disagreeing grade and score has probability
    zero; such cells are assigned utility -1.
    """
    if s is not None and params.delta is None:
        raise UsageError("score given but the model has no test (delta is None)")
    if s is not None and s != g and _perfectly_correlated(params):
        return -1.0
    hi = joint(params, 1, g, s)
    lo = joint(params, 0, g, s)
    return (hi - lo) / (hi + lo)


@dataclass(frozen=True)
class AssumptionReport:
    a1_prior_negative: bool
    a2_high_grade_ok: bool
    a2_low_grade_neg: bool
    a3_high_score_ok: Optional[bool] = None
    a3_low_score_neg: Optional[bool] = None
    a_relaxed: Optional[bool] = None

    @property
    def a1(self) -> bool:
        return self.a1_prior_negative

    @property
    def a2(self) -> bool:
        return self.a2_high_grade_ok and self.a2_low_grade_neg

    @property
    def a3(self) -> Optional[bool]:
        if self.a3_high_score_ok is None:
            return None
        return self.a3_high_score_ok and self.a3_low_score_neg

    def failures(self) -> list:
        out = []
        if not self.a1_prior_negative:
            out.append(("assumption 1", "prior utility p - (1-p) must be negative (p < 1/2)"))
        if not self.a2_high_grade_ok:
            out.append(("assumption 2", "high-grade utility pq - (1-p)(1-q) must be >= 0 (q >= 1-p)"))
        if not self.a2_low_grade_neg:
            out.append(("assumption 2", "low-grade utility p(1-q) - (1-p)q must be negative (q > p)"))
        if self.a3_high_score_ok is False:
            out.append(("assumption 3", "high-score utility p*delta - (1-p)(1-delta) must be >= 0"))
        if self.a3_low_score_neg is False:
            out.append(("assumption 3", "low-score utility p(1-delta) - (1-p)delta must be negative"))
        if self.a_relaxed is False:
            out.append(("relaxed assumption", "need u(0,0) < 0 <= u(1,1)"))
        return out

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def validate(params: ModelParams) -> AssumptionReport:
    """Evaluate every assumption flag for ``params``.

    The grade and score conditions are compared in their reduced forms
    (``pq - (1-p)(1-q) = q - (1-p)`` and ``p(1-q) - (1-p)q = p - q``) so that
    ``q = 1 - p`` lands exactly on the boundary instead of a rounding error
    away from it.
    """
    p, q, d = params.p, params.q, params.delta
    kw = {}
    if d is not None:
        kw = dict(
            a3_high_score_ok=d - (1.0 - p) >= 0,
            a3_low_score_neg=p - d < 0,
            a_relaxed=_relaxed_holds(params),
        )
    return AssumptionReport(
        a1_prior_negative=p - (1.0 - p) < 0,
        a2_high_grade_ok=q - (1.0 - p) >= 0,
        a2_low_grade_neg=p - q < 0,
        **kw,
    )


def _relaxed_holds(params: ModelParams) -> bool:
    return utility_numerator(params, 0, 0) < 0 <= utility_numerator(params, 1, 1)


def require(params: ModelParams, *, grades: bool = True, test: Optional[str] = None) -> AssumptionReport:
    """Raise :class:`AssumptionError` unless the requested assumptions hold.

    ``test`` is ``None`` (no test needed), ``"strict"`` (assumption 3) or
    ``"relaxed"`` (relaxed assumption; a failure raises
    :class:`DegenerateRegimeError`).
    """
    rep = validate(params)
    if not rep.a1_prior_negative:
        raise AssumptionError("assumption 1", f"p = {params.p!r} must be < 1/2")
    if grades and not rep.a2:
        name, msg = [f for f in rep.failures() if f[0] == "assumption 2"][0]
        raise AssumptionError(name, msg)
    if test is not None:
        if params.delta is None:
            raise UsageError("this operation needs a test accuracy delta")
        if test == "strict" and not rep.a3:
            name, msg = [f for f in rep.failures() if f[0] == "assumption 3"][0]
            raise AssumptionError(name, msg)
        if test == "relaxed" and not rep.a_relaxed:
            raise _degenerate(params)
    return rep


def _degenerate(params: ModelParams) -> DegenerateRegimeError:
    if utility_numerator(params, 0, 0) >= 0:
        return DegenerateRegimeError("accept-all", "u(0,0) >= 0")
    return DegenerateRegimeError("reject-all", "u(1,1) < 0")


@dataclass(frozen=True)
class RegimeClassification:
    u_gs: Dict[Tuple[int, int], float] = field(repr=False)
    regime_10: Sign
    regime_01: Sign

    def to_dict(self) -> dict:
        return {
            "u": {f"{g}{s}": v for (g, s), v in sorted(self.u_gs.items())},
            "regime_10": self.regime_10.value,
            "regime_01": self.regime_01.value,
        }


def classify_regime(params: ModelParams) -> RegimeClassification:
    """Posterior utility of every (grade, score) cell and the signs of u(1,0), u(0,1)."""
    require(params, test="relaxed")
    u = {(g, s): posterior_utility(params, g, s) for g in (1, 0) for s in (1, 0)}
    return RegimeClassification(u, Sign.of(u[(1, 0)]), Sign.of(u[(0, 1)]))


def regime_boundaries(p: float, delta: float) -> Tuple[float, float]:
    """Grade accuracies where u(0,1) and u(1,0) cross zero, ``(q1, q2)``.

    Below ``q1`` a low grade with a high score is still admitted; from
    ``q2`` on a high grade with a low score is admitted.
    """
    require(ModelParams(p, 1.0, delta), grades=False, test="strict")
    q1 = p * delta / (p * delta + (1 - p) * (1 - delta))
    q2 = (1 - p) * delta / (p * (1 - delta) + (1 - p) * delta)
    return q1, q2


def boundary_margins(params: ModelParams) -> Dict[str, float]:
    """Signed distance of every case-split quantity from zero."""
    p, q, d = params.p, params.q, params.delta
    out = {
        "prior": p - (1 - p),
        "high_grade": q - (1 - p),
        "low_grade": p - q,
    }
    if d is not None:
        out.update({
            "high_score": d - (1 - p),
            "low_score": p - d,
        })
        for g, s in ((1, 1), (1, 0), (0, 1), (0, 0)):
            out[f"u{g}{s}"] = utility_numerator(params, g, s)
    return out


def near_boundaries(params: ModelParams, tol: float = BOUNDARY_TOL) -> Dict[str, float]:
    """Margins within ``tol`` of zero, where an exact-sign case split is fragile."""
    return {k: v for k, v in boundary_margins(params).items() if abs(v) <= tol}


def accepts(mass_high: float, mass_low: float) -> bool:
    """University decision for a signal with joint masses of high and low types.

    Accepts iff the posterior utility is >= 0, up to :data:`TIE_TOL`.
    A signal that never occurs is not accepted.
    """
    total = mass_high + mass_low
    if total <= 0:
        return False
    return mass_high - mass_low >= -TIE_TOL * total
