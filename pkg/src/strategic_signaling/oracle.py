"""Independent checks: a Monte Carlo population simulator and a grid-search optimizer.

Neither path uses the closed forms.  The simulated university works out
its posteriors from the declared scheme by enumeration, and the grid
search only knows the university's break-even constraint.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .model import TIE_TOL, ModelParams, UsageError, require
from .schemes import SignalingScheme, Variant, cells, check_variant, scores

BATCH_SIZE = 1 << 18
FULL_GRID_RESOLUTION = 0.02


@dataclass(frozen=True)
class SimConfig:
    n_students: int
    seed: int = 0
    variant: Optional[Variant] = None
    workers: int = 1

    def __post_init__(self):
        if int(self.n_students) < 1:
            raise UsageError(f"n_students must be >= 1, got {self.n_students}")
        object.__setattr__(self, "n_students", int(self.n_students))
        if self.variant is not None:
            object.__setattr__(self, "variant", Variant(self.variant))


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float

    def z(self, expected: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == expected else math.copysign(math.inf, self.mean - expected)
        return (self.mean - expected) / self.stderr


@dataclass(frozen=True)
class SimEstimate:
    utility: Estimate
    fpr: Estimate
    fnr: Estimate
    university_utility: Estimate
    n_students: int
    disobeyed: int  # students admitted against, or rejected despite, their signal

    METRICS = ("utility", "fpr", "fnr", "university_utility")

    def to_dict(self) -> dict:
        d = {k: asdict(getattr(self, k)) for k in self.METRICS}
        d["n_students"] = self.n_students
        d["disobeyed"] = self.disobeyed
        return d

    @classmethod
    def from_dict(cls, d) -> "SimEstimate":
        est = {k: Estimate(float(d[k]["mean"]), float(d[k]["stderr"])) for k in cls.METRICS}
        return cls(**est, n_students=int(d["n_students"]), disobeyed=int(d["disobeyed"]))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _university_table(params: ModelParams, scheme: SignalingScheme) -> Dict[Tuple[bool, Optional[int]], bool]:
    """Accept decision for every (signal, score) from the exact posterior."""
    p, q, d = params.p, params.q, params.delta
    prior = {1: p, 0: 1 - p}

    def lik(acc, obs, t):
        return acc if obs == t else 1 - acc

    table = {}
    for s in scores(scheme.variant):
        for sig in (True, False):
            gain = loss = 0.0
            for g, s_ in cells(scheme.variant):
                if s_ != s:
                    continue
                x = scheme.prob(g, s)
                w = x if sig else 1 - x
                for t in (1, 0):
                    pr = prior[t] * lik(q, g, t) * (1.0 if s is None else lik(d, s, t)) * w
                    if t == 1:
                        gain += pr
                    else:
                        loss += pr
            total = gain + loss
            table[(sig, s)] = total > 0 and gain - loss >= -TIE_TOL * total
    return table


def _run_batch(params: ModelParams, probs: np.ndarray, table, seed_seq, n: int):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    t = rng.random(n) < params.p
    g = np.where(rng.random(n) < params.q, t, ~t)
    if params.delta is None:
        idx = np.where(g, 0, 1)
        s = None
    else:
        s = np.where(rng.random(n) < params.delta, t, ~t)
        # cell order (1,1), (1,0), (0,1), (0,0)
        idx = 2 * (~g).astype(np.intp) + (~s).astype(np.intp)
    sig = rng.random(n) < probs[idx]
    if s is None:
        admit = np.where(sig, table[(True, None)], table[(False, None)])
    else:
        admit = np.where(
            s,
            np.where(sig, table[(True, 1)], table[(False, 1)]),
            np.where(sig, table[(True, 0)], table[(False, 0)]),
        )
    return (
        int(t.sum()),
        int((admit & t).sum()),
        int((admit & ~t).sum()),
        int((admit != sig).sum()),
    )


def _binomial(k: int, n: int) -> Estimate:
    if n == 0:
        return Estimate(math.nan, math.nan)
    m = k / n
    return Estimate(m, math.sqrt(m * (1 - m) / n))


def simulate(params: ModelParams, scheme: SignalingScheme, config: SimConfig) -> SimEstimate:
    """Draw a population, apply the scheme, and let the university best-respond.

    Batches of :data:`BATCH_SIZE` students use independent Philox streams
    spawned from ``config.seed``; counts are merged exactly, so the result
    does not depend on ``config.workers``.
    """
    check_variant(params, scheme.variant)
    if config.variant is not None and config.variant is not scheme.variant:
        raise UsageError("config variant does not match the scheme")
    table = _university_table(params, scheme)
    probs = np.array([scheme.prob(g, s) for g, s in cells(scheme.variant)])
    n = config.n_students
    sizes = [BATCH_SIZE] * (n // BATCH_SIZE)
    if n % BATCH_SIZE:
        sizes.append(n % BATCH_SIZE)
    children = np.random.SeedSequence(config.seed).spawn(len(sizes))
    jobs = list(zip(children, sizes))
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            parts = list(ex.map(lambda j: _run_batch(params, probs, table, *j), jobs))
    else:
        parts = [_run_batch(params, probs, table, *j) for j in jobs]
    n_hi, adm_hi, adm_lo, disobeyed = (sum(col) for col in zip(*parts))
    n_lo = n - n_hi
    admitted = adm_hi + adm_lo
    util = _binomial(admitted, n)
    fnr = _binomial(n_hi - adm_hi, n_hi)
    uu = (adm_hi - adm_lo) / n
    uu_var = max(admitted / n - uu * uu, 0.0)
    return SimEstimate(
        utility=util,
        fpr=_binomial(adm_lo, n_lo),
        fnr=fnr,
        university_utility=Estimate(uu, math.sqrt(uu_var / n)),
        n_students=n,
        disobeyed=disobeyed,
    )


# -- grid search ------------------------------------------------------------

def _block_masses(params: ModelParams, s: Optional[int]):
    """Masses of high and low types in the g=1 and g=0 cells at score ``s``."""
    p, q, d = params.p, params.q, params.delta
    ls = 1.0 if s is None else (d if s == 1 else 1 - d)
    ls0 = 1.0 if s is None else (1 - d if s == 1 else d)
    hi = np.array([p * q * ls, p * (1 - q) * ls])
    lo = np.array([(1 - p) * (1 - q) * ls0, (1 - p) * q * ls0])
    return hi, lo


def _grid_best(hi, lo, xa, xb):
    mass_a, mass_b = hi[0] + lo[0], hi[1] + lo[1]
    gain_a, gain_b = hi[0] - lo[0], hi[1] - lo[1]
    sent = mass_a * xa[:, None] + mass_b * xb[None, :]
    net = gain_a * xa[:, None] + gain_b * xb[None, :]
    value = np.where(net >= -TIE_TOL * sent, sent, -np.inf)
    i, j = np.unravel_index(np.argmax(value), value.shape)
    return float(value[i, j]), float(xa[i]), float(xb[j])


def _solve_block(hi, lo, resolution: float):
    """Maximise the accept mass of one score block subject to break-even."""
    grid = np.linspace(0.0, 1.0, int(round(1.0 / resolution)) + 1)
    best = _grid_best(hi, lo, grid, grid)
    if not math.isfinite(best[0]):
        raise RuntimeError("grid search found no feasible scheme")
    step = resolution / 100

    def local(c):
        a, b = max(0.0, c - resolution), min(1.0, c + resolution)
        return np.linspace(a, b, int(round((b - a) / step)) + 1)

    fine = _grid_best(hi, lo, local(best[1]), local(best[2]))
    return max(best, fine, key=lambda r: r[0])


def _full_grid(params: ModelParams, resolution: float):
    grid = np.linspace(0.0, 1.0, int(round(1.0 / resolution)) + 1)
    best = (-np.inf, None)
    hi1, lo1 = _block_masses(params, 1)
    hi0, lo0 = _block_masses(params, 0)
    x11 = grid[:, None, None, None]
    x01 = grid[None, :, None, None]
    x00 = grid[None, None, None, :]
    for x10v in grid:
        x10 = np.full((1, 1, 1, 1), x10v)
        sent1 = (hi1[0] + lo1[0]) * x11 + (hi1[1] + lo1[1]) * x01
        net1 = (hi1[0] - lo1[0]) * x11 + (hi1[1] - lo1[1]) * x01
        sent0 = (hi0[0] + lo0[0]) * x10 + (hi0[1] + lo0[1]) * x00
        net0 = (hi0[0] - lo0[0]) * x10 + (hi0[1] - lo0[1]) * x00
        ok = (net1 >= -TIE_TOL * sent1) & (net0 >= -TIE_TOL * sent0)
        value = np.where(ok, sent1 + sent0, -np.inf)
        k = np.unravel_index(np.argmax(value), value.shape)
        if value[k] > best[0]:
            best = (float(value[k]), (grid[k[0]], grid[k[1]], x10v, grid[k[3]]))
    utility, (a, b, c, e) = best
    return SignalingScheme(Variant.WITH_TEST, {(1, 1): a, (0, 1): b, (1, 0): c, (0, 0): e}), utility


def brute_force_optimal(
    params: ModelParams,
    variant: Optional[Variant] = None,
    resolution: float = 1e-3,
    full_grid: bool = False,
) -> Tuple[SignalingScheme, float]:
    """Best obedient binary scheme on a grid of accept probabilities.

    The break-even constraint for the accept signal only couples cells
    sharing a score, so each score block is searched as its own 2-d grid
    (then refined once at ``resolution / 100``).  ``full_grid`` instead
    searches all four cells jointly at a coarse 0.02 step.
    """
    variant = Variant.for_params(params) if variant is None else Variant(variant)
    check_variant(params, variant)
    if not 0 < resolution <= 0.1:
        raise UsageError(f"resolution must be in (0, 0.1], got {resolution}")
    require(params, test="relaxed" if params.has_test else None)
    if full_grid:
        if variant is Variant.NO_TEST:
            hi, lo = _block_masses(params, None)
            u, a, b = _grid_best(hi, lo, *(np.linspace(0, 1, 51),) * 2)
            return SignalingScheme(variant, {(1, None): a, (0, None): b}), u
        return _full_grid(params, FULL_GRID_RESOLUTION)
    probs = {}
    utility = 0.0
    for s in scores(variant):
        hi, lo = _block_masses(params, s)
        u, a, b = _solve_block(hi, lo, resolution)
        probs[(1, s)], probs[(0, s)] = a, b
        utility += u
    return SignalingScheme(variant, probs), utility
