"""Statistical test of the epsilon-DP inequality for a sampler.

Runs the mechanism many times on two neighbouring inputs ``v`` and
``v + delta_f``, histograms both samples over shared bins and bounds the
largest log-probability ratio with Clopper-Pearson intervals (Bonferroni
corrected over bins and both samples). Every bin is an event ``S``, so a
ratio provably above ``eps`` disproves the claim.

Verdicts:

* ``fail`` -- the lower confidence bound of some bin's ratio exceeds ``eps``;
* ``pass`` -- the upper confidence bound of every bin's ratio is below
  ``1.05 * eps``;
* ``inconclusive`` -- neither (typically too few trials).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import stats

from dpwb.rng import random_source

PASS_MARGIN = 1.05
TAIL_QUANTILE = 0.05


@dataclass(frozen=True)
class DpTestReport:
    mechanism: str
    epsilon: float
    max_log_ratio: float
    lower_bound: float
    upper_bound: float
    verdict: str
    trials: int
    bins: int
    bins_used: int

    def to_dict(self) -> dict:
        return asdict(self)


def clopper_pearson(count: np.ndarray, n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided ``1 - alpha`` intervals for binomial proportions."""
    count = np.asarray(count, dtype=float)
    lo = np.where(count > 0, stats.beta.ppf(alpha / 2, count, n - count + 1), 0.0)
    hi = np.where(count < n, stats.beta.ppf(1 - alpha / 2, count + 1, n - count), 1.0)
    return lo, hi


def _log_ratio(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(a) - np.log(b)


def dp_statistical_test(
    mechanism: Callable,
    delta_f: float,
    eps: float,
    trials: int = 10**6,
    bins: int = 10,
    *,
    value: float = 0.0,
    seed: int = 0,
    alpha: float = 1e-3,
    label: str = "",
) -> DpTestReport:
    """Test ``mechanism(value, rng, size)`` for ``eps``-DP at sensitivity ``delta_f``.

    Bins are equal-width between the pooled 5% and 95% quantiles, with the
    outermost bins extended to cover the tails.
    """
    if trials < 2 or bins < 1:
        raise ValueError("need trials >= 2 and bins >= 1")
    a = np.asarray(mechanism(value, random_source(seed, 0), trials), dtype=float)
    b = np.asarray(mechanism(value + delta_f, random_source(seed, 1), trials), dtype=float)

    pooled = np.concatenate([a, b])
    lo, hi = np.quantile(pooled, [TAIL_QUANTILE, 1 - TAIL_QUANTILE])
    interior = np.linspace(lo, hi, bins + 1)[1:-1] if hi > lo else np.array([lo])
    n_bins = interior.size + 1
    ca = np.bincount(np.searchsorted(interior, a, side="right"), minlength=n_bins)
    cb = np.bincount(np.searchsorted(interior, b, side="right"), minlength=n_bins)

    used = (ca + cb) > 0
    bins_used = int(used.sum())
    if bins_used == 0 or min(ca.max(), cb.max()) == 0:
        return DpTestReport(label, eps, math.nan, math.nan, math.nan, "inconclusive", trials, n_bins, bins_used)
    ca, cb = ca[used], cb[used]

    level = alpha / (2 * bins_used)
    a_lo, a_hi = clopper_pearson(ca, trials, level)
    b_lo, b_hi = clopper_pearson(cb, trials, level)

    point = np.abs(_log_ratio(ca / trials, cb / trials))
    lower = np.maximum(_log_ratio(a_lo, b_hi), _log_ratio(b_lo, a_hi))
    upper = np.maximum(_log_ratio(a_hi, b_lo), _log_ratio(b_hi, a_lo))

    max_point = float(np.max(point))
    max_lower = float(np.max(lower))
    max_upper = float(np.max(upper))
    if max_lower > eps:
        verdict = "fail"
    elif max_upper < PASS_MARGIN * eps:
        verdict = "pass"
    else:
        verdict = "inconclusive"
    return DpTestReport(label, eps, max_point, max_lower, max_upper, verdict, trials, n_bins, bins_used)
