"""Analytic l1-sensitivities and an empirical sensitivity sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from dpwb.datagen import Dataset
from dpwb.errors import InvalidArgumentError, UnsupportedQueryError
from dpwb.kinds import DpDefinition, QueryKind
from dpwb.mechanisms import Bounds

SUPPORTED_PAIRS = (
    (QueryKind.COUNT, DpDefinition.BOUNDED),
    (QueryKind.COUNT, DpDefinition.UNBOUNDED),
    (QueryKind.SUM, DpDefinition.BOUNDED),
    (QueryKind.SUM, DpDefinition.UNBOUNDED),
    (QueryKind.MEAN, DpDefinition.BOUNDED),
    (QueryKind.MEAN, DpDefinition.UNBOUNDED),
    (QueryKind.VAR, DpDefinition.BOUNDED),
)


def analytic_sensitivity(query: QueryKind, bounds: Bounds, n: int, definition: DpDefinition) -> float:
    """Worst-case change of ``query`` between neighbouring datasets of size ``n``.

    Records are assumed clipped to ``bounds``. Under the bounded definition
    neighbours replace one record; under the unbounded one they add or
    remove one (both datasets non-empty).

    ============  ===================  ========================
    query         bounded              unbounded
    ============  ===================  ========================
    count         1                    1
    sum           u - l                max(|l|, |u|)
    mean          (u - l) / n          (u - l) / n, n >= 2
    var           (u - l)^2 (n-1)/n^2  not supported
    ============  ===================  ========================
    """
    query = QueryKind(query)
    definition = DpDefinition(definition)
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n}")
    if (query, definition) not in SUPPORTED_PAIRS:
        pairs = ", ".join(f"{q.value}/{d.value}" for q, d in SUPPORTED_PAIRS)
        raise UnsupportedQueryError(
            f"no analytic sensitivity for {query.value} under {definition.value} DP; supported: {pairs}"
        )
    lo, hi = bounds.lower, bounds.upper
    width = hi - lo
    if query is QueryKind.COUNT:
        return 1.0
    if query is QueryKind.SUM:
        return width if definition is DpDefinition.BOUNDED else max(abs(lo), abs(hi))
    if query is QueryKind.MEAN:
        if definition is DpDefinition.UNBOUNDED and n == 1:
            # only the add-one neighbour exists
            return width / 2
        return width / n
    return width * width * (n - 1) / (n * n)


def population_variance(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    mean = x.mean()
    return float(np.mean((x - mean) ** 2))


QUERY_FUNCTIONS: dict[QueryKind, Callable[[np.ndarray], float]] = {
    QueryKind.SUM: lambda x: float(np.sum(x)),
    QueryKind.MEAN: lambda x: float(np.mean(x)),
    QueryKind.VAR: population_variance,
    QueryKind.STD: lambda x: math.sqrt(population_variance(x)),
}


@dataclass(frozen=True)
class SamplerConfig:
    """Sensitivity sampler settings.

    ``gamma`` is the probability slack of the random-DP guarantee, ``m`` the
    number of neighbouring pairs and ``resample_size`` the size of each
    sampled dataset (``None`` means the size of the base data).
    """

    gamma: float = 0.1
    m: int = 1000
    resample_size: int | None = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise InvalidArgumentError(f"gamma must lie in (0, 1), got {self.gamma}")
        if int(self.m) != self.m or self.m < math.ceil(1 / self.gamma):
            raise InvalidArgumentError(f"m must be an integer >= ceil(1/gamma) = {math.ceil(1 / self.gamma)}")
        if self.resample_size is not None and self.resample_size < 2:
            raise InvalidArgumentError("resample_size must be at least 2")

    @property
    def order_index(self) -> int:
        """1-based order statistic ``ceil(m * (1 - gamma))``, computed exactly."""
        return math.ceil(self.m * (1 - Fraction(repr(self.gamma))))


def sample_sensitivity(
    query: QueryKind,
    base_data: Dataset,
    config: SamplerConfig,
    rng: np.random.Generator,
) -> float:
    """Estimate the sensitivity of ``query`` from resampled neighbouring pairs.

    Each pair is a dataset drawn with replacement from ``base_data`` and a
    copy with one random record replaced by another draw. The returned value
    is the ``ceil(m * (1 - gamma))``-th smallest of the ``m`` absolute output
    differences, which bounds the sensitivity only with probability roughly
    ``1 - gamma`` (random DP, not pure DP).

    Raises
    ------
    UnsupportedQueryError
        For count: every resampled neighbour has the same size, so the
        sampled differences are all zero and say nothing about the count.
    """
    query = QueryKind(query)
    if query is QueryKind.COUNT:
        raise UnsupportedQueryError("the sensitivity sampler does not support count queries")
    records = base_data.records if isinstance(base_data, Dataset) else np.asarray(base_data, dtype=float)
    if records.size < 2:
        raise InvalidArgumentError("sensitivity sampler needs at least 2 base records")
    f = QUERY_FUNCTIONS[query]
    k = config.resample_size or records.size
    diffs = np.empty(config.m)
    for i in range(config.m):
        d = records[rng.integers(0, records.size, k)]
        d_prime = d.copy()
        d_prime[rng.integers(0, k)] = records[rng.integers(0, records.size)]
        diffs[i] = abs(f(d) - f(d_prime))
    diffs.sort()
    return float(diffs[config.order_index - 1])
