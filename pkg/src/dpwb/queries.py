"""Differentially private count, sum, mean, variance and standard deviation.

Every query is described by a :class:`QueryPlan`. :func:`prepare` computes
the deterministic part once (clipping, true statistics, sensitivities) and
returns a :class:`PreparedQuery` whose ``release`` draws fresh noise, so a
benchmark can repeat a release many times without redoing the data pass.
The ``dp_*`` functions are thin wrappers that prepare and release once.

Composite queries split their budget between sub-releases (half each by
default) and charge them to the accountant atomically, before any noise is
drawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from dpwb import mechanisms as mech
from dpwb.accountant import BudgetLedger
from dpwb.datagen import Dataset
from dpwb.errors import InvalidArgumentError, UnsupportedQueryError
from dpwb.kinds import DpDefinition, MeanStrategy, QueryKind, VarStrategy
from dpwb.mechanisms import Bounds, MechanismKind, MechanismSpec
from dpwb.sensitivity import SamplerConfig, analytic_sensitivity, population_variance, sample_sensitivity

LAPLACE = MechanismSpec(MechanismKind.LAPLACE_PURE)


@dataclass(frozen=True)
class QueryResult:
    value: float
    epsilon_spent: float
    mechanism: MechanismSpec
    definition: DpDefinition
    query: QueryKind
    parts: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class QueryPlan:
    """How to answer one query.

    ``mechanism`` drives the main release (the sum, for sum-over-count
    means); ``count_mechanism`` the noisy count of composite means and
    defaults to the same kind. ``include_zero_values=False`` counts only
    non-zero records, reproducing a known library pitfall. ``sampler``
    replaces the analytic sensitivity by the empirical sampler.
    """

    query: QueryKind
    mechanism: MechanismSpec = LAPLACE
    definition: DpDefinition = DpDefinition.BOUNDED
    count_mechanism: Optional[MechanismSpec] = None
    round_count: bool = True
    include_zero_values: bool = True
    mean_strategy: MeanStrategy = MeanStrategy.DIRECT
    var_strategy: VarStrategy = VarStrategy.MOMENTS
    split: float = 0.5
    sampler: Optional[SamplerConfig] = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "query", QueryKind(self.query))
        object.__setattr__(self, "definition", DpDefinition(self.definition))
        object.__setattr__(self, "mean_strategy", MeanStrategy(self.mean_strategy))
        object.__setattr__(self, "var_strategy", VarStrategy(self.var_strategy))
        if not 0 < self.split < 1:
            raise InvalidArgumentError(f"budget split must lie in (0, 1), got {self.split}")
        if not self.label:
            object.__setattr__(self, "label", self.mechanism.label)


def clip(data: Dataset, bounds: Bounds) -> Dataset:
    """Clamp every record into ``bounds``; order and length are kept."""
    return Dataset(np.clip(data.records, bounds.lower, bounds.upper), meta=data.meta, dataset_id=data.dataset_id)


def true_value(query: QueryKind, records: np.ndarray) -> float:
    """Deterministic (non-private) answer used as the error baseline."""
    query = QueryKind(query)
    records = np.asarray(records, dtype=float)
    if query is QueryKind.COUNT:
        return float(records.size)
    if query is QueryKind.SUM:
        return float(records.sum())
    if query is QueryKind.MEAN:
        return float(records.mean())
    if query is QueryKind.VAR:
        return population_variance(records)
    return math.sqrt(population_variance(records))


def std_from_variance(variance: float) -> float:
    """Post-processing from a variance release to a standard deviation."""
    return math.sqrt(max(variance, 0.0))


def squared_bounds(bounds: Bounds) -> Bounds:
    lo, hi = bounds.lower, bounds.upper
    if lo >= 0:
        return Bounds(lo * lo, hi * hi)
    if hi <= 0:
        return Bounds(hi * hi, lo * lo)
    return Bounds(0.0, max(lo * lo, hi * hi))


def _snapping_radius(natural: float, sensitivity: float, eps: float) -> float:
    # never let the grid outgrow the clamp interval
    radius = abs(natural)
    if sensitivity > 0:
        radius = max(radius, mech.snapping_grid(sensitivity, eps)[1])
    return radius if radius > 0 else 1.0


def _release(spec: MechanismSpec, value: float, sensitivity: float, eps: float, rng, domain: Bounds, size=None):
    radius = max(abs(domain.lower), abs(domain.upper))
    spec = spec.with_defaults(bounds=domain, clamp_radius=_snapping_radius(radius, sensitivity, eps))
    if spec.kind.integer_valued:
        if not float(value).is_integer():
            raise InvalidArgumentError(f"{spec.kind.value} needs an integer-valued statistic, got {value}")
        if not float(sensitivity).is_integer():
            raise InvalidArgumentError(f"{spec.kind.value} needs an integer sensitivity, got {sensitivity}")
    out = mech.release(spec, value, sensitivity, eps, rng, size)
    return np.asarray(out, dtype=float), spec


@dataclass(frozen=True)
class _Part:
    """One noisy sub-release of a query."""

    name: str
    value: float
    sensitivity: float
    spec: MechanismSpec
    domain: Bounds
    share: float


@dataclass
class PreparedQuery:
    """A query with its deterministic part computed; see :func:`prepare`."""

    plan: QueryPlan
    truth: float
    n: int
    bounds: Optional[Bounds]
    parts: list[_Part] = field(repr=False, default_factory=list)

    def part_epsilons(self, eps: float) -> list[tuple[str, float]]:
        """Budget of each sub-release; the last one takes the remainder."""
        eps = float(eps)
        out = []
        left = eps
        for i, part in enumerate(self.parts):
            share = left if i == len(self.parts) - 1 else eps * part.share
            out.append((f"{self.plan.query.value}/{part.name}", share))
            left -= share
        return out

    def _draw(self, eps: float, rng, size, accountant):
        eps = mech._check_epsilon(eps)
        budgets = self.part_epsilons(eps)
        if accountant is not None:
            accountant.spend_all((e, name) for name, e in budgets)
        draws = [_release(p.spec, p.value, p.sensitivity, e, rng, p.domain, size) for p, (_, e) in zip(self.parts, budgets)]
        return budgets, self._combine([v for v, _ in draws]), draws[0][1]

    def release(self, eps: float, rng: np.random.Generator, accountant: Optional[BudgetLedger] = None) -> QueryResult:
        budgets, value, spec = self._draw(eps, rng, None, accountant)
        spent = 0.0
        for _, e in budgets:
            spent += e
        return QueryResult(
            value=float(value),
            epsilon_spent=spent,
            mechanism=spec,
            definition=self.plan.definition,
            query=self.plan.query,
            parts=tuple(budgets),
        )

    def sample(self, eps: float, rng: np.random.Generator, n_runs: int) -> np.ndarray:
        """``n_runs`` independent releases at ``eps``, without accounting."""
        return self._draw(eps, rng, n_runs, None)[1]

    def _combine(self, values: list[np.ndarray]) -> np.ndarray:
        plan = self.plan
        q = plan.query
        if q is QueryKind.COUNT:
            (v,) = values
            return np.maximum(np.rint(v), 0.0) if plan.round_count else v
        if q is QueryKind.SUM:
            return values[0]
        if q is QueryKind.MEAN:
            return self._mean(values)
        if plan.var_strategy is VarStrategy.DIRECT:
            var = values[0]
        else:
            half = len(values) // 2
            m1 = self._mean(values[:half])
            m2 = self._mean(values[half:])
            var = np.maximum(m2 - m1 * m1, 0.0)
        return np.sqrt(np.maximum(var, 0.0)) if q is QueryKind.STD else var

    @staticmethod
    def _mean(values: list[np.ndarray]) -> np.ndarray:
        if len(values) == 1:
            return values[0]
        noisy_sum, noisy_count = values
        return noisy_sum / np.maximum(noisy_count, 1.0)


def _mean_parts(plan: QueryPlan, x: np.ndarray, bounds: Bounds, prefix: str, share: float, sensitivity=None) -> list[_Part]:
    n = x.size
    count_spec = plan.count_mechanism or MechanismSpec(plan.mechanism.kind)
    if plan.mean_strategy is MeanStrategy.SUM_OVER_COUNT:
        sum_sens = analytic_sensitivity(QueryKind.SUM, bounds, max(n, 1), plan.definition)
        sum_domain = Bounds(n * bounds.lower, n * bounds.upper)
        return [
            _Part(f"{prefix}sum", float(x.sum()), sum_sens, plan.mechanism, sum_domain, share * plan.split),
            _Part(f"{prefix}count", float(n), 1.0, count_spec, Bounds(0, n), share * (1 - plan.split)),
        ]
    if n == 0:
        raise InvalidArgumentError("direct mean of an empty dataset")
    if sensitivity is None:
        sensitivity = analytic_sensitivity(QueryKind.MEAN, bounds, n, plan.definition)
    return [_Part(f"{prefix}mean", float(x.mean()), sensitivity, plan.mechanism, bounds, share)]


def prepare(
    plan: QueryPlan,
    data: Dataset,
    bounds: Optional[Bounds] = None,
    sampler_rng: Optional[np.random.Generator] = None,
) -> PreparedQuery:
    """Compute everything about ``plan`` on ``data`` that does not need noise.

    ``bounds`` is required for every query but count. When ``plan.sampler``
    is set, ``sampler_rng`` drives the sensitivity sampler.
    """
    q = plan.query
    raw = data.records if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n = raw.size
    truth = true_value(q, raw) if (n > 0 or q in (QueryKind.COUNT, QueryKind.SUM)) else float("nan")
    prepared = PreparedQuery(plan, truth, n, bounds)

    if q is QueryKind.COUNT:
        if plan.sampler is not None:
            raise UnsupportedQueryError("the sensitivity sampler does not support count queries")
        count = n if plan.include_zero_values else int(np.count_nonzero(raw))
        prepared.parts = [_Part("count", float(count), 1.0, plan.mechanism, Bounds(0, max(n, 0)), 1.0)]
        return prepared

    if bounds is None:
        raise InvalidArgumentError(f"{q.value} query needs clipping bounds")
    x = np.clip(raw, bounds.lower, bounds.upper)

    sampled = None
    if plan.sampler is not None:
        composite = (q is QueryKind.MEAN and plan.mean_strategy is MeanStrategy.SUM_OVER_COUNT) or (
            q in (QueryKind.VAR, QueryKind.STD) and plan.var_strategy is VarStrategy.MOMENTS
        )
        if composite:
            raise UnsupportedQueryError("the sensitivity sampler applies to single-release queries only")
        if sampler_rng is None:
            raise InvalidArgumentError("sampled sensitivity needs sampler_rng")
        sampler_query = QueryKind.VAR if q is QueryKind.STD else q
        sampled = sample_sensitivity(sampler_query, Dataset(x), plan.sampler, sampler_rng)

    if q is QueryKind.SUM:
        sens = sampled if sampled is not None else analytic_sensitivity(q, bounds, max(n, 1), plan.definition)
        domain = Bounds(n * bounds.lower, n * bounds.upper)
        prepared.parts = [_Part("sum", float(x.sum()), sens, plan.mechanism, domain, 1.0)]
        return prepared

    if q is QueryKind.MEAN:
        prepared.parts = _mean_parts(plan, x, bounds, "", 1.0, sampled)
        return prepared

    if n < 2:
        raise InvalidArgumentError(f"{q.value} query needs at least 2 records, got {n}")
    if plan.var_strategy is VarStrategy.DIRECT:
        sens = sampled if sampled is not None else analytic_sensitivity(QueryKind.VAR, bounds, n, plan.definition)
        half_width = bounds.width / 2
        domain = Bounds(0.0, half_width * half_width)
        prepared.parts = [_Part("var", population_variance(x), sens, plan.mechanism, domain, 1.0)]
        return prepared

    sq_bounds = squared_bounds(bounds)
    prepared.parts = _mean_parts(plan, x, bounds, "mean_x:", plan.split) + _mean_parts(
        plan, np.clip(x * x, sq_bounds.lower, sq_bounds.upper), sq_bounds, "mean_x2:", 1 - plan.split
    )
    return prepared


def dp_count(
    data: Dataset,
    eps: float,
    mech: MechanismSpec = LAPLACE,
    round_output: bool = True,
    include_zero_values: bool = True,
    *,
    rng: np.random.Generator,
    definition: DpDefinition = DpDefinition.UNBOUNDED,
    accountant: Optional[BudgetLedger] = None,
) -> QueryResult:
    """Noisy number of records, sensitivity 1.

    With ``round_output`` the release is rounded to the nearest integer and
    clamped at 0. ``include_zero_values=False`` counts only non-zero records;
    it exists to study that pitfall and is not a sound way to count rows.
    """
    plan = QueryPlan(
        QueryKind.COUNT,
        mechanism=mech,
        definition=definition,
        round_count=round_output,
        include_zero_values=include_zero_values,
    )
    return prepare(plan, data).release(eps, rng, accountant)


def dp_sum(
    data: Dataset,
    bounds: Bounds,
    eps: float,
    definition: DpDefinition = DpDefinition.BOUNDED,
    mech: MechanismSpec = LAPLACE,
    *,
    rng: np.random.Generator,
    accountant: Optional[BudgetLedger] = None,
) -> QueryResult:
    """Noisy sum of the records clipped to ``bounds``."""
    plan = QueryPlan(QueryKind.SUM, mechanism=mech, definition=definition)
    return prepare(plan, data, bounds).release(eps, rng, accountant)


def dp_mean(
    data: Dataset,
    bounds: Bounds,
    eps: float,
    definition: DpDefinition = DpDefinition.BOUNDED,
    strategy: MeanStrategy = MeanStrategy.DIRECT,
    mech: MechanismSpec = LAPLACE,
    count_mech: Optional[MechanismSpec] = None,
    *,
    rng: np.random.Generator,
    accountant: Optional[BudgetLedger] = None,
) -> QueryResult:
    """Noisy mean of the clipped records.

    ``DIRECT`` adds noise calibrated to the mean's sensitivity;
    ``SUM_OVER_COUNT`` divides a noisy sum by a noisy count (floored at 1),
    each using half the budget.
    """
    plan = QueryPlan(
        QueryKind.MEAN, mechanism=mech, definition=definition, mean_strategy=strategy, count_mechanism=count_mech
    )
    return prepare(plan, data, bounds).release(eps, rng, accountant)


def dp_variance(
    data: Dataset,
    bounds: Bounds,
    eps: float,
    definition: DpDefinition = DpDefinition.BOUNDED,
    strategy: VarStrategy = VarStrategy.MOMENTS,
    mech: Optional[MechanismSpec] = None,
    mean_strategy: MeanStrategy = MeanStrategy.DIRECT,
    *,
    rng: np.random.Generator,
    accountant: Optional[BudgetLedger] = None,
) -> QueryResult:
    """Noisy population variance of the clipped records.

    ``MOMENTS`` releases the means of ``x`` and ``x**2`` with half the budget
    each and returns ``E[x^2] - E[x]^2`` clamped at 0. ``DIRECT`` releases the
    variance once through bounded-domain Laplace on ``[0, (width/2)^2]``.
    """
    if mech is None:
        mech = MechanismSpec(MechanismKind.LAPLACE_BOUNDED_DOMAIN) if strategy == VarStrategy.DIRECT else LAPLACE
    plan = QueryPlan(QueryKind.VAR, mechanism=mech, definition=definition, var_strategy=strategy, mean_strategy=mean_strategy)
    return prepare(plan, data, bounds).release(eps, rng, accountant)


def dp_std(
    data: Dataset,
    bounds: Bounds,
    eps: float,
    definition: DpDefinition = DpDefinition.BOUNDED,
    strategy: VarStrategy = VarStrategy.MOMENTS,
    mech: Optional[MechanismSpec] = None,
    mean_strategy: MeanStrategy = MeanStrategy.DIRECT,
    *,
    rng: np.random.Generator,
    accountant: Optional[BudgetLedger] = None,
) -> QueryResult:
    """Square root of :func:`dp_variance`; costs exactly the variance's budget."""
    result = dp_variance(
        data, bounds, eps, definition, strategy, mech, mean_strategy, rng=rng, accountant=accountant
    )
    return replace(result, value=std_from_variance(result.value), query=QueryKind.STD)
