"""Named query plans: raw mechanisms and library-analog presets.

A raw selector is a mechanism name (``laplace-pure``, ``snapping``, ...)
optionally suffixed with ``+round`` to round count releases. A preset bundles
per-query choices that mimic the defaults of a well-known DP library:

==================  ============================  ==========================  ==============================  ==========================
preset              count                         sum                         mean                            var
==================  ============================  ==========================  ==============================  ==========================
diffprivlib-like    geometric truncated,          Laplace truncated           Laplace truncated               bounded-domain Laplace
                    non-zero records only
smartnoise-like     geometric                     snapping                    snapping sum / geometric count  moments of the mean
google-like         snapping, rounded             snapping                    snapping sum / snapping count   moments of the mean
diffpriv-like       Laplace, not rounded          Laplace                     Laplace                         Laplace (direct)
diffpriv-sampler    (unsupported)                 Laplace, sampled sens.      Laplace, sampled sens.          Laplace, sampled sens.
chorus-like         Laplace, not rounded          Laplace                     Laplace sum / Laplace count     (unsupported)
==================  ============================  ==========================  ==============================  ==========================

These are analogs of the libraries' default choices, not reimplementations.
"""

from __future__ import annotations

from typing import Iterable

from dpwb.errors import UnsupportedQueryError
from dpwb.kinds import DpDefinition, MeanStrategy, QueryKind, VarStrategy
from dpwb.mechanisms import MechanismKind, MechanismSpec
from dpwb.queries import QueryPlan
from dpwb.sensitivity import SamplerConfig

B, U = DpDefinition.BOUNDED, DpDefinition.UNBOUNDED
K = MechanismKind

_LAP = MechanismSpec(K.LAPLACE_PURE)
_LAP_TRUNC = MechanismSpec(K.LAPLACE_TRUNCATED)
_LAP_BD = MechanismSpec(K.LAPLACE_BOUNDED_DOMAIN)
_GEO = MechanismSpec(K.GEOMETRIC_PURE)
_GEO_TRUNC = MechanismSpec(K.GEOMETRIC_TRUNCATED)
_SNAP = MechanismSpec(K.SNAPPING)


def _preset_table() -> dict[str, dict[QueryKind, dict]]:
    soc = MeanStrategy.SUM_OVER_COUNT
    return {
        "diffprivlib-like": {
            QueryKind.COUNT: dict(mechanism=_GEO_TRUNC, definition=U, include_zero_values=False),
            QueryKind.SUM: dict(mechanism=_LAP_TRUNC, definition=B),
            QueryKind.MEAN: dict(mechanism=_LAP_TRUNC, definition=B),
            QueryKind.VAR: dict(mechanism=_LAP_BD, definition=B, var_strategy=VarStrategy.DIRECT),
        },
        "smartnoise-like": {
            QueryKind.COUNT: dict(mechanism=_GEO, definition=U),
            QueryKind.SUM: dict(mechanism=_SNAP, definition=B),
            QueryKind.MEAN: dict(mechanism=_SNAP, count_mechanism=_GEO, definition=B, mean_strategy=soc),
            QueryKind.VAR: dict(mechanism=_SNAP, count_mechanism=_GEO, definition=B, mean_strategy=soc),
        },
        "google-like": {
            QueryKind.COUNT: dict(mechanism=_SNAP, definition=U),
            QueryKind.SUM: dict(mechanism=_SNAP, definition=U),
            QueryKind.MEAN: dict(mechanism=_SNAP, definition=U, mean_strategy=soc),
            QueryKind.VAR: dict(mechanism=_SNAP, definition=U, mean_strategy=soc),
        },
        "diffpriv-like": {
            QueryKind.COUNT: dict(mechanism=_LAP, definition=U, round_count=False),
            QueryKind.SUM: dict(mechanism=_LAP, definition=B),
            QueryKind.MEAN: dict(mechanism=_LAP, definition=B),
            QueryKind.VAR: dict(mechanism=_LAP, definition=B, var_strategy=VarStrategy.DIRECT),
        },
        "diffpriv-sampler": {
            QueryKind.SUM: dict(mechanism=_LAP, definition=B, sampler=SamplerConfig()),
            QueryKind.MEAN: dict(mechanism=_LAP, definition=B, sampler=SamplerConfig()),
            QueryKind.VAR: dict(
                mechanism=_LAP, definition=B, var_strategy=VarStrategy.DIRECT, sampler=SamplerConfig()
            ),
        },
        "chorus-like": {
            QueryKind.COUNT: dict(mechanism=_LAP, definition=U, round_count=False),
            QueryKind.SUM: dict(mechanism=_LAP, definition=U),
            QueryKind.MEAN: dict(mechanism=_LAP, definition=U, mean_strategy=soc),
        },
    }


PRESETS = _preset_table()
RAW_SELECTORS = tuple(k.value for k in MechanismKind)


def known_selectors() -> list[str]:
    return sorted(PRESETS) + list(RAW_SELECTORS) + [f"{k}+round" for k in RAW_SELECTORS]


def _raw_plan(kind: MechanismKind, query: QueryKind, definition: DpDefinition, round_count: bool, label: str) -> QueryPlan:
    spec = MechanismSpec(kind)
    if kind.integer_valued and query not in (QueryKind.COUNT, QueryKind.SUM):
        raise UnsupportedQueryError(f"{kind.value} releases integers; it cannot answer {query.value}")
    if query is QueryKind.COUNT:
        return QueryPlan(query, spec, definition, round_count=round_count, label=label)
    if query in (QueryKind.VAR, QueryKind.STD):
        strategy = VarStrategy.DIRECT if kind is MechanismKind.LAPLACE_BOUNDED_DOMAIN else VarStrategy.MOMENTS
        if strategy is VarStrategy.DIRECT and definition is DpDefinition.UNBOUNDED:
            raise UnsupportedQueryError("direct variance needs the bounded definition")
        return QueryPlan(query, spec, definition, var_strategy=strategy, label=label)
    return QueryPlan(query, spec, definition, label=label)


def plan_for(selector: str, query: QueryKind, definition: DpDefinition = DpDefinition.BOUNDED) -> QueryPlan:
    """Build the plan a selector uses for ``query``.

    ``definition`` applies to raw selectors; presets carry their own.

    Raises
    ------
    UnsupportedQueryError
        For unknown selectors or unsupported (selector, query) pairs.
    """
    query = QueryKind(query)
    if selector in PRESETS:
        row = PRESETS[selector]
        base = QueryKind.VAR if query is QueryKind.STD else query
        if base not in row:
            raise UnsupportedQueryError(f"{selector} has no {query.value} query")
        return QueryPlan(query, label=selector, **row[base])
    name, _, suffix = selector.partition("+")
    if suffix not in ("", "round"):
        raise UnsupportedQueryError(f"unknown selector suffix in {selector!r}")
    try:
        kind = MechanismKind(name)
    except ValueError:
        raise UnsupportedQueryError(
            f"unknown mechanism selector {selector!r}; known: {', '.join(known_selectors())}"
        ) from None
    return _raw_plan(kind, query, DpDefinition(definition), suffix == "round", selector)


def build_plans(
    queries: Iterable[QueryKind],
    selectors: Iterable[str],
    definition: DpDefinition = DpDefinition.BOUNDED,
) -> list[QueryPlan]:
    """Every (query, selector) plan, queries outermost."""
    selectors = list(selectors)
    return [plan_for(s, q, definition) for q in queries for s in selectors]
