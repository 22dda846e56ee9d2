from __future__ import annotations

import enum


class DpDefinition(str, enum.Enum):
    """Neighbouring relation: replace one record (bounded) or add/remove one (unbounded)."""

    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"


class QueryKind(str, enum.Enum):
    COUNT = "count"
    SUM = "sum"
    MEAN = "mean"
    VAR = "var"
    STD = "std"


class MeanStrategy(str, enum.Enum):
    DIRECT = "direct"
    SUM_OVER_COUNT = "sum-over-count"


class VarStrategy(str, enum.Enum):
    DIRECT = "direct"
    MOMENTS = "moments"
