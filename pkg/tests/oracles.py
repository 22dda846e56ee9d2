"""Independent reference implementations used by the tests."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def _stat(query: str, d: np.ndarray) -> np.ndarray:
    """Row-wise statistic of a 2-D array of datasets."""
    if query == "count":
        # replace-one neighbours keep |D|, so count a predicate instead
        return np.count_nonzero(d, axis=1).astype(float)
    if query == "sum":
        return d.sum(axis=1)
    if query == "mean":
        return d.mean(axis=1)
    if query == "var":
        return d.var(axis=1)
    raise ValueError(query)


def brute_force_bounded(query: str, lo: int, hi: int, n: int) -> float:
    """Max |f(D) - f(D')| over all D in {lo..hi}^n and all replace-one D'."""
    values = np.arange(lo, hi + 1, dtype=float)
    data = np.array(list(itertools.product(values, repeat=n)))
    base = _stat(query, data)
    best = 0.0
    for i in range(n):
        for v in values:
            other = data.copy()
            other[:, i] = v
            best = max(best, float(np.max(np.abs(base - _stat(query, other)))))
    return best


def brute_force_unbounded(query: str, lo: int, hi: int, n: int) -> float:
    """Max |f(D) - f(D')| for |D| = n and D' = D plus or minus one record (both non-empty)."""
    values = np.arange(lo, hi + 1, dtype=float)
    data = np.array(list(itertools.product(values, repeat=n)))
    base = _stat(query, data) if query != "count" else np.full(len(data), float(n))
    best = 0.0
    for v in values:
        grown = np.column_stack([data, np.full(len(data), v)])
        other = _stat(query, grown) if query != "count" else np.full(len(data), n + 1.0)
        best = max(best, float(np.max(np.abs(base - other))))
    if n >= 2:
        for i in range(n):
            shrunk = np.delete(data, i, axis=1)
            other = _stat(query, shrunk) if query != "count" else np.full(len(data), n - 1.0)
            best = max(best, float(np.max(np.abs(base - other))))
    return best


class RationalLedger:
    """Exact-arithmetic model of the budget accountant."""

    def __init__(self, total: str):
        self.total = Fraction(total)
        self.spent = Fraction(0)

    def try_spend(self, eps: str) -> bool:
        amount = Fraction(eps)
        if self.spent + amount <= self.total:
            self.spent += amount
            return True
        return False
