"""Privacy budget ledger under sequential composition.

Amounts are stored as integer micro-epsilon units, so ten spends of 0.1
from a budget of 1.0 use the budget up exactly and the point at which a
spend is blocked never depends on floating-point summation order.
"""

from __future__ import annotations

import csv
import io
import math
import threading
import time
from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal
from pathlib import Path
from typing import Iterable

from dpwb.errors import BudgetExhausted, InvalidArgumentError

MICRO = 10**6
_HEADER = "# dpwb-ledger v1"
_COLUMNS = ["descriptor", "micro_eps", "monotonic_ns", "status"]


def to_micro(eps: float, rounding: str = ROUND_CEILING) -> int:
    """Convert ``eps`` to micro units, rounding up by default (never under-charges).

    Uses the shortest decimal representation of the float, so ``0.1`` is
    exactly 100000 units.
    """
    eps = float(eps)
    if not (math.isfinite(eps) and eps > 0):
        raise InvalidArgumentError(f"epsilon must be positive and finite, got {eps}")
    return int((Decimal(repr(eps)) * MICRO).to_integral_value(rounding=rounding))


def from_micro(units: int) -> float:
    return units / MICRO


@dataclass(frozen=True)
class LedgerEntry:
    descriptor: str
    micro_eps: int
    monotonic_ns: int

    @property
    def eps(self) -> float:
        return from_micro(self.micro_eps)


class BudgetLedger:
    """Append-only record of accepted spends against a total budget.

    ``spend`` is atomic: concurrent callers never push the accepted total
    over the budget. Rejected spends go to ``rejected``, not ``entries``.
    """

    def __init__(self, total: float):
        # the budget rounds down, spends round up
        self._total = to_micro(total, ROUND_FLOOR)
        if self._total == 0:
            raise InvalidArgumentError(f"total budget {total} is below one micro-epsilon")
        self._spent = 0
        self._entries: list[LedgerEntry] = []
        self._rejected: list[LedgerEntry] = []
        self._lock = threading.Lock()

    @property
    def total(self) -> float:
        return from_micro(self._total)

    @property
    def total_micro(self) -> int:
        return self._total

    @property
    def spent_micro(self) -> int:
        return self._spent

    @property
    def spent(self) -> float:
        return from_micro(self._spent)

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    @property
    def rejected(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._rejected)

    def remaining(self) -> float:
        return from_micro(max(self._total - self._spent, 0))

    def spend_all(self, items: Iterable[tuple[float, str]]) -> list[LedgerEntry]:
        """Atomically spend every ``(eps, descriptor)`` pair, or none of them.

        Raises
        ------
        BudgetExhausted
            If the combined spend exceeds the remaining budget. The ledger
            is left unchanged apart from the audit trail.
        """
        pending = [(to_micro(eps), str(descriptor)) for eps, descriptor in items]
        if not pending:
            return []
        need = sum(units for units, _ in pending)
        with self._lock:
            now = time.monotonic_ns()
            if self._spent + need > self._total:
                self._rejected.extend(LedgerEntry(d, u, now) for u, d in pending)
                label = "+".join(d for _, d in pending)
                raise BudgetExhausted(from_micro(need), from_micro(self._total - self._spent), label)
            new = [LedgerEntry(d, u, now) for u, d in pending]
            self._entries.extend(new)
            self._spent += need
        return new

    def spend(self, eps: float, descriptor: str = "") -> LedgerEntry:
        return self.spend_all([(eps, descriptor)])[0]

    def try_spend(self, eps: float, descriptor: str = "") -> bool:
        try:
            self.spend(eps, descriptor)
        except BudgetExhausted:
            return False
        return True

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"{_HEADER}\n# total_micro_eps={self._total}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_COLUMNS)
        with self._lock:
            rows = [(e, "accepted") for e in self._entries] + [(e, "rejected") for e in self._rejected]
        for entry, status in sorted(rows, key=lambda r: r[0].monotonic_ns):
            writer.writerow([entry.descriptor, entry.micro_eps, entry.monotonic_ns, status])
        return buf.getvalue()

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.dumps(), encoding="utf-8")
        tmp.replace(path)

    @classmethod
    def loads(cls, text: str) -> "BudgetLedger":
        lines = text.splitlines()
        if not lines or lines[0].strip() != _HEADER:
            raise InvalidArgumentError("not a dpwb ledger file")
        total = None
        body = []
        for line in lines[1:]:
            if line.startswith("# total_micro_eps="):
                total = int(line.split("=", 1)[1])
            elif not line.startswith("#"):
                body.append(line)
        if total is None or total <= 0:
            raise InvalidArgumentError("ledger file has no valid total")
        ledger = cls(from_micro(total))
        ledger._total = total
        for row in csv.DictReader(body):
            entry = LedgerEntry(row["descriptor"], int(row["micro_eps"]), int(row["monotonic_ns"]))
            if row["status"] == "accepted":
                ledger._entries.append(entry)
                ledger._spent += entry.micro_eps
            else:
                ledger._rejected.append(entry)
        if ledger._spent > ledger._total:
            raise InvalidArgumentError("ledger file is over budget")
        return ledger

    @classmethod
    def load(cls, path) -> "BudgetLedger":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def new_ledger(total: float) -> BudgetLedger:
    return BudgetLedger(total)
