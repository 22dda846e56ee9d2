"""Synthetic skew-normal datasets and CSV ingestion."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from dpwb.errors import InvalidArgumentError
from dpwb.mechanisms import Bounds
from dpwb.rng import derive_seed, random_source

GRID_SIZES = (1000, 10000, 100000)
GRID_SKEWS = (0.0, 5.0, 50.0)
GRID_SCALES = (50.0, 250.0, 500.0)

SCALABILITY_SKEW = 5.0
SCALABILITY_SCALE = 250.0
SCALABILITY_SIZES = tuple(10**k for k in range(1, 8))


class DatasetError(InvalidArgumentError):
    pass


@dataclass(frozen=True)
class GenParams:
    size: int
    skew: float
    scale: float
    location: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise InvalidArgumentError(f"size must be a positive integer, got {self.size}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise InvalidArgumentError(f"scale must be positive, got {self.scale}")
        if not (math.isfinite(self.skew) and math.isfinite(self.location)):
            raise InvalidArgumentError("skew and location must be finite")

    @property
    def dataset_id(self) -> str:
        return f"n{self.size}_skew{self.skew:g}_scale{self.scale:g}"


@dataclass(frozen=True)
class SourceFile:
    path: str
    column: str


@dataclass
class Dataset:
    """Ordered real-valued records plus where they came from."""

    records: np.ndarray
    meta: Union[GenParams, SourceFile, None] = None
    dataset_id: str = ""

    def __post_init__(self):
        self.records = np.asarray(self.records, dtype=float)
        if self.records.ndim != 1:
            raise InvalidArgumentError("dataset records must be one-dimensional")
        if not np.all(np.isfinite(self.records)):
            raise InvalidArgumentError("dataset records must be finite")
        if not self.dataset_id:
            if isinstance(self.meta, GenParams):
                self.dataset_id = self.meta.dataset_id
            elif isinstance(self.meta, SourceFile):
                self.dataset_id = f"{Path(self.meta.path).stem}_{self.meta.column}"

    def __len__(self) -> int:
        return self.records.size


def skew_normal_sample(alpha: float, rng: np.random.Generator, size=None):
    """Standard skew-normal variates with shape ``alpha``.

    Uses ``delta*|U0| + sqrt(1 - delta**2)*U1`` with ``delta = alpha/sqrt(1 + alpha**2)``
    and independent standard normals ``U0``, ``U1``.
    """
    delta = alpha / math.sqrt(1.0 + alpha * alpha)
    u0 = rng.standard_normal(size)
    u1 = rng.standard_normal(size)
    out = delta * np.abs(u0) + math.sqrt(1.0 - delta * delta) * u1
    if size is None:
        return float(out)
    return out


def generate(params: GenParams) -> Dataset:
    rng = random_source(params.seed)
    z = skew_normal_sample(params.skew, rng, params.size)
    return Dataset(params.location + params.scale * z, meta=params)


def grid_27(master_seed: int = 0) -> list[GenParams]:
    """The 27 utility datasets: size x skew x scale, location 0."""
    out = []
    for i, (size, skew, scale) in enumerate(itertools.product(GRID_SIZES, GRID_SKEWS, GRID_SCALES)):
        out.append(GenParams(size, skew, scale, 0.0, derive_seed(master_seed, i)))
    return out


def scalability_params(size: int, master_seed: int = 0) -> GenParams:
    return GenParams(size, SCALABILITY_SKEW, SCALABILITY_SCALE, 0.0, derive_seed(master_seed, 1_000_000, size))


def load_csv(path, column: str, delimiter: str = ",") -> Dataset:
    """Read one numeric column of a header-first CSV file.

    Lines starting with ``#`` are skipped. Every unparseable cell is reported
    with its line number in a single :class:`DatasetError`.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: no such file")
    values = []
    bad = []
    with path.open(newline="", encoding="utf-8") as fh:
        lines = ((lineno, line) for lineno, line in enumerate(fh, start=1) if not line.startswith("#"))
        numbered = list(lines)
    if not numbered:
        raise DatasetError(f"{path}: empty file")
    reader = csv.reader((line for _, line in numbered), delimiter=delimiter)
    header = [h.strip().strip('"') for h in next(reader)]
    if column not in header:
        raise DatasetError(f"{path}: column {column!r} not in header {header}")
    idx = header.index(column)
    for (lineno, _), row in zip(numbered[1:], reader):
        if not row:
            continue
        try:
            cell = row[idx].strip().strip('"')
            value = float(cell)
            if not math.isfinite(value):
                raise ValueError(cell)
        except (IndexError, ValueError):
            bad.append((lineno, row[idx] if idx < len(row) else "<missing>"))
            continue
        values.append(value)
    if bad:
        shown = "; ".join(f"line {n}: {c!r}" for n, c in bad[:20])
        more = f" (and {len(bad) - 20} more)" if len(bad) > 20 else ""
        raise DatasetError(f"{path}: {len(bad)} unparseable value(s) in column {column!r}: {shown}{more}")
    return Dataset(np.array(values), meta=SourceFile(str(path), column))


def save_csv(dataset: Dataset, path, column: str = "value") -> None:
    """Write a single-column CSV with a ``#`` provenance line."""
    path = Path(path)
    meta = asdict(dataset.meta) if dataset.meta is not None else {}
    meta["dataset_id"] = dataset.dataset_id
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write(column + "\n")
        fh.writelines(repr(float(v)) + "\n" for v in dataset.records)


def read_provenance(path) -> dict:
    with Path(path).open(encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("#"):
        return {}
    return json.loads(first[1:])


@dataclass(frozen=True)
class BoundsPolicy:
    """Either the data's actual min/max, or bounds supplied by the caller."""

    provided: Optional[Bounds] = field(default=None)

    @property
    def is_actual(self) -> bool:
        return self.provided is None

    @classmethod
    def actual(cls) -> "BoundsPolicy":
        return cls(None)

    @classmethod
    def parse(cls, text: str) -> "BoundsPolicy":
        if text.strip().lower() in ("actual", "actual-minmax"):
            return cls.actual()
        return cls(Bounds.parse(text))

    def __str__(self) -> str:
        if self.provided is None:
            return "actual"
        return f"{self.provided.lower:g}:{self.provided.upper:g}"


def resolve_bounds(data: Dataset, policy: BoundsPolicy) -> Bounds:
    """Clipping bounds for ``data``.

    The actual-min/max policy looks at the data itself, which leaks
    information outside the privacy accounting; it mirrors how the
    synthetic benchmarks are run and is not a private choice of bounds.
    """
    if policy.provided is not None:
        return policy.provided
    if len(data) == 0:
        raise DatasetError("cannot take actual bounds of an empty dataset")
    return Bounds(float(data.records.min()), float(data.records.max()))
