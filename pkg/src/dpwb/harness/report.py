"""CSV reports and plot-data companions for benchmark records."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from dpwb.errors import InvalidArgumentError
from dpwb.harness.scalability import ScalabilityRecord
from dpwb.harness.utility import UtilityRecord

UTILITY_COLUMNS = ["dataset_id", "query", "mechanism", "dp_definition", "epsilon", "mre", "sase", "n_runs", "flagged"]
SCALABILITY_COLUMNS = [
    "size",
    "query",
    "epsilon",
    "run",
    "elapsed_seconds",
    "peak_rss_bytes",
    "alloc_peak_bytes",
    "skipped",
]

Record = Union[UtilityRecord, ScalabilityRecord]


def _eps(x: float) -> str:
    return f"{x:.6g}"


def _opt(x) -> str:
    return "" if x is None else repr(x)


def _utility_row(r: UtilityRecord) -> list:
    return [r.dataset_id, r.query, r.mechanism, r.dp_definition, _eps(r.epsilon), repr(r.mre), repr(r.sase), r.n_runs, str(r.flagged).lower()]


def _scalability_row(r: ScalabilityRecord) -> list:
    return [r.size, r.query, _eps(r.epsilon), r.run, _opt(r.elapsed_seconds), _opt(r.peak_rss_bytes), _opt(r.alloc_peak_bytes), r.skipped]


def plot_data_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".plot.tsv")


def emit_report(records: Sequence[Record], path) -> Path:
    """Write ``records`` as CSV at ``path`` plus ``<stem>.plot.tsv``.

    The plot file holds one series per (query, mechanism) for utility
    records (columns epsilon, mre, sase per dataset) and one per query for
    scalability records (median time and memory per size).
    """
    records = list(records)
    if not records:
        raise InvalidArgumentError("no records to report")
    path = Path(path)
    utility = isinstance(records[0], UtilityRecord)
    if not all(isinstance(r, type(records[0])) for r in records):
        raise InvalidArgumentError("cannot mix utility and scalability records in one report")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(UTILITY_COLUMNS if utility else SCALABILITY_COLUMNS)
            for r in records:
                writer.writerow(_utility_row(r) if utility else _scalability_row(r))
        plot = plot_data_path(path)
        plot.write_text(_utility_plot(records) if utility else _scalability_plot(records), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"{path}: cannot write report: {exc}") from exc
    return path


def _utility_plot(records: Sequence[UtilityRecord]) -> str:
    series = defaultdict(list)
    for r in records:
        series[(r.query, r.mechanism)].append(r)
    lines = []
    for (query, mech), rows in series.items():
        lines.append(f"# series query={query} mechanism={mech}")
        lines.append("dataset_id\tepsilon\tmre\tsase")
        lines.extend(f"{r.dataset_id}\t{_eps(r.epsilon)}\t{r.mre!r}\t{r.sase!r}" for r in rows)
        lines.append("")
    return "\n".join(lines)


def _scalability_plot(records: Sequence[ScalabilityRecord]) -> str:
    groups = defaultdict(list)
    for r in records:
        if not r.skipped:
            groups[(r.query, r.size)].append(r)
    lines = []
    for query in dict.fromkeys(r.query for r in records):
        lines.append(f"# series query={query}")
        lines.append("size\tmedian_elapsed_seconds\tmedian_peak_rss_bytes\tmedian_alloc_peak_bytes")
        for (q, size), rows in sorted(groups.items(), key=lambda kv: kv[0][1]):
            if q != query:
                continue
            elapsed = np.median([r.elapsed_seconds for r in rows])
            rss = np.median([r.peak_rss_bytes for r in rows])
            alloc = [r.alloc_peak_bytes for r in rows if r.alloc_peak_bytes is not None]
            alloc_cell = repr(float(np.median(alloc))) if alloc else ""
            lines.append(f"{size}\t{float(elapsed)!r}\t{float(rss)!r}\t{alloc_cell}")
        lines.append("")
    return "\n".join(lines)


def read_utility_csv(path) -> list[UtilityRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            UtilityRecord(
                dataset_id=row["dataset_id"],
                query=row["query"],
                mechanism=row["mechanism"],
                dp_definition=row["dp_definition"],
                epsilon=float(row["epsilon"]),
                mre=float(row["mre"]),
                sase=float(row["sase"]),
                n_runs=int(row["n_runs"]),
                flagged=row["flagged"] == "true",
            )
            for row in csv.DictReader(fh)
        ]


def read_scalability_csv(path) -> list[ScalabilityRecord]:
    def opt(cell, cast):
        return None if cell == "" else cast(cell)

    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            ScalabilityRecord(
                size=int(row["size"]),
                query=row["query"],
                epsilon=float(row["epsilon"]),
                run=int(row["run"]),
                elapsed_seconds=opt(row["elapsed_seconds"], float),
                peak_rss_bytes=opt(row["peak_rss_bytes"], int),
                alloc_peak_bytes=opt(row["alloc_peak_bytes"], int),
                skipped=row["skipped"],
            )
            for row in csv.DictReader(fh)
        ]
