"""Scalability benchmark: wall time and memory of a single query call."""

from __future__ import annotations

import threading
import time
import tracemalloc
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import psutil

from dpwb.datagen import SCALABILITY_SIZES, BoundsPolicy, generate, resolve_bounds, scalability_params
from dpwb.harness.plans import plan_for
from dpwb.kinds import DpDefinition, QueryKind
from dpwb.queries import prepare
from dpwb.rng import random_source

DEFAULT_SIZES = SCALABILITY_SIZES[:6]
DEFAULT_QUERIES = (QueryKind.COUNT, QueryKind.SUM, QueryKind.MEAN, QueryKind.VAR)
# records, clipped copy and a few temporaries
_BYTES_PER_RECORD = 8 * 6


@dataclass(frozen=True)
class ScalabilityRecord:
    size: int
    query: str
    epsilon: float
    run: int
    elapsed_seconds: Optional[float]
    peak_rss_bytes: Optional[int]
    alloc_peak_bytes: Optional[int]
    skipped: str = ""


class RssWatcher:
    """Samples the process RSS on a background thread; ``peak_delta`` after exit."""

    def __init__(self, interval: float = 0.0005):
        self.interval = interval
        self._proc = psutil.Process()
        self._stop = threading.Event()
        self.baseline = 0
        self.peak = 0

    def _poll(self):
        while not self._stop.is_set():
            self.peak = max(self.peak, self._proc.memory_info().rss)
            self._stop.wait(self.interval)

    def __enter__(self):
        self.baseline = self.peak = self._proc.memory_info().rss
        self._thread = threading.Thread(target=self._poll, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.peak = max(self.peak, self._proc.memory_info().rss)
        self._stop.set()
        self._thread.join()

    @property
    def peak_delta(self) -> int:
        return max(self.peak - self.baseline, 0)


def measure(call: Callable[[], object], track_allocations: bool = True) -> tuple[float, int, Optional[int]]:
    """Time one invocation of ``call`` and report its memory peaks.

    The timed invocation runs under the RSS watcher only; the allocator peak
    comes from a second, untimed invocation under ``tracemalloc`` so that
    tracing overhead never enters the timing.
    """
    with RssWatcher() as watcher:
        start = time.perf_counter()
        call()
        elapsed = time.perf_counter() - start
    alloc_peak = None
    if track_allocations:
        tracemalloc.start()
        try:
            tracemalloc.reset_peak()
            call()
            alloc_peak = tracemalloc.get_traced_memory()[1]
        finally:
            tracemalloc.stop()
    return elapsed, watcher.peak_delta, alloc_peak


def run_scalability(
    sizes: Sequence[int] = DEFAULT_SIZES,
    queries: Sequence[QueryKind] = DEFAULT_QUERIES,
    epsilons: Sequence[float] = (1.0,),
    runs: int = 5,
    master_seed: int = 0,
    selector: str = "laplace-pure",
    definition: DpDefinition = DpDefinition.BOUNDED,
    memory_cap_bytes: Optional[int] = None,
    track_allocations: bool = True,
) -> list[ScalabilityRecord]:
    """Serially time each query on skew-normal data of every size.

    All datasets are generated and their bounds resolved before the first
    measurement; only the query call itself is timed. Sizes whose estimated
    footprint exceeds ``memory_cap_bytes`` produce skip records instead.
    Records are sorted by (size, query, epsilon, run).
    """
    sizes = sorted(int(s) for s in sizes)
    queries = [QueryKind(q) for q in queries]
    plans = {q: plan_for(selector, q, definition) for q in queries}

    data = {}
    for size in sizes:
        if memory_cap_bytes is not None and size * _BYTES_PER_RECORD > memory_cap_bytes:
            continue
        ds = generate(scalability_params(size, master_seed))
        data[size] = (ds, resolve_bounds(ds, BoundsPolicy.actual()))

    out = []
    for size in sizes:
        for q in queries:
            for e_idx, eps in enumerate(epsilons):
                for run in range(runs):
                    if size not in data:
                        reason = f"estimated {size * _BYTES_PER_RECORD} bytes exceeds cap {memory_cap_bytes}"
                        out.append(ScalabilityRecord(size, q.value, float(eps), run, None, None, None, reason))
                        continue
                    ds, bounds = data[size]
                    plan = plans[q]
                    rng = random_source(master_seed, size, e_idx, run)
                    sampler_rng = random_source(master_seed, size, e_idx, run, 1)

                    def call():
                        return prepare(plan, ds, bounds, sampler_rng).release(eps, rng)

                    elapsed, rss, alloc = measure(call, track_allocations)
                    out.append(ScalabilityRecord(size, q.value, float(eps), run, elapsed, rss, alloc))
    return out
