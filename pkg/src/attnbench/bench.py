"""Wall-clock and allocation benchmark over increasing sequence lengths."""

from __future__ import annotations

import csv
import logging
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import tensor as T
from .core import AttentionInputs, AttentionPattern, canonical_name, require_support
from .mechanisms import MechanismConfig, attend
from .mechanisms._common import head_rng

log = logging.getLogger(__name__)

DEFAULT_LENGTHS = (256, 512, 1024, 2048, 4096, 8192)
CSV_FIELDS = ("mechanism", "pattern", "length", "median_time_s", "peak_bytes", "time_ratio", "mem_ratio")


@dataclass(frozen=True)
class BenchConfig:
    """Benchmark settings. ``small()`` is the CI-sized preset."""

    lengths: tuple[int, ...] = DEFAULT_LENGTHS
    emb_dim: int = 512
    heads: int = 8
    batch: int = 4
    repeats: int = 5
    warmup: int = 2
    seed: int = 0
    mechanism: MechanismConfig = field(default_factory=MechanismConfig)

    def __post_init__(self):
        lengths = tuple(int(x) for x in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if any(b <= a for a, b in zip(lengths, lengths[1:])) or not lengths or lengths[0] < 1:
            raise ValueError(f"lengths must be positive and strictly increasing, got {lengths}")
        if self.repeats < 3:
            raise ValueError("repeats must be >= 3")
        if self.warmup < 0 or self.batch < 1:
            raise ValueError("warmup must be >= 0 and batch >= 1")
        if self.heads < 1 or self.emb_dim % self.heads:
            raise ValueError(f"emb_dim={self.emb_dim} must be divisible by heads={self.heads}")

    @classmethod
    def small(cls, **overrides) -> "BenchConfig":
        base = dict(emb_dim=64, heads=2, batch=1, repeats=3, warmup=1)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "BenchConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class BenchRecord:
    mechanism: str
    pattern: AttentionPattern
    length: int
    median_time: float
    peak_bytes: int
    time_ratio: float | None = None
    mem_ratio: float | None = None


def make_inputs(config: BenchConfig, length: int, pattern: AttentionPattern) -> list[AttentionInputs]:
    """Seeded dummy Q/K/V, one set per batch element (source length = target length)."""
    rng = head_rng(config.seed, "bench-inputs", length)
    shape = (config.batch, length, config.emb_dim)
    q, k, v = (rng.standard_normal(shape) for _ in range(3))
    return [AttentionInputs(q[b], k[b], v[b], pattern, config.heads) for b in range(config.batch)]


def run_trial(name: str, batch: Sequence[AttentionInputs], mcfg: MechanismConfig, counter: T.AllocCounter) -> float:
    """One timed pass over the batch. Returns seconds; peak lands in ``counter``."""
    counter.reset()
    with T.counting(counter):
        start = time.perf_counter()
        for inputs in batch:
            out = attend(name, inputs, mcfg)
            del out
        return time.perf_counter() - start


def run_bench(
    config: BenchConfig,
    mechanisms: Iterable[str],
    pattern: "AttentionPattern | str" = AttentionPattern.NS,
    *,
    progress: Callable[[BenchRecord], None] | None = None,
) -> list[BenchRecord]:
    """Median time and peak counted bytes for every (mechanism, length).

    Trials run strictly one after another: the allocation counter is shared
    state and concurrent trials would also distort the timings.
    """
    pattern = AttentionPattern.parse(pattern)
    names = [canonical_name(m) for m in mechanisms]
    for name in names:
        require_support(name, pattern)
    records = []
    counter = T.AllocCounter()
    for length in config.lengths:
        batch = make_inputs(config, length, pattern)
        for name in names:
            for _ in range(config.warmup):
                run_trial(name, batch, config.mechanism, counter)
            times = []
            peaks = set()
            for _ in range(config.repeats):
                times.append(run_trial(name, batch, config.mechanism, counter))
                peaks.add(counter.peak_bytes)
            if len(peaks) != 1:
                log.warning("%s at %d: peak bytes varied across repeats: %s", name, length, sorted(peaks))
            rec = BenchRecord(name, pattern, length, statistics.median(times), max(peaks))
            log.info("%s L=%d %.4fs %d bytes", name, length, rec.median_time, rec.peak_bytes)
            if progress is not None:
                progress(rec)
            records.append(rec)
    records.sort(key=lambda r: (r.mechanism, r.length))
    return records


def relative_to_vanilla(records: Sequence[BenchRecord], baseline: str = "vanilla") -> list[BenchRecord]:
    """Attach time and memory ratios against the baseline at the same length."""
    base = {(r.pattern, r.length): r for r in records if r.mechanism == baseline}
    out = []
    for r in records:
        ref = base.get((r.pattern, r.length))
        if ref is None:
            raise ValueError(f"no {baseline} record at length {r.length} ({r.pattern.short})")
        out.append(replace(r, time_ratio=r.median_time / ref.median_time, mem_ratio=r.peak_bytes / ref.peak_bytes))
    return out


def write_records_csv(records: Iterable[BenchRecord], path: "str | Path") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([
                r.mechanism,
                r.pattern.value,
                r.length,
                repr(r.median_time),
                r.peak_bytes,
                "" if r.time_ratio is None else repr(r.time_ratio),
                "" if r.mem_ratio is None else repr(r.mem_ratio),
            ])


def read_records_csv(path: "str | Path") -> list[BenchRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    records = []
    for row in rows:
        ratio = lambda key: float(row[key]) if row.get(key) not in (None, "") else None  # noqa: E731
        records.append(
            BenchRecord(
                mechanism=row["mechanism"],
                pattern=AttentionPattern.parse(row["pattern"]),
                length=int(row["length"]),
                median_time=float(row["median_time_s"]),
                peak_bytes=int(row["peak_bytes"]),
                time_ratio=ratio("time_ratio"),
                mem_ratio=ratio("mem_ratio"),
            )
        )
    return records


def series(records: Iterable[BenchRecord], metric: str = "time") -> dict[str, list[tuple[int, float]]]:
    """``{mechanism: [(length, cost), ...]}`` sorted by length; metric is time or memory."""
    out: dict[str, list[tuple[int, float]]] = {}
    for r in records:
        value = r.median_time if metric == "time" else float(r.peak_bytes)
        out.setdefault(r.mechanism, []).append((r.length, value))
    for pts in out.values():
        pts.sort()
    return out


def format_records(records: Sequence[BenchRecord]) -> str:
    lines = [f"{'mechanism':<11} {'pat':<3} {'length':>6} {'median_s':>10} {'peak_MiB':>10} {'t/van':>7} {'m/van':>7}"]
    for r in records:
        tr = "" if r.time_ratio is None else f"{r.time_ratio:.3f}"
        mr = "" if r.mem_ratio is None else f"{r.mem_ratio:.3f}"
        lines.append(
            f"{r.mechanism:<11} {r.pattern.short:<3} {r.length:>6} {r.median_time:>10.5f} "
            f"{r.peak_bytes / 2**20:>10.3f} {tr:>7} {mr:>7}"
        )
    return "\n".join(lines)
