"""Compositional index: direction-corrected z-scores averaged per task, then across tasks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import StatsError

HIGHER = "higher"
LOWER = "lower"
_DIRECTIONS = {
    "higher": HIGHER, "higher-better": HIGHER, "higher_better": HIGHER, "up": HIGHER,
    "lower": LOWER, "lower-better": LOWER, "lower_better": LOWER, "down": LOWER,
}


def parse_direction(text: str) -> str:
    try:
        return _DIRECTIONS[str(text).strip().lower()]
    except KeyError:
        raise ValueError(f"direction must be 'higher' or 'lower', got {text!r}") from None


@dataclass(frozen=True)
class MetricRecord:
    model: str
    task: str
    metric: str
    value: float
    direction: str

    def __post_init__(self):
        object.__setattr__(self, "direction", parse_direction(self.direction))
        object.__setattr__(self, "value", float(self.value))
        if not math.isfinite(self.value):
            raise ValueError(f"{self.model}/{self.metric}: value must be finite")

    def flipped(self) -> "MetricRecord":
        return MetricRecord(self.model, self.task, self.metric, self.value,
                            LOWER if self.direction == HIGHER else HIGHER)


@dataclass(frozen=True)
class NormStats:
    """(task, metric) -> (mu, sigma) with sigma > 0."""

    table: Mapping[tuple[str, str], tuple[float, float]]

    def __post_init__(self):
        clean = {}
        for key, (mu, sigma) in self.table.items():
            mu, sigma = float(mu), float(sigma)
            if not (math.isfinite(mu) and math.isfinite(sigma)):
                raise StatsError(f"non-finite stats for {key}")
            if sigma <= 0:
                raise StatsError(f"sigma must be positive for {key}, got {sigma}")
            clean[tuple(key)] = (mu, sigma)
        object.__setattr__(self, "table", clean)

    def __getitem__(self, key: tuple[str, str]) -> tuple[float, float]:
        try:
            return self.table[key]
        except KeyError:
            raise StatsError(f"no stats for task={key[0]!r} metric={key[1]!r}") from None

    def __contains__(self, key) -> bool:
        return key in self.table

    def __len__(self) -> int:
        return len(self.table)


def zscore(record: MetricRecord, stats: NormStats) -> float:
    """Signed z-score; larger is better regardless of the metric's direction."""
    mu, sigma = stats[(record.task, record.metric)]
    if record.direction == HIGHER:
        return (record.value - mu) / sigma
    return (mu - record.value) / sigma


def task_ci(records: Sequence[MetricRecord], stats: NormStats) -> float:
    if not records:
        raise StatsError("task_ci needs at least one metric")
    return float(np.mean([zscore(r, stats) for r in records]))


def overall_ci(task_cis: Iterable[float]) -> float:
    values = list(task_cis)
    if not values:
        raise StatsError("overall_ci needs at least one task")
    return float(np.mean(values))


def _group(records: Iterable[MetricRecord], key) -> dict:
    out: dict = {}
    for r in records:
        out.setdefault(key(r), []).append(r)
    return out


def score(records: Sequence[MetricRecord], stats: NormStats) -> tuple[list[tuple[str, str, float]], list[tuple[str, float]]]:
    """Task CIs ``(model, task, ci)`` and overall CIs ``(model, ci)`` in input order.

    A model missing a whole task (a failed run) is averaged over the tasks it has.
    """
    tasks = _group(records, lambda r: (r.model, r.task))
    per_task = [(model, task, task_ci(rs, stats)) for (model, task), rs in tasks.items()]
    by_model = _group(per_task, lambda row: row[0])
    overall = [(model, overall_ci(row[2] for row in rows)) for model, rows in by_model.items()]
    return per_task, overall


def compute_stats(records: Iterable[MetricRecord], ddof: int = 1) -> NormStats:
    """Mean and standard deviation across models per (task, metric).

    ``ddof=1`` (sample deviation) is the default since it matches the published
    normalization tables; pass ``ddof=0`` for the population deviation.
    """
    groups = _group(records, lambda r: (r.task, r.metric))
    table = {}
    for key, rs in groups.items():
        models = {r.model for r in rs}
        if len(models) < 2:
            raise StatsError(f"{key}: need at least 2 models, got {len(models)}")
        if len(models) != len(rs):
            raise StatsError(f"{key}: duplicate model entries")
        values = np.array([r.value for r in rs])
        sigma = float(values.std(ddof=ddof))
        if sigma == 0:
            raise StatsError(f"{key}: zero variance across models")
        table[key] = (float(values.mean()), sigma)
    return NormStats(table)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"pearson needs equal-length vectors, got {a.shape} and {b.shape}")
    if len(a) < 2:
        raise ValueError("pearson needs at least 2 points")
    da, db = a - a.mean(), b - b.mean()
    na, nb = math.sqrt(da @ da), math.sqrt(db @ db)
    if na == 0 or nb == 0:
        raise ValueError("pearson is undefined for a zero-variance input")
    return float(np.clip((da @ db) / (na * nb), -1.0, 1.0))


def read_metrics_csv(path: "str | Path") -> list[MetricRecord]:
    with open(path, newline="") as fh:
        return [
            MetricRecord(row["model"], row["task"], row["metric"], float(row["value"]), row["direction"])
            for row in csv.DictReader(fh)
        ]


def read_stats_csv(path: "str | Path") -> NormStats:
    with open(path, newline="") as fh:
        return NormStats({(row["task"], row["metric"]): (float(row["mu"]), float(row["sigma"])) for row in csv.DictReader(fh)})


def write_stats_csv(stats: NormStats, path: "str | Path") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "metric", "mu", "sigma"])
        for (task, metric), (mu, sigma) in stats.table.items():
            w.writerow([task, metric, repr(mu), repr(sigma)])


def write_task_csv(rows: Iterable[tuple[str, str, float]], path: "str | Path") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "task", "task_ci"])
        w.writerows((m, t, f"{v:.6f}") for m, t, v in rows)


def write_overall_csv(rows: Iterable[tuple[str, float]], path: "str | Path") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "overall_ci"])
        w.writerows((m, f"{v:.6f}") for m, v in rows)


def data_path(name: str) -> Path:
    """Path of a bundled data file, e.g. ``data_path("published_ns_stats.csv")``."""
    return Path(str(resources.files("attnbench") / "data" / name))


def bundled_metrics(pattern: str) -> list[MetricRecord]:
    return read_metrics_csv(data_path(f"published_{pattern}_metrics.csv"))


def bundled_stats(pattern: str) -> NormStats:
    return read_stats_csv(data_path(f"published_{pattern}_stats.csv"))
