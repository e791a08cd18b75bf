"""Population-level comfort, fairness and exchange metrics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np


def average_discomfort(p) -> float:
    """Root-mean-square slot deviation from the preferred plans, over all
    agents and slots (raw energy units, not normalized per agent)."""
    if p.n == 0:
        raise ValueError("average discomfort of an empty population is undefined")
    dev = p.selected_matrix() - p.preferred_matrix()
    return float(np.sqrt(np.mean(dev ** 2)))


def per_agent_discomfort(p) -> np.ndarray:
    return np.array([a.discomfort() for a in p.agents], dtype=np.float64)


def per_agent_comfort(p) -> np.ndarray:
    return 1.0 - per_agent_discomfort(p)


def unfairness(discomforts) -> float:
    """Population standard deviation (divisor n) of per-agent discomfort."""
    values = np.asarray(discomforts, dtype=np.float64)
    if values.size == 0:
        raise ValueError("unfairness of an empty population is undefined")
    return float(np.sqrt(np.mean((values - values.mean()) ** 2)))


def comfort_gain(before, after) -> np.ndarray:
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    if before.shape != after.shape:
        raise ValueError(f"length mismatch: {before.shape} vs {after.shape}")
    return after - before


@dataclass
class MetricsReport:
    avg_discomfort: float
    unfairness: float
    inefficiency: float
    per_agent_comfort: np.ndarray
    comfort_gain: np.ndarray
    exchange_success_rate: float = 1.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        scalars = (self.avg_discomfort, self.unfairness, self.inefficiency, self.exchange_success_rate)
        if not all(np.isfinite(scalars)):
            raise ValueError("metrics must be finite")
        if self.unfairness < 0 or not 0.0 <= self.exchange_success_rate <= 1.0:
            raise ValueError("unfairness must be >= 0 and success rate in [0, 1]")

    @property
    def mean_comfort(self) -> float:
        return float(np.mean(self.per_agent_comfort))

    @property
    def mean_comfort_gain(self) -> float:
        return float(np.mean(self.comfort_gain))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_agent_comfort"] = [float(v) for v in self.per_agent_comfort]
        out["comfort_gain"] = [float(v) for v in self.comfort_gain]
        out["mean_comfort"] = self.mean_comfort
        out["mean_comfort_gain"] = self.mean_comfort_gain
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self) -> dict:
        """Flat scalar view, for sweep aggregation."""
        row = {
            "avg_discomfort": self.avg_discomfort,
            "unfairness": self.unfairness,
            "inefficiency": self.inefficiency,
            "mean_comfort": self.mean_comfort,
            "mean_comfort_gain": self.mean_comfort_gain,
            "exchange_success_rate": self.exchange_success_rate,
        }
        row.update(self.extra)
        return row

    def to_csv(self) -> str:
        row = self.csv_row()
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow(row)
        return buf.getvalue()


def build_report(p, target=None, before_comfort=None, success_rate: float = 1.0, **extra) -> MetricsReport:
    from slotexchange.plans import global_response, inefficiency

    disc = per_agent_discomfort(p)
    comfort = 1.0 - disc
    gain = np.zeros_like(comfort) if before_comfort is None else comfort_gain(before_comfort, comfort)
    return MetricsReport(
        avg_discomfort=average_discomfort(p),
        unfairness=unfairness(disc),
        inefficiency=inefficiency(global_response(p), target),
        per_agent_comfort=comfort,
        comfort_gain=gain,
        exchange_success_rate=success_rate,
        extra=dict(extra),
    )
