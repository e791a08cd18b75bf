"""End-to-end runs and the experiment sweeps built on them."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from slotexchange import dataio, kernels
from slotexchange.exchange import Blackboard, advertise, replay, run_exchange_phase
from slotexchange.metrics import build_report, per_agent_comfort
from slotexchange.plans import Population, global_response, total_energy
from slotexchange.synthetic import synthetic_plan_sets
from slotexchange.tree import build_tree, run_coordination

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    dataset: Optional[str] = None
    agents: Optional[int] = 1000     # None: every agent in the dataset
    plans: int = 10
    slots: int = 144
    flexibility: float = 0.1
    data_seed: int = 0
    beta: float = 0.0
    iterations: int = 50
    seed: int = 1
    repeats: int = 10
    mode: str = "literal"
    tolerance: float = 0.0
    out: Optional[str] = None

    def __post_init__(self):
        if self.mode not in ("literal", "strict"):
            raise ValueError(f"mode must be 'literal' or 'strict', got {self.mode!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.iterations < 1 or self.repeats < 1:
            raise ValueError("iterations and repeats must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def load_population(config: RunConfig) -> Population:
    if config.dataset:
        pop, _ = dataio.load_dataset(config.dataset, limit=config.agents)
        return pop
    n = 1000 if config.agents is None else config.agents
    return Population.from_plan_sets(
        synthetic_plan_sets(n, config.slots, config.plans, config.flexibility, config.data_seed)
    )


@dataclass
class RunReport:
    config: RunConfig
    pre: object
    post: object
    trace: object
    exchanges: list
    stats: dict
    levels: list
    g_pre: np.ndarray
    g_post: np.ndarray
    energy_pre: float
    energy_post: float
    advertisers: int
    snapshot: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return len(self.levels)

    @property
    def inefficiency_delta(self) -> float:
        return self.post.inefficiency - self.pre.inefficiency

    @property
    def participation(self) -> float:
        """Fraction of agents that advertised at least one slot."""
        return self.advertisers / self.n if self.n else 0.0

    @property
    def positive_gain_fraction(self) -> float:
        return float(np.mean(self.post.comfort_gain > 0)) if self.n else 0.0

    def summary(self) -> dict:
        return {
            "n": self.n,
            "beta": self.config.beta,
            "seed": self.config.seed,
            "inefficiency_pre": self.pre.inefficiency,
            "inefficiency_post": self.post.inefficiency,
            "unfairness_pre": self.pre.unfairness,
            "unfairness_post": self.post.unfairness,
            "avg_discomfort_pre": self.pre.avg_discomfort,
            "avg_discomfort_post": self.post.avg_discomfort,
            "mean_comfort_pre": self.pre.mean_comfort,
            "mean_comfort_post": self.post.mean_comfort,
            "mean_comfort_gain": self.post.mean_comfort_gain,
            "participation": self.participation,
            "positive_gain_fraction": self.positive_gain_fraction,
            "exchanges": len(self.exchanges),
            "success_rate": self.stats["success_rate"],
        }

    def metrics_dict(self) -> dict:
        return {"pre": self.pre.to_dict(), "post": self.post.to_dict(),
                "exchange_stats": self.stats, "summary": self.summary()}

    def agents_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["agent", "level", "comfort_pre", "comfort_post", "comfort_gain"])
        for a, level in enumerate(self.levels):
            writer.writerow([a, level, repr(float(self.pre.per_agent_comfort[a])),
                             repr(float(self.post.per_agent_comfort[a])),
                             repr(float(self.post.comfort_gain[a]))])
        return buf.getvalue()


def run(config: RunConfig, population: Optional[Population] = None, save: bool = True) -> RunReport:
    """Coordination, then the exchange phase, with metrics on both sides.

    ``population`` is used as-is (reset to preferred plans) when given.
    """
    pop = population if population is not None else load_population(config)
    if pop.n == 0:
        raise ValueError("population is empty")
    pop.set_beta(config.beta)
    pop.reset_to_preferred()

    topo = build_tree(pop.n, config.seed)
    trace = run_coordination(pop, topo, config.iterations)

    g_pre = global_response(pop).totals.copy()
    energy_pre = total_energy(pop)
    comfort_pre = per_agent_comfort(pop)
    pre = build_report(pop)
    snapshot = pop.snapshot()

    bb = Blackboard(strict=config.mode == "strict", tolerance=config.tolerance)
    bb.sync(pop)
    advertise(pop, bb)
    advertisers = len(bb.advertisers)
    log = run_exchange_phase(pop, bb, config.seed)
    assert not bb.locks

    post = build_report(pop, before_comfort=comfort_pre, success_rate=bb.stats.success_rate)
    report = RunReport(
        config=config, pre=pre, post=post, trace=trace, exchanges=log,
        stats=bb.stats.as_dict(), levels=[topo.levels[a] for a in range(pop.n)],
        g_pre=g_pre, g_post=global_response(pop).totals.copy(),
        energy_pre=energy_pre, energy_post=total_energy(pop),
        advertisers=advertisers, snapshot=snapshot,
    )
    if save and config.out:
        cfg = config.to_dict()
        cfg["kernel_backend"] = kernels.BACKEND
        dataio.save_run(report.metrics_dict(), trace, log, config.out, config=cfg,
                        extra={"agents.csv": report.agents_csv()})
    return report


def _write_csv(path, rows: list) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _config_columns(config: RunConfig) -> dict:
    cols = config.to_dict()
    cols.pop("out", None)
    cols.pop("repeats", None)
    return {f"cfg_{k}": ("" if v is None else v) for k, v in cols.items()}


def sweep_beta(config: RunConfig, betas: Sequence[float] = (0.0, 0.25, 0.5, 0.75),
               population: Optional[Population] = None):
    """One run per (beta, repeat); repeat ``r`` uses seed ``config.seed + r``.

    Returns ``(rows, summary)``: per-run rows and per-beta means.
    """
    for b in betas:
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"beta {b} outside [0, 1]")
    pop = population if population is not None else load_population(config)
    rows, reports = [], {}
    for b in betas:
        for r in range(config.repeats):
            cfg = replace(config, beta=float(b), seed=config.seed + r, out=None)
            rep = run(cfg, population=pop, save=False)
            reports.setdefault(float(b), []).append(rep)
            row = {"beta": float(b), "repeat": r}
            row.update(rep.summary())
            row.update(_config_columns(cfg))
            rows.append(row)
    summary = []
    for b, reps in reports.items():
        summary.append({
            "beta": b,
            "runs": len(reps),
            "mean_comfort_gain": float(np.mean([x.post.mean_comfort_gain for x in reps])),
            "participation": float(np.mean([x.participation for x in reps])),
            "positive_gain_fraction": float(np.mean([x.positive_gain_fraction for x in reps])),
            "success_rate": float(np.mean([x.stats["success_rate"] for x in reps])),
            "inefficiency_pre": float(np.mean([x.pre.inefficiency for x in reps])),
            "inefficiency_post": float(np.mean([x.post.inefficiency for x in reps])),
            "unfairness_pre": float(np.mean([x.pre.unfairness for x in reps])),
            "unfairness_post": float(np.mean([x.post.unfairness for x in reps])),
            "max_abs_inefficiency_delta": float(max(abs(x.inefficiency_delta) for x in reps)),
        })
    if config.out:
        _write_csv(Path(config.out) / "sweep_beta.csv", rows)
        _write_csv(Path(config.out) / "sweep_beta_summary.csv", summary)
    return rows, summary


def sweep_population(config: RunConfig, sizes: Sequence[int] = (200, 400, 600, 800, 1000),
                     fractions: Sequence[float] = (0.2, 0.4, 0.6, 0.8, 1.0),
                     population: Optional[Population] = None):
    """Mean comfort gain for seeded random subsets of each population size.

    A population of size ``s`` is the first ``s`` agents; for each fraction a
    random ``round(fraction * s)``-agent subset runs the whole pipeline.
    """
    pop = population
    if pop is None:
        pop = load_population(replace(config, agents=max(sizes)))
    for s in sizes:
        if s > pop.n or s < 1:
            raise ValueError(f"population size {s} not in [1, {pop.n}]")
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"fraction {f} outside (0, 1]")
    rows = []
    for s in sizes:
        for f in fractions:
            m = max(1, int(round(f * s)))
            for r in range(config.repeats):
                seed = config.seed + r
                ids = np.sort(np.random.default_rng([seed, s, m]).choice(s, size=m, replace=False))
                sub = pop.subset(ids.tolist())
                cfg = replace(config, agents=m, seed=seed, out=None)
                rep = run(cfg, population=sub, save=False)
                row = {"size": s, "fraction": float(f), "agents": m, "repeat": r,
                       "mean_comfort_gain": rep.post.mean_comfort_gain,
                       "positive_gain_fraction": rep.positive_gain_fraction,
                       "exchanges": len(rep.exchanges)}
                row.update(_config_columns(cfg))
                rows.append(row)
    if config.out:
        _write_csv(Path(config.out) / "sweep_population.csv", rows)
    return rows


def exchange_subsets(config: RunConfig, sizes: Optional[Sequence[int]] = None, sets_per_size: int = 5,
                     report: Optional[RunReport] = None, population: Optional[Population] = None):
    """Replay random subsets of a run's exchange log from the pre-exchange state.

    Each subset keeps the log's original order; swaps invalidated by omitted
    predecessors are skipped and counted. Returns one row per (size, set).
    """
    pop = population if population is not None else load_population(config)
    if report is None:
        report = run(config, population=pop, save=False)
    log = report.exchanges
    if sizes is None:
        sizes = range(100, 1000, 100)
    rng = np.random.default_rng([config.seed, 7])
    rows = []
    for size in sizes:
        take = int(size)
        if take > len(log):
            logger.warning("subset size %d exceeds the %d logged exchanges; clamped", take, len(log))
            take = len(log)
        for j in range(sets_per_size):
            picks = np.sort(rng.choice(len(log), size=take, replace=False)) if take else []
            pop.restore(report.snapshot)
            g_before = global_response(pop).totals.copy()
            applied, skipped = replay(pop, [log[i] for i in picks])
            if not np.array_equal(g_before, global_response(pop).totals):
                raise AssertionError("replay changed per-slot totals")
            rows.append({"size": int(size), "set": j, "used": take, "applied": applied,
                         "skipped": skipped, "avg_comfort": float(np.mean(per_agent_comfort(pop))),
                         "seed": config.seed, "beta": config.beta})
    if config.out:
        _write_csv(Path(config.out) / "exchange_subsets.csv", rows)
    return rows


def dump_config(config: RunConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)
