"""Plans, agents and the per-agent / system cost functions.

A plan is a 1-D float array of ``d`` non-negative per-slot energy values.
Plans are kept as plain numpy arrays; :func:`as_plan` validates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_SLOTS = 144
ENERGY_RTOL = 1e-9


def as_plan(values, d: Optional[int] = None) -> np.ndarray:
    """Return ``values`` as a validated float64 plan vector."""
    plan = np.asarray(values, dtype=np.float64)
    if plan.ndim != 1:
        raise ValueError(f"plan must be one-dimensional, got shape {plan.shape}")
    if d is not None and plan.shape[0] != d:
        raise ValueError(f"plan has {plan.shape[0]} slots, expected {d}")
    if not np.all(np.isfinite(plan)):
        raise ValueError("plan contains non-finite values")
    if np.any(plan < 0):
        raise ValueError("plan contains negative energy values")
    return plan


def energy_close(a: float, b: float, rtol: float = ENERGY_RTOL) -> bool:
    return math.isclose(a, b, rel_tol=rtol, abs_tol=rtol)


def rmse(selected, preferred) -> float:
    s = np.asarray(selected, dtype=np.float64)
    p = np.asarray(preferred, dtype=np.float64)
    if s.shape != p.shape or s.ndim != 1:
        raise ValueError(f"dimension mismatch: {s.shape} vs {p.shape}")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(p))):
        raise ValueError("non-finite plan values")
    return float(np.sqrt(np.mean((s - p) ** 2)))


def discomfort(selected, preferred, scale: float = 1.0) -> float:
    """Normalized deviation of ``selected`` from ``preferred``, clamped to [0, 1].

    The deviation is the root-mean-square slot difference divided by
    ``scale``.
    """
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError(f"scale must be a positive finite number, got {scale!r}")
    return min(1.0, rmse(selected, preferred) / scale)


def comfort(selected, preferred, scale: float = 1.0) -> float:
    return 1.0 - discomfort(selected, preferred, scale)


@dataclass(frozen=True)
class GlobalResponse:
    """Element-wise sum of all selected plans."""

    totals: np.ndarray

    @property
    def d(self) -> int:
        return int(self.totals.shape[0])


def inefficiency(g, target=None) -> float:
    """Demand/supply mismatch of the aggregate profile.

    Without a target this is the variance of the totals (mismatch against a
    flat supply at the mean level); with a target supply profile it is the
    mean squared difference.
    """
    totals = g.totals if isinstance(g, GlobalResponse) else np.asarray(g, dtype=np.float64)
    if target is None:
        return float(np.var(totals))
    target = np.asarray(target, dtype=np.float64)
    if target.shape != totals.shape:
        raise ValueError(f"target has shape {target.shape}, expected {totals.shape}")
    return float(np.mean((totals - target) ** 2))


@dataclass
class PlanSet:
    """The ``k`` candidate plans of one agent, stacked as a ``(k, d)`` array."""

    plans: np.ndarray
    preferred_index: int = 0

    def __post_init__(self):
        plans = np.array(self.plans, dtype=np.float64)
        if plans.ndim != 2 or plans.shape[0] < 1:
            raise ValueError(f"plan set must be a non-empty (k, d) array, got shape {plans.shape}")
        if not np.all(np.isfinite(plans)) or np.any(plans < 0):
            raise ValueError("plan set contains negative or non-finite values")
        if not 0 <= self.preferred_index < plans.shape[0]:
            raise ValueError(f"preferred_index {self.preferred_index} out of range for k={plans.shape[0]}")
        totals = plans.sum(axis=1)
        ref = totals[self.preferred_index]
        for idx, total in enumerate(totals):
            if not energy_close(total, ref):
                raise ValueError(
                    f"plan {idx} has total energy {total!r}, preferred plan has {ref!r}"
                )
        plans.setflags(write=False)
        self.plans = plans

    @property
    def k(self) -> int:
        return int(self.plans.shape[0])

    @property
    def d(self) -> int:
        return int(self.plans.shape[1])

    @property
    def preferred(self) -> np.ndarray:
        return self.plans[self.preferred_index]

    @cached_property
    def discomfort_scale(self) -> float:
        # max RMSE of any candidate against the preferred plan; 1.0 if all coincide
        dev = np.sqrt(np.mean((self.plans - self.preferred) ** 2, axis=1))
        top = float(dev.max())
        return top if top > 0 else 1.0

    @cached_property
    def discomforts(self) -> np.ndarray:
        """Normalized discomfort of every candidate plan."""
        dev = np.sqrt(np.mean((self.plans - self.preferred) ** 2, axis=1))
        out = np.minimum(1.0, dev / self.discomfort_scale)
        out.setflags(write=False)
        return out


@dataclass(eq=False)
class AgentState:
    id: int
    plan_set: PlanSet
    selected: np.ndarray = None
    beta: float = 0.0
    available: bool = True
    selected_index: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.selected is None:
            self.selected = self.plan_set.preferred.copy()
            self.selected_index = self.plan_set.preferred_index
        else:
            self.selected = as_plan(self.selected, self.plan_set.d).copy()

    @property
    def preferred(self) -> np.ndarray:
        return self.plan_set.preferred

    @property
    def scale(self) -> float:
        return self.plan_set.discomfort_scale

    def select(self, index: int) -> None:
        self.selected = self.plan_set.plans[index].copy()
        self.selected_index = int(index)

    def discomfort(self) -> float:
        return discomfort(self.selected, self.preferred, self.scale)

    def comfort(self) -> float:
        return 1.0 - self.discomfort()


@dataclass(eq=False)
class Population:
    agents: list = field(default_factory=list)

    def __post_init__(self):
        ds = {a.plan_set.d for a in self.agents}
        if len(ds) > 1:
            raise ValueError(f"agents disagree on slot count: {sorted(ds)}")
        for pos, agent in enumerate(self.agents):
            if agent.id != pos:
                raise ValueError(f"agent at position {pos} has id {agent.id}")

    def __len__(self) -> int:
        return len(self.agents)

    def __iter__(self):
        return iter(self.agents)

    def __getitem__(self, idx) -> AgentState:
        return self.agents[idx]

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def d(self) -> int:
        return self.agents[0].plan_set.d if self.agents else 0

    @classmethod
    def from_plan_sets(cls, plan_sets: Iterable[PlanSet], beta: float = 0.0) -> "Population":
        return cls([AgentState(i, ps, beta=beta) for i, ps in enumerate(plan_sets)])

    def set_beta(self, beta: float) -> None:
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        for agent in self.agents:
            agent.beta = float(beta)

    def reset_to_preferred(self) -> None:
        for agent in self.agents:
            agent.select(agent.plan_set.preferred_index)

    def selected_matrix(self) -> np.ndarray:
        if not self.agents:
            return np.zeros((0, 0))
        return np.stack([a.selected for a in self.agents])

    def preferred_matrix(self) -> np.ndarray:
        if not self.agents:
            return np.zeros((0, 0))
        return np.stack([a.preferred for a in self.agents])

    def snapshot(self) -> np.ndarray:
        """Copy of all selected plans, for later :meth:`restore`."""
        return self.selected_matrix().copy()

    def restore(self, snap: np.ndarray) -> None:
        for agent, row in zip(self.agents, snap):
            agent.selected = row.copy()
            agent.selected_index = None
            for idx, plan in enumerate(agent.plan_set.plans):
                if np.array_equal(plan, row):
                    agent.selected_index = idx
                    break

    def subset(self, ids: Sequence[int]) -> "Population":
        """New population over the given agents, re-numbered from 0."""
        return Population(
            [
                AgentState(new_id, self.agents[old].plan_set, selected=self.agents[old].selected,
                           beta=self.agents[old].beta)
                for new_id, old in enumerate(ids)
            ]
        )


def slot_totals(matrix) -> np.ndarray:
    """Correctly rounded column sums of an ``(n, d)`` matrix.

    The result depends only on the multiset of values in each column, so it
    is unchanged by reordering agents or swapping values within a slot.
    """
    m = np.asarray(matrix, dtype=np.float64)
    return np.array([math.fsum(col) for col in m.T.tolist()], dtype=np.float64)


def global_response(p: Population) -> GlobalResponse:
    if p.n == 0:
        return GlobalResponse(np.zeros(0))
    return GlobalResponse(slot_totals(p.selected_matrix()))


def total_energy(p: Population) -> float:
    # correctly rounded, hence exactly invariant under slot swaps
    if p.n == 0:
        return 0.0
    return math.fsum(p.selected_matrix().ravel().tolist())


def generate_plans(preferred, flexibility: float, k: int, seed: int,
                   quantum: Optional[float] = None, grid: Optional[float] = None) -> PlanSet:
    """Build ``k`` plans around ``preferred`` by random energy-preserving moves.

    Each alternate applies ``round(flexibility * d)`` moves; a move takes up
    to ``quantum`` energy (default 1% of the plan total) from one random slot
    and adds it to another. Empty source slots are re-drawn. The preferred
    plan sits at index 0.

    With ``grid`` set (a resolution whose reciprocal is an integer, e.g.
    0.01 or 2**-7), values must be integer multiples of it and the moves run
    in integer units, so outputs stay on the grid. On a power-of-two grid
    all plan totals are then bit-identical.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if not 0.0 <= flexibility <= 1.0:
        raise ValueError(f"flexibility must lie in [0, 1], got {flexibility}")
    preferred = as_plan(preferred)
    d = preferred.shape[0]
    total = float(preferred.sum())
    if quantum is None:
        quantum = 0.01 * total
    if quantum < 0:
        raise ValueError("quantum must be non-negative")
    moves = int(round(flexibility * d))
    rng = np.random.default_rng(seed)

    if grid is not None:
        unit = int(round(1.0 / grid))
        if unit < 1 or abs(unit * grid - 1.0) > 1e-12:
            raise ValueError(f"grid {grid!r} must be the reciprocal of an integer")
        base = np.rint(preferred * unit).astype(np.int64)
        if not np.array_equal(base / unit, preferred):
            raise ValueError(f"preferred plan is not on the {grid!r} grid")
        step = max(1, int(round(quantum * unit)))
    else:
        base = preferred
        step = quantum

    plans = [preferred.copy()]
    for _ in range(k - 1):
        plan = base.copy()
        if d > 1 and step > 0 and plan.sum() > 0:
            for _ in range(moves):
                src = int(rng.integers(d))
                while plan[src] <= 0:
                    src = int(rng.integers(d))
                dst = int(rng.integers(d - 1))
                if dst >= src:
                    dst += 1
                amount = min(step, plan[src])
                plan[src] -= amount
                plan[dst] += amount
        plans.append(plan / unit if grid is not None else plan)
    return PlanSet(np.stack(plans), preferred_index=0)
