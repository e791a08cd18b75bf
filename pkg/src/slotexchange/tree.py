"""Iterative plan selection over a binary tree of agents.

Each iteration runs a leaf-to-root pass, where every agent picks a plan
against the aggregate it can see and decides which child subtrees' changes
to accept. A root-to-leaf pass then tells every agent whether its change
survived and broadcasts the new global response. Changes are only kept
when they strictly lower the inefficiency cost, so the global cost never
increases between iterations.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from slotexchange import kernels
from slotexchange.plans import AgentState, Population, inefficiency, slot_totals

logger = logging.getLogger(__name__)

# variance differences below this fraction of mean(g**2) are treated as ties
COST_RTOL = 1e-10


@dataclass
class TreeTopology:
    parent: dict
    children: dict
    levels: dict
    root: int

    @property
    def n(self) -> int:
        return len(self.levels)

    @property
    def depth(self) -> int:
        return max(self.levels.values())

    def preorder(self) -> list:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(reversed(self.children[node]))
        return out

    def postorder(self) -> list:
        """Children before parents, left subtree before right."""
        out, stack = [], [(self.root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                out.append(node)
                continue
            stack.append((node, True))
            for child in reversed(self.children[node]):
                stack.append((child, False))
        return out

    def child_arrays(self):
        left = np.full(self.n, -1, dtype=np.int64)
        right = np.full(self.n, -1, dtype=np.int64)
        for node, kids in self.children.items():
            if len(kids) > 0:
                left[node] = kids[0]
            if len(kids) > 1:
                right[node] = kids[1]
        return left, right


def build_tree(n: int, seed: int) -> TreeTopology:
    """Complete binary tree over a seeded permutation of ``0..n-1``."""
    if n < 1:
        raise ValueError(f"tree needs at least one agent, got n={n}")
    order = np.random.default_rng(seed).permutation(n)
    parent, children, levels = {}, {}, {}
    for pos, agent in enumerate(order):
        agent = int(agent)
        children[agent] = []
        levels[agent] = int(np.floor(np.log2(pos + 1))) + 1
        if pos > 0:
            parent[agent] = int(order[(pos - 1) // 2])
    for pos in range(1, n):
        children[int(order[(pos - 1) // 2])].append(int(order[pos]))
    return TreeTopology(parent=parent, children=children, levels=levels, root=int(order[0]))


def select_plan(agent: AgentState, context, beta: float, target=None,
                margin: Optional[float] = None) -> int:
    """Index of the plan minimizing the beta-weighted cost given ``context``.

    ``context`` is the aggregate of every other agent's selection. Costs
    within ``margin`` of the best count as ties, which go to the lowest
    index.
    """
    context = np.asarray(context, dtype=np.float64)
    plans = agent.plan_set.plans
    if context.shape != (plans.shape[1],):
        raise ValueError(f"context has shape {context.shape}, expected ({plans.shape[1]},)")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    rows = context + plans
    if target is None:
        costs = rows.var(axis=1)
    else:
        costs = ((rows - np.asarray(target, dtype=np.float64)) ** 2).mean(axis=1)
    objective = (1.0 - beta) * costs + beta * agent.plan_set.discomforts
    if margin is None:
        margin = COST_RTOL * float(np.mean((context + agent.preferred) ** 2))
    margin_j = (1.0 - beta) * margin + beta * kernels._pykernels.SELECT_RTOL
    best = 0
    for s in range(1, len(objective)):
        if objective[s] < objective[best] - margin_j:
            best = s
    return best


@dataclass
class IterationTrace:
    global_cost: list = field(default_factory=list)
    avg_discomfort: list = field(default_factory=list)
    selections: list = field(default_factory=list)
    backend: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "global_cost", "avg_discomfort"])
        for t, (cost, disc) in enumerate(zip(self.global_cost, self.avg_discomfort)):
            writer.writerow([t, repr(float(cost)), repr(float(disc))])
        return buf.getvalue()

    def is_monotone(self) -> bool:
        return all(b <= a for a, b in zip(self.global_cost, self.global_cost[1:]))


def _margin(g, target) -> float:
    scale = float(np.mean(g ** 2))
    if target is not None:
        scale += float(np.mean(np.asarray(target) ** 2))
    return COST_RTOL * scale


def run_coordination(p: Population, topo: TreeTopology, iterations: int = 50,
                     target=None, backend: Optional[str] = None) -> IterationTrace:
    """Run ``iterations`` rounds of tree coordination, starting every agent
    on its preferred plan. Final selections are written back into ``p``.

    Row 0 of the returned trace is the initial state.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if topo.n != p.n:
        raise ValueError(f"topology covers {topo.n} agents, population has {p.n}")
    impl = kernels.get_backend(backend)
    n, d = p.n, p.d
    plans = np.ascontiguousarray(np.stack([a.plan_set.plans for a in p.agents]))
    disc = np.ascontiguousarray(np.stack([a.plan_set.discomforts for a in p.agents]))
    betas = np.array([a.beta for a in p.agents], dtype=np.float64)
    preferred = plans[np.arange(n), [a.plan_set.preferred_index for a in p.agents]]
    tgt = np.zeros(0) if target is None else np.ascontiguousarray(target, dtype=np.float64)
    if target is not None and tgt.shape != (d,):
        raise ValueError(f"target has shape {tgt.shape}, expected ({d},)")
    postorder = np.array(topo.postorder(), dtype=np.int64)
    preorder = topo.preorder()
    left, right = topo.child_arrays()

    sel = np.array([a.plan_set.preferred_index for a in p.agents], dtype=np.int64)
    rows = np.arange(n)

    def aggregate(selection):
        # order-independent, so it equals global_response() recomputed from scratch
        return slot_totals(plans[rows, selection])

    def record(selection, g):
        trace.global_cost.append(inefficiency(g, target))
        trace.avg_discomfort.append(
            float(np.sqrt(np.mean((plans[rows, selection] - preferred) ** 2)))
        )
        trace.selections.append(selection.copy())

    trace = IterationTrace(backend=backend or kernels.BACKEND)
    g = aggregate(sel)
    record(sel, g)
    for it in range(iterations):
        proposed, accepted = impl.bottom_up_pass(
            plans, disc, sel, betas, postorder, left, right, g, tgt, _margin(g, target)
        )
        # top-down: a change survives only if every ancestor accepted it
        approved = np.zeros(n, dtype=bool)
        new_sel = sel.copy()
        for node in preorder:
            par = topo.parent.get(node)
            approved[node] = accepted[node] and (par is None or approved[par])
            if approved[node]:
                new_sel[node] = proposed[node]
        g_new = aggregate(new_sel)
        if inefficiency(g_new, target) > trace.global_cost[-1]:
            logger.warning("iteration %d raised the global cost by rounding; reverted", it + 1)
            new_sel, g_new = sel, g
        sel, g = new_sel, g_new
        record(sel, g)

    for agent, idx in zip(p.agents, sel):
        agent.select(int(idx))
    return trace
