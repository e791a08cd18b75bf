"""Pure numpy implementation of the coordination hot loop.

Must stay in lock-step with ``_ckernels.pyx``; both are exercised by
``tests/test_kernels.py``.
"""

import numpy as np

SELECT_RTOL = 1e-10


def _cost_rows(rows, target):
    # rows: (m, d)
    if target.shape[0] == 0:
        return rows.var(axis=1)
    return ((rows - target) ** 2).mean(axis=1)


def _cost(vec, target):
    if target.shape[0] == 0:
        return float(vec.var())
    return float(((vec - target) ** 2).mean())


def _combos(nchild):
    # all-reject first so ties keep the previous state
    if nchild == 0:
        return [()]
    if nchild == 1:
        return [(False,), (True,)]
    return [(False, False), (True, False), (False, True), (True, True)]


def bottom_up_pass(plans, disc, sel, betas, postorder, left, right, g_prev, target, margin):
    """One leaf-to-root pass of the tree coordination.

    Returns ``(proposed, accepted)``: each agent's proposed plan index and
    whether its parent accepted the agent's subtree changes (root: True).
    """
    n, k, d = plans.shape
    prev_sub = np.zeros((n, d))
    new_sub = np.zeros((n, d))
    proposed = np.array(sel, dtype=np.int64, copy=True)
    accepted = np.ones(n, dtype=np.bool_)

    for a in postorder:
        own_prev = plans[a, sel[a]]
        kids = [c for c in (left[a], right[a]) if c >= 0]
        p_sub = own_prev.copy()
        for c in kids:
            p_sub += prev_sub[c]
        prev_sub[a] = p_sub
        base = g_prev - p_sub

        best_combo = None
        best_cost = 0.0
        best_chosen = None
        for combo in _combos(len(kids)):
            chosen = np.zeros(d)
            for c, acc in zip(kids, combo):
                chosen += new_sub[c] if acc else prev_sub[c]
            cst = _cost(base + chosen + own_prev, target)
            if best_combo is None or cst < best_cost - margin:
                best_combo, best_cost, best_chosen = combo, cst, chosen
        for c, acc in zip(kids, best_combo):
            accepted[c] = acc
        ctx = base + best_chosen

        beta = betas[a]
        costs_i = _cost_rows(ctx + plans[a], target)
        objective = (1.0 - beta) * costs_i + beta * disc[a]
        margin_j = (1.0 - beta) * margin + beta * SELECT_RTOL
        best = 0
        for s in range(1, k):
            if objective[s] < objective[best] - margin_j:
                best = s

        if best != sel[a] and not costs_i[best] < costs_i[sel[a]] - margin:
            best = sel[a]
        proposed[a] = best
        new_sub[a] = best_chosen + plans[a, best]
    return proposed, accepted
