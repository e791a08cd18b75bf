# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled coordination hot loop; mirrors ``_pykernels.bottom_up_pass``."""

import numpy as np

cdef double SELECT_RTOL = 1e-10


cdef double _cost2(const double* a, const double* b, const double* target,
                   Py_ssize_t d) noexcept nogil:
    # f_I(a + b); variance when target is NULL
    cdef Py_ssize_t i
    cdef double mean = 0.0, acc = 0.0, y
    if target != NULL:
        for i in range(d):
            y = a[i] + b[i] - target[i]
            acc += y * y
        return acc / d
    for i in range(d):
        mean += a[i] + b[i]
    mean /= d
    for i in range(d):
        y = a[i] + b[i] - mean
        acc += y * y
    return acc / d


def bottom_up_pass(const double[:, :, ::1] plans, const double[:, ::1] disc,
                   const long long[::1] sel, const double[::1] betas,
                   const long long[::1] postorder, const long long[::1] left,
                   const long long[::1] right, const double[::1] g_prev,
                   const double[::1] target, double margin):
    cdef Py_ssize_t n = plans.shape[0], k = plans.shape[1], d = plans.shape[2]
    cdef const double* tgt = NULL
    if target.shape[0] > 0:
        tgt = &target[0]
    prev_sub_arr = np.zeros((n, d))
    new_sub_arr = np.zeros((n, d))
    proposed_arr = np.array(sel, dtype=np.int64, copy=True)
    accepted_arr = np.ones(n, dtype=np.bool_)
    base_arr = np.zeros(d)
    chosen_arr = np.zeros(d)
    best_chosen_arr = np.zeros(d)
    ctx_arr = np.zeros(d)
    costs_arr = np.zeros(k)
    cdef double[:, ::1] prev_sub = prev_sub_arr
    cdef double[:, ::1] new_sub = new_sub_arr
    cdef long long[::1] proposed = proposed_arr
    cdef unsigned char[::1] accepted = accepted_arr.view(np.uint8)
    cdef double[::1] base = base_arr
    cdef double[::1] chosen = chosen_arr
    cdef double[::1] best_chosen = best_chosen_arr
    cdef double[::1] ctx = ctx_arr
    cdef double[::1] costs = costs_arr

    cdef Py_ssize_t idx, a, i, s, ci, best, own
    cdef long long kids[2]
    cdef int nkids, combo, ncombos, best_combo
    cdef double cst, best_cost, beta, obj, best_obj, margin_j

    with nogil:
        for idx in range(postorder.shape[0]):
            a = postorder[idx]
            own = sel[a]
            nkids = 0
            if left[a] >= 0:
                kids[nkids] = left[a]
                nkids += 1
            if right[a] >= 0:
                kids[nkids] = right[a]
                nkids += 1
            for i in range(d):
                prev_sub[a, i] = plans[a, own, i]
            for ci in range(nkids):
                for i in range(d):
                    prev_sub[a, i] += prev_sub[kids[ci], i]
            for i in range(d):
                base[i] = g_prev[i] - prev_sub[a, i]

            # combo bit ci set = accept child ci; 0 (reject all) is tried first
            ncombos = 1 << nkids
            best_combo = -1
            best_cost = 0.0
            for combo in range(ncombos):
                for i in range(d):
                    chosen[i] = 0.0
                for ci in range(nkids):
                    if combo & (1 << ci):
                        for i in range(d):
                            chosen[i] += new_sub[kids[ci], i]
                    else:
                        for i in range(d):
                            chosen[i] += prev_sub[kids[ci], i]
                for i in range(d):
                    ctx[i] = base[i] + chosen[i]
                cst = _cost2(&ctx[0], &plans[a, own, 0], tgt, d)
                if best_combo < 0 or cst < best_cost - margin:
                    best_combo = combo
                    best_cost = cst
                    for i in range(d):
                        best_chosen[i] = chosen[i]
            for ci in range(nkids):
                accepted[kids[ci]] = 1 if best_combo & (1 << ci) else 0
            for i in range(d):
                ctx[i] = base[i] + best_chosen[i]

            beta = betas[a]
            margin_j = (1.0 - beta) * margin + beta * SELECT_RTOL
            best = 0
            best_obj = 0.0
            for s in range(k):
                costs[s] = _cost2(&ctx[0], &plans[a, s, 0], tgt, d)
                obj = (1.0 - beta) * costs[s] + beta * disc[a, s]
                if s == 0 or obj < best_obj - margin_j:
                    best = s
                    best_obj = obj
            if best != own and not costs[best] < costs[own] - margin:
                best = own
            proposed[a] = best
            for i in range(d):
                new_sub[a, i] = best_chosen[i] + plans[a, best, i]
    return proposed_arr, accepted_arr
