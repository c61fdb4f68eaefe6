"""Compiled solver loops.

Each kernel consumes evaluations one point at a time from a shared budget
(``max_fen``), tracks the lexicographic (violation, objective) best, and
returns as soon as an evaluated point is in bounds, has zero violation, and
reaches the target gap.  The returned ``fen`` is the exact number of
evaluations performed, including gradient-repair probes.

All randomness flows through the ``numpy.random.Generator`` passed in, so a
run is bit-reproducible from its seed.
"""

import numpy as np
from numba import njit

from .._evalcore import constraint_values, in_bounds, objective_value, total_violation


@njit(cache=True, inline="always")
def _lex_better(phi_a, f_a, phi_b, f_b):
    return phi_a < phi_b or (phi_a == phi_b and f_a < f_b)


@njit(cache=True, inline="always")
def _eps_not_worse(f_a, phi_a, f_b, phi_b, eps):
    """Epsilon-level comparison: does a tie or beat b?"""
    if (phi_a <= eps and phi_b <= eps) or phi_a == phi_b:
        return f_a <= f_b
    return phi_a < phi_b


@njit(cache=True, inline="always")
def _record(y, f, phi, lo, hi, delta, best_x, best_key):
    """Track the lexicographic best; True when this evaluation solves the run."""
    if _lex_better(phi, f, best_key[0], best_key[1]):
        best_key[0] = phi
        best_key[1] = f
        for i in range(y.shape[0]):
            best_x[i] = y[i]
    return phi == 0.0 and f <= delta and in_bounds(y, lo, hi)


@njit(cache=True)
def de_solve(rng, code, Q, L, b, lo, hi, pop_size, scale, cross_rate,
             eps_quantile, eps_cutoff, repair_prob, grad_step, max_fen, delta):
    """DE/rand/1/bin with epsilon-level selection and gradient repair."""
    n = lo.shape[0]
    m = b.shape[0]
    X = np.empty((pop_size, n))
    Xf = np.empty(pop_size)
    Xphi = np.empty(pop_size)
    best_x = np.zeros(n)
    best_key = np.array([np.inf, np.inf])
    g = np.empty(m)
    fen = 0

    for i in range(pop_size):
        for k in range(n):
            X[i, k] = lo[k] + (hi[k] - lo[k]) * rng.random()
        f = objective_value(code, X[i])
        constraint_values(Q, L, b, X[i], g)
        phi = total_violation(g)
        fen += 1
        Xf[i] = f
        Xphi[i] = phi
        if _record(X[i], f, phi, lo, hi, delta, best_x, best_key):
            return fen, True, best_x, best_key[1], best_key[0]
        if fen == max_fen:
            return fen, False, best_x, best_key[1], best_key[0]

    # epsilon level starts at the violation of the eps_quantile-ranked
    # initial individual and decays to zero over the first eps_cutoff
    # fraction of the generation budget
    qidx = int(eps_quantile * pop_size)
    if qidx > pop_size - 1:
        qidx = pop_size - 1
    eps0 = np.sort(Xphi)[qidx]
    total_gens = (max_fen - pop_size) // pop_size
    if total_gens < 1:
        total_gens = 1
    cutoff_gen = int(eps_cutoff * total_gens)

    trial = np.empty(n)
    tg = np.empty(m)
    gp = np.empty(m)
    gm = np.empty(m)
    t = 0
    while fen < max_fen:
        if t < cutoff_gen:
            frac = 1.0 - t / cutoff_gen
            eps = eps0 * frac**5
        else:
            eps = 0.0
        for i in range(pop_size):
            r1 = rng.integers(0, pop_size)
            while r1 == i:
                r1 = rng.integers(0, pop_size)
            r2 = rng.integers(0, pop_size)
            while r2 == i or r2 == r1:
                r2 = rng.integers(0, pop_size)
            r3 = rng.integers(0, pop_size)
            while r3 == i or r3 == r1 or r3 == r2:
                r3 = rng.integers(0, pop_size)
            jrand = rng.integers(0, n)
            for k in range(n):
                if rng.random() < cross_rate or k == jrand:
                    v = X[r1, k] + scale * (X[r2, k] - X[r3, k])
                else:
                    v = X[i, k]
                if v < lo[k]:
                    v = lo[k]
                elif v > hi[k]:
                    v = hi[k]
                trial[k] = v

            tf = objective_value(code, trial)
            constraint_values(Q, L, b, trial, tg)
            tphi = total_violation(tg)
            fen += 1
            if _record(trial, tf, tphi, lo, hi, delta, best_x, best_key):
                return fen, True, best_x, best_key[1], best_key[0]
            if fen == max_fen:
                return fen, False, best_x, best_key[1], best_key[0]

            if tphi > 0.0 and repair_prob > 0.0 and rng.random() < repair_prob:
                # One least-squares Newton step on the violated constraints,
                # using a central-difference Jacobian (2n budgeted probes).
                J = np.empty((m, n))
                aborted = False
                for k in range(n):
                    xk = trial[k]
                    trial[k] = xk + grad_step
                    fp = objective_value(code, trial)
                    constraint_values(Q, L, b, trial, gp)
                    fen += 1
                    if _record(trial, fp, total_violation(gp), lo, hi, delta, best_x, best_key):
                        return fen, True, best_x, best_key[1], best_key[0]
                    if fen == max_fen:
                        trial[k] = xk
                        aborted = True
                        break
                    trial[k] = xk - grad_step
                    fm = objective_value(code, trial)
                    constraint_values(Q, L, b, trial, gm)
                    fen += 1
                    if _record(trial, fm, total_violation(gm), lo, hi, delta, best_x, best_key):
                        return fen, True, best_x, best_key[1], best_key[0]
                    trial[k] = xk
                    if fen == max_fen:
                        aborted = True
                        break
                    for j in range(m):
                        J[j, k] = (gp[j] - gm[j]) / (2.0 * grad_step)
                if aborted:
                    return fen, False, best_x, best_key[1], best_key[0]

                nviol = 0
                for j in range(m):
                    if tg[j] > 0.0:
                        nviol += 1
                Jv = np.empty((nviol, n))
                rhs = np.empty(nviol)
                row = 0
                for j in range(m):
                    if tg[j] > 0.0:
                        for k in range(n):
                            Jv[row, k] = J[j, k]
                        rhs[row] = -tg[j]
                        row += 1
                dx = np.linalg.lstsq(Jv, rhs)[0]
                for k in range(n):
                    v = trial[k] + dx[k]
                    if v < lo[k]:
                        v = lo[k]
                    elif v > hi[k]:
                        v = hi[k]
                    trial[k] = v
                tf = objective_value(code, trial)
                constraint_values(Q, L, b, trial, tg)
                tphi = total_violation(tg)
                fen += 1
                if _record(trial, tf, tphi, lo, hi, delta, best_x, best_key):
                    return fen, True, best_x, best_key[1], best_key[0]
                if fen == max_fen:
                    return fen, False, best_x, best_key[1], best_key[0]

            if _eps_not_worse(tf, tphi, Xf[i], Xphi[i], eps):
                for k in range(n):
                    X[i, k] = trial[k]
                Xf[i] = tf
                Xphi[i] = tphi
        t += 1
    return fen, False, best_x, best_key[1], best_key[0]


@njit(cache=True)
def es_solve(rng, code, Q, L, b, lo, hi, dir_smoothing, shrink_rate,
             target_success, success_smoothing, damping, cov_learning,
             sigma0, max_fen, delta):
    """(1+1)-ES with step-size control and a covariance transform.

    The transform A (and its tracked inverse) is shrunk along exponentially
    smoothed directions of violated constraints, and expanded rank-one
    toward accepted steps.  Acceptance is lexicographic on (violation,
    objective) so the search also works from an infeasible start.
    """
    n = lo.shape[0]
    m = b.shape[0]
    best_x = np.zeros(n)
    best_key = np.array([np.inf, np.inf])

    x = np.empty(n)
    for k in range(n):
        x[k] = lo[k] + (hi[k] - lo[k]) * rng.random()
    g = np.empty(m)
    f = objective_value(code, x)
    constraint_values(Q, L, b, x, g)
    phi = total_violation(g)
    fen = 1
    if _record(x, f, phi, lo, hi, delta, best_x, best_key):
        return fen, True, best_x, best_key[1], best_key[0]

    A = np.eye(n)
    Ainv = np.eye(n)
    V = np.zeros((m, n))
    sigma = sigma0
    width = 0.0
    for k in range(n):
        width += hi[k] - lo[k]
    width /= n
    p_succ = target_success

    y = np.empty(n)
    gy = np.empty(m)
    while fen < max_fen:
        z = rng.standard_normal(n)
        step = A @ z
        for k in range(n):
            v = x[k] + sigma * step[k]
            if v < lo[k]:
                v = lo[k]
            elif v > hi[k]:
                v = hi[k]
            y[k] = v
        yf = objective_value(code, y)
        constraint_values(Q, L, b, y, gy)
        yphi = total_violation(gy)
        fen += 1
        if _record(y, yf, yphi, lo, hi, delta, best_x, best_key):
            return fen, True, best_x, best_key[1], best_key[0]

        # A feasible parent only accepts feasible offspring; an infeasible
        # parent descends the (violation, objective) lexicographic order.
        if phi == 0.0:
            success = yphi == 0.0 and yf <= f
        else:
            success = not _lex_better(phi, f, yphi, yf)

        if yphi > 0.0:
            nviol = 0
            for j in range(m):
                if gy[j] > 0.0:
                    nviol += 1
            gamma = shrink_rate / nviol
            for j in range(m):
                if gy[j] <= 0.0:
                    continue
                for k in range(n):
                    V[j, k] = (1.0 - dir_smoothing) * V[j, k] + dir_smoothing * step[k]
                w = Ainv @ V[j]
                ww = w @ w
                if ww < 1e-300:
                    continue
                # A <- A (I - gamma w w^T / ww); Sherman-Morrison keeps Ainv in step
                for p in range(n):
                    for q in range(n):
                        A[p, q] -= gamma * V[j, p] * w[q] / ww
                r = w @ Ainv
                co = gamma / ((1.0 - gamma) * ww)
                for p in range(n):
                    for q in range(n):
                        Ainv[p, q] += co * w[p] * r[q]

        p_succ = (1.0 - success_smoothing) * p_succ
        if success:
            p_succ += success_smoothing
        sigma *= np.exp((p_succ - target_success) / (damping * (1.0 - target_success)))
        if sigma < 1e-12:
            sigma = 1e-12
        elif sigma > width:
            sigma = width

        if success:
            for k in range(n):
                x[k] = y[k]
            f = yf
            phi = yphi
            zz = z @ z
            if zz > 0.0:
                ca = np.sqrt(1.0 - cov_learning)
                cb = ca / zz * (np.sqrt(1.0 + cov_learning * zz / (1.0 - cov_learning)) - 1.0)
                u = A @ z
                alpha = cb / ca
                r = z @ Ainv
                den = 1.0 + alpha * zz
                for p in range(n):
                    for q in range(n):
                        A[p, q] = ca * A[p, q] + cb * u[p] * z[q]
                        Ainv[p, q] = (Ainv[p, q] - alpha / den * z[p] * r[q]) / ca

        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(Ainv))):
            A = np.eye(n)
            Ainv = np.eye(n)
            sigma = sigma0
    return fen, False, best_x, best_key[1], best_key[0]


@njit(cache=True)
def pso_solve(rng, code, Q, L, b, lo, hi, pop_size, sub_size, max_fen, delta):
    """Sub-swarm PSO with |N(0,1)| velocity coefficients and feasibility rules.

    Each generation the swarm is randomly repartitioned into sub-swarms of
    ``sub_size``; every particle moves toward its personal best and its
    sub-swarm's best, compared by (violation, objective) lexicographic order.
    """
    n = lo.shape[0]
    m = b.shape[0]
    best_x = np.zeros(n)
    best_key = np.array([np.inf, np.inf])
    g = np.empty(m)
    fen = 0

    X = np.empty((pop_size, n))
    Pb = np.empty((pop_size, n))
    Pf = np.empty(pop_size)
    Pphi = np.empty(pop_size)
    for i in range(pop_size):
        for k in range(n):
            X[i, k] = lo[k] + (hi[k] - lo[k]) * rng.random()
        f = objective_value(code, X[i])
        constraint_values(Q, L, b, X[i], g)
        phi = total_violation(g)
        fen += 1
        for k in range(n):
            Pb[i, k] = X[i, k]
        Pf[i] = f
        Pphi[i] = phi
        if _record(X[i], f, phi, lo, hi, delta, best_x, best_key):
            return fen, True, best_x, best_key[1], best_key[0]
        if fen == max_fen:
            return fen, False, best_x, best_key[1], best_key[0]

    groups = pop_size // sub_size
    while fen < max_fen:
        perm = rng.permutation(pop_size)
        for gi in range(groups):
            lead = perm[gi * sub_size]
            for s in range(1, sub_size):
                cand = perm[gi * sub_size + s]
                if _lex_better(Pphi[cand], Pf[cand], Pphi[lead], Pf[lead]):
                    lead = cand
            for s in range(sub_size):
                i = perm[gi * sub_size + s]
                for k in range(n):
                    a = abs(rng.standard_normal())
                    c = abs(rng.standard_normal())
                    v = a * (Pb[i, k] - X[i, k]) + c * (Pb[lead, k] - X[i, k])
                    xk = X[i, k] + v
                    if xk < lo[k]:
                        xk = lo[k]
                    elif xk > hi[k]:
                        xk = hi[k]
                    X[i, k] = xk
                f = objective_value(code, X[i])
                constraint_values(Q, L, b, X[i], g)
                phi = total_violation(g)
                fen += 1
                if _record(X[i], f, phi, lo, hi, delta, best_x, best_key):
                    return fen, True, best_x, best_key[1], best_key[0]
                if _lex_better(phi, f, Pphi[i], Pf[i]):
                    for k in range(n):
                        Pb[i, k] = X[i, k]
                    Pf[i] = f
                    Pphi[i] = phi
                if fen == max_fen:
                    return fen, False, best_x, best_key[1], best_key[0]
    return fen, False, best_x, best_key[1], best_key[0]
