"""Compiled evaluation primitives shared by the problem API and the solver kernels.

Every objective/constraint evaluation in the package goes through these
functions, so a point re-evaluated through the public API reproduces the
solver-internal floats bit for bit.

Constraints are stored in a packed (Q, L, b) form covering both kinds:
g_j(x) = b[j] + sum_k (Q[j,k] * x_k^2 + L[j,k] * x_k).  Linear constraints
have an all-zero Q row.
"""

import numpy as np
from numba import njit

OBJ_SPHERE = 0
OBJ_ACKLEY = 1
OBJ_ROSENBROCK = 2


@njit(cache=True)
def objective_value(code, x):
    """Shifted benchmark objective: minimum value 0, minimizer at the origin."""
    n = x.shape[0]
    if code == OBJ_SPHERE:
        s = 0.0
        for i in range(n):
            s += x[i] * x[i]
        return s
    elif code == OBJ_ACKLEY:
        sq = 0.0
        cs = 0.0
        for i in range(n):
            sq += x[i] * x[i]
            cs += np.cos(2.0 * np.pi * x[i])
        mc = cs / n
        if mc > 1.0:  # fp guard: keeps the value exactly 0 at the origin, >= 0 elsewhere
            mc = 1.0
        return (20.0 - 20.0 * np.exp(-0.2 * np.sqrt(sq / n))) + (np.e - np.exp(mc))
    else:
        # Rosenbrock evaluated at z = x + 1 so the minimizer sits at the origin.
        s = 0.0
        for i in range(n - 1):
            zi = x[i] + 1.0
            zn = x[i + 1] + 1.0
            d = zn - zi * zi
            e = 1.0 - zi
            s += 100.0 * d * d + e * e
        return s


@njit(cache=True)
def constraint_values(Q, L, b, x, out):
    """Fill ``out`` with g_j(x) for every packed constraint row."""
    m = b.shape[0]
    n = x.shape[0]
    for j in range(m):
        g = b[j]
        for k in range(n):
            g += Q[j, k] * x[k] * x[k] + L[j, k] * x[k]
        out[j] = g


@njit(cache=True)
def total_violation(g):
    phi = 0.0
    for j in range(g.shape[0]):
        if g[j] > 0.0:
            phi += g[j]
    return phi


@njit(cache=True)
def eval_point(code, Q, L, b, x):
    """Evaluate one point: (objective, constraint values, total violation)."""
    g = np.empty(b.shape[0])
    constraint_values(Q, L, b, x, g)
    return objective_value(code, x), g, total_violation(g)


@njit(cache=True)
def eval_batch(code, Q, L, b, X):
    """Evaluate rows of X: returns (objectives, constraint matrix, violations)."""
    N = X.shape[0]
    m = b.shape[0]
    F = np.empty(N)
    G = np.empty((N, m))
    Phi = np.empty(N)
    for i in range(N):
        x = X[i]
        F[i] = objective_value(code, x)
        constraint_values(Q, L, b, x, G[i])
        Phi[i] = total_violation(G[i])
    return F, G, Phi


@njit(cache=True)
def in_bounds(x, lo, hi):
    for i in range(x.shape[0]):
        if x[i] < lo[i] or x[i] > hi[i]:
            return False
    return True


@njit(cache=True)
def feasible_fraction(code, Q, L, b, lo, hi, samples, rng):
    """Fraction of uniform samples from the box [lo, hi] with zero violation."""
    n = lo.shape[0]
    g = np.empty(b.shape[0])
    x = np.empty(n)
    hits = 0
    for _ in range(samples):
        for i in range(n):
            x[i] = lo[i] + (hi[i] - lo[i]) * rng.random()
        constraint_values(Q, L, b, x, g)
        if total_violation(g) == 0.0:
            hits += 1
    return hits / samples
