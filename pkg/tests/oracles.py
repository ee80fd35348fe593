"""Slow, independent reference implementations used as test oracles.

Nothing here imports the library's statistics; each function follows the
textbook definition as directly as possible.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def tau_b_pairs(x, y):
    """Kendall tau-b by enumerating every pair. None when undefined."""
    n = len(x)
    conc = disc = tie_x_only = tie_y_only = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = int(x[i] > x[j]) - int(x[i] < x[j])
            dy = int(y[i] > y[j]) - int(y[i] < y[j])
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tie_x_only += 1
            elif dy == 0:
                tie_y_only += 1
            elif dx == dy:
                conc += 1
            else:
                disc += 1
    denom = (conc + disc + tie_x_only) * (conc + disc + tie_y_only)
    if denom == 0:
        return None
    return (conc - disc) / math.sqrt(denom)


def s_stat(x, y):
    n = len(x)
    return sum(np.sign(x[i] - x[j]) * np.sign(y[i] - y[j]) for i in range(n) for j in range(i + 1, n))


def exact_p_enumeration(x, y):
    """Two-sided permutation p: share of the n! relabelings of y with |S| >= |S_obs|."""
    x, y = list(x), list(y)
    observed = abs(s_stat(x, y))
    hits = total = 0
    for perm in itertools.permutations(y):
        total += 1
        hits += abs(s_stat(x, perm)) >= observed - 1e-9
    return hits / total


def exact_p_vectorized(x, y):
    """Same enumeration as above, vectorized for n = 9 or 10."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(x)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int8)
    iu, ju = np.triu_indices(n, 1)
    sx = np.sign(x[iu] - x[ju])
    yp = y[perms]
    s = (np.sign(yp[:, iu] - yp[:, ju]) * sx).sum(axis=1)
    obs = abs(float((sx * np.sign(y[iu] - y[ju])).sum()))
    return float(np.mean(np.abs(s) >= obs - 1e-9))


def midranks(v):
    v = list(v)
    out = [0.0] * len(v)
    for i, a in enumerate(v):
        less = sum(b < a for b in v)
        equal = sum(b == a for b in v)
        out[i] = less + (equal + 1) / 2
    return out


def pearson(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    da, db = a - a.mean(), b - b.mean()
    return float((da * db).sum() / math.sqrt((da * da).sum() * (db * db).sum()))


def spearman(a, b):
    return pearson(midranks(a), midranks(b))


def partial_formula(x, y, z):
    txy, txz, tyz = tau_b_pairs(x, y), tau_b_pairs(x, z), tau_b_pairs(y, z)
    return (txy - txz * tyz) / math.sqrt((1 - txz ** 2) * (1 - tyz ** 2))


def residualize(target, controls):
    """Residuals of ``target`` on ``controls`` + intercept via the normal equations."""
    t = np.asarray(target, float)
    X = np.column_stack([np.ones(len(t))] + [np.asarray(c, float) for c in controls])
    beta = np.linalg.solve(X.T @ X, X.T @ t)
    return t - X @ beta


def partial_residual(x, y, controls):
    rc = [midranks(c) for c in controls]
    ex = np.round(residualize(midranks(x), rc), 9)
    ey = np.round(residualize(midranks(y), rc), 9)
    return tau_b_pairs(list(ex), list(ey))


def holm_by_hand(pvals, alpha):
    """Step-down: sort, compare the i-th smallest with alpha/(m-i), stop at the first failure."""
    m = len(pvals)
    order = sorted(range(m), key=lambda i: pvals[i])
    reject = [False] * m
    for step, i in enumerate(order):
        if pvals[i] <= alpha / (m - step):
            reject[i] = True
        else:
            break
    return reject


def bootstrap_slow(x, y, resamples, seed, families=None):
    """Percentile 95% CI of tau-b, one resample at a time."""
    rng = np.random.default_rng(seed)
    x, y = np.asarray(x, float), np.asarray(y, float)
    taus = []
    for _ in range(resamples):
        if families is None:
            idx = rng.integers(0, len(x), len(x))
        else:
            tags = list(dict.fromkeys(families))
            drawn = rng.integers(0, len(tags), len(tags))
            idx = np.concatenate([[k for k, f in enumerate(families) if f == tags[d]] for d in drawn]).astype(int)
        t = tau_b_pairs(list(x[idx]), list(y[idx]))
        if t is not None:
            taus.append(t)
    lo, hi = np.percentile(taus, [2.5, 97.5])
    return float(lo), float(hi)


def composite_fraction(depths, capacity):
    return Fraction(sum(d <= capacity for d in depths), len(depths))
