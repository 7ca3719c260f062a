"""Independent reference implementations used to check the package.

They share no code with the package beyond reading vectors out of an
``EmbeddingSpace`` and are written for clarity, not speed.
"""
import itertools
import math

import numpy as np

TIE_TOLERANCE = 1e-12


# -- permutation test: pure Python, enumerates assignments literally -----------

def _cos(u, v):
    return sum(x * y for x, y in zip(u, v)) / (math.sqrt(sum(x * x for x in u)) * math.sqrt(sum(y * y for y in v)))


def _assoc(sp, t, A, B):
    vec = lambda w: [float(x) for x in sp.vector(w)]  # noqa: E731
    pa = [_cos(vec(t), vec(p)) for p in A if p in sp]
    pb = [_cos(vec(t), vec(q)) for q in B if q in sp]
    return sum(pa) / len(pa) - sum(pb) / len(pb)


def oracle_counts(pair, targets, A, B):
    """(#assignments with stat >= observed, #assignments) by direct enumeration."""
    a, b = pair.space_a, pair.space_b
    per = {t: {"a": _assoc(a, t, A, B), "b": _assoc(b, t, A, B)} for t in targets}
    other = {"a": "b", "b": "a"}
    stats = []
    for omega in itertools.product("ab", repeat=len(targets)):
        group_a = sum(per[t][side] for t, side in zip(targets, omega))
        group_b = sum(per[t][other[side]] for t, side in zip(targets, omega))
        stats.append(group_a - group_b)
    observed = stats[0]  # all-'a' comes first in product order
    return sum(s >= observed - TIE_TOLERANCE for s in stats), len(stats)


# -- random-intercept model: dense GLS over a fixed log-ratio grid ---------------

def gls_grid_oracle(y, x, group, n_points=10_000, lo=-12.0, hi=12.0):
    """(beta, log_lam) minimizing the profiled REML criterion over a grid.

    Builds the dense group-membership matrix Z, diagonalizes ZZ' once and
    evaluates V = I + lam ZZ' at every grid point through that basis.
    """
    y, x, group = np.asarray(y, float), np.asarray(x, float), np.asarray(group)
    n = y.size
    Z = (group[:, None] == np.unique(group)[None, :]).astype(float)
    d, Q = np.linalg.eigh(Z @ Z.T)
    d = np.clip(d, 0.0, None)
    X = np.column_stack([np.ones(n), x])
    QX, Qy = Q.T @ X, Q.T @ y
    best = (np.inf, None, None)
    for t in np.linspace(lo, hi, n_points):
        w = 1.0 / (1.0 + math.exp(t) * d)  # eigenvalues of V^-1
        A = (QX * w[:, None]).T @ QX
        coef = np.linalg.solve(A, (QX * w[:, None]).T @ Qy)
        r = Qy - QX @ coef
        rss = float((w * r * r).sum())
        obj = (n - 2) * math.log(rss / (n - 2)) - float(np.log(w).sum()) + float(np.linalg.slogdet(A)[1])
        if obj < best[0]:
            best = (obj, float(coef[1]), float(t))
    return best[1], best[2]


def synthetic_misclass(seed, n_groups=50, rows_per_group=20, beta=0.10, sigma_alpha=0.5,
                       sigma_eps=1.0, paired=True):
    """(y, x, group) from the random-intercept model.

    ``paired`` gives every group equal halves under x = 1 and x = 0, the
    layout of a stacked two-model comparison; otherwise x is a fair coin per
    row.
    """
    rng = np.random.default_rng(seed)
    group = np.repeat(np.arange(n_groups), rows_per_group)
    if paired:
        half = rows_per_group // 2
        x = np.tile(np.repeat([1.0, 0.0], half), n_groups)
    else:
        x = rng.integers(0, 2, group.size).astype(float)
    alpha = rng.normal(0.0, sigma_alpha, n_groups)
    y = 0.3 + beta * x + alpha[group] + rng.normal(0.0, sigma_eps, group.size)
    return y, x, group
