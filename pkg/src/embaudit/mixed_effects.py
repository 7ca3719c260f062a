"""Random-intercept linear mixed model for paired classifier comparisons.

Model::

    y = mu + beta * x + alpha[group] + eps,
    alpha ~ N(0, s2_alpha),  eps ~ N(0, s2_eps)

``y`` stacks the prediction deviations (predicted minus human label) of model
a (``x = 1``) over those of model b (``x = 0``) for the same headlines, and
``group`` is the target word that brought each headline into the test set.

Fitting is REML with ``s2_eps`` profiled out. Only the ratio
``lam = s2_alpha / s2_eps`` remains; it is searched on ``log lam`` in
``[-12, 12]``. For a random intercept the marginal covariance of group ``g``
is ``s2_eps * (I + lam * 11')``, whose inverse and determinant have closed
forms, so every evaluation costs O(rows).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

LOG_LAM_BOUNDS = (-12.0, 12.0)
GOLDEN_TOL = 1e-8
MAX_ITER = 200
SIGMA_ALPHA2_FLOOR = 1e-10
_RSS_FLOOR = 1e-300
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class MixedModelError(ValueError):
    pass


@dataclass(frozen=True)
class MisclassDataset:
    y: np.ndarray
    group: np.ndarray
    x: np.ndarray
    category: str = ""

    def __post_init__(self):
        if not (len(self.y) == len(self.group) == len(self.x)):
            raise MixedModelError("y, group and x must have equal length")

    def __len__(self) -> int:
        return len(self.y)


def build_dataset(preds_a: Sequence[int], preds_b: Sequence[int], human: Sequence[int],
                  target_words: Sequence[Hashable], category: str = "") -> MisclassDataset:
    """Stack ``preds_a - human`` (x = 1) over ``preds_b - human`` (x = 0)."""
    a, b, h = (np.asarray(v, dtype=np.int64) for v in (preds_a, preds_b, human))
    if not (a.size == b.size == h.size == len(target_words)):
        raise MixedModelError(
            f"length mismatch: preds_a={a.size}, preds_b={b.size}, human={h.size}, "
            f"targets={len(target_words)}"
        )
    if a.size == 0:
        raise MixedModelError("empty input")
    for name, v in (("preds_a", a), ("preds_b", b), ("human", h)):
        if not np.isin(v, (-1, 0, 1)).all():
            raise MixedModelError(f"{name} must be coded -1/0/+1")
    y = np.concatenate([a - h, b - h]).astype(np.float64)
    groups = np.asarray(list(target_words) * 2, dtype=object)
    x = np.concatenate([np.ones(a.size), np.zeros(a.size)])
    return MisclassDataset(y, groups, x, category)


@dataclass(frozen=True)
class MixedFit:
    beta: float
    se_beta: float
    p_value: float
    sigma_alpha2: float
    sigma_eps2: float
    intercept: float
    converged: bool
    lam: float
    objective: float
    n_rows: int
    n_groups: int
    iterations: int


class _GroupedDesign:
    """Per-group sufficient statistics for the intercept + indicator design."""

    def __init__(self, y: np.ndarray, x: np.ndarray, group: np.ndarray):
        codes, inverse = np.unique(group, return_inverse=True)
        inverse = inverse.ravel()
        self.n = y.size
        self.n_groups = codes.size
        X = np.column_stack([np.ones(self.n), x])
        self.X = X
        self.y = y
        self.sizes = np.bincount(inverse, minlength=self.n_groups).astype(np.float64)
        # per-group column sums of [1, x, y]
        self.sx = np.column_stack([np.bincount(inverse, weights=X[:, j], minlength=self.n_groups)
                                   for j in range(2)])
        self.sy = np.bincount(inverse, weights=y, minlength=self.n_groups)
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.yty = float(y @ y)

    def solve(self, lam: float):
        """GLS pieces at variance ratio ``lam``: (beta, X'H^-1X, r'H^-1r, log|H|)."""
        w = lam / (1.0 + lam * self.sizes)
        A = self.XtX - (self.sx * w[:, None]).T @ self.sx
        b = self.Xty - (self.sx * (w * self.sy)[:, None]).sum(axis=0)
        yHy = self.yty - float((w * self.sy ** 2).sum())
        coef = np.linalg.solve(A, b)
        rss = yHy - float(b @ coef)
        logdet_h = float(np.log1p(lam * self.sizes).sum())
        return coef, A, max(rss, 0.0), logdet_h


def reml_objective(design: _GroupedDesign, log_lam: float) -> float:
    """-2 x profiled REML log-likelihood, up to an additive constant."""
    lam = math.exp(log_lam)
    _, A, rss, logdet_h = design.solve(lam)
    dof = design.n - 2
    sign, logdet_a = np.linalg.slogdet(A)
    return dof * math.log(max(rss / dof, _RSS_FLOOR)) + logdet_h + logdet_a


def _golden_section(f, lo: float, hi: float, tol: float, max_iter: int):
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    it = 0
    while hi - lo > tol and it < max_iter:
        it += 1
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
    x, fx = (c, fc) if fc <= fd else (d, fd)
    return x, fx, it, hi - lo <= tol


def _wald_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def fit_random_intercept(data: MisclassDataset, *, n_scan: int = 49) -> MixedFit:
    """REML fit of the random-intercept model.

    A coarse scan over ``n_scan`` log-ratio points brackets the optimum and
    golden-section search refines it; the boundary points are kept as
    candidates so a variance ratio pinned at a bound is reported as such.
    """
    y = np.asarray(data.y, dtype=np.float64)
    x = np.asarray(data.x, dtype=np.float64)
    if y.size < 4:
        raise MixedModelError(f"need at least 4 rows, got {y.size}")
    if not np.isfinite(y).all():
        raise MixedModelError("y must be finite")
    if np.ptp(x) == 0:
        raise MixedModelError("singular design: the model indicator is constant")
    design = _GroupedDesign(y, x, np.asarray(data.group))
    if design.n_groups < 2:
        raise MixedModelError("need at least two groups")
    if np.linalg.matrix_rank(design.XtX) < 2:
        raise MixedModelError("singular design")

    f = lambda t: reml_objective(design, t)  # noqa: E731
    lo, hi = LOG_LAM_BOUNDS
    grid = np.linspace(lo, hi, n_scan)
    values = np.array([f(t) for t in grid])
    k = int(np.argmin(values))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_scan - 1)]
    t_best, f_best, iters, converged = _golden_section(f, a, b, GOLDEN_TOL, MAX_ITER)
    for t_edge, f_edge in ((grid[0], values[0]), (grid[-1], values[-1])):
        if f_edge < f_best:
            t_best, f_best = t_edge, f_edge

    lam = math.exp(t_best)
    coef, A, rss, _ = design.solve(lam)
    dof = design.n - 2
    s2_eps = rss / dof
    cov = s2_eps * np.linalg.inv(A)
    beta = float(coef[1])
    se = math.sqrt(max(cov[1, 1], 0.0))
    if se > 0:
        p = _wald_p(beta / se)
    else:
        p = 1.0 if beta == 0 else 0.0
    return MixedFit(
        beta=beta, se_beta=se, p_value=p,
        sigma_alpha2=max(lam * s2_eps, SIGMA_ALPHA2_FLOOR), sigma_eps2=s2_eps,
        intercept=float(coef[0]), converged=bool(converged), lam=lam, objective=float(f_best),
        n_rows=design.n, n_groups=design.n_groups, iterations=iters,
    )


@dataclass
class ComparisonRow:
    category: str
    model_a: str
    model_b: str
    fit: MixedFit | None
    error: str | None = None


def compare_models(datasets: Sequence[MisclassDataset], model_a: str = "a",
                   model_b: str = "b") -> list[ComparisonRow]:
    """Fit each category's dataset; a failed fit becomes a row with ``error`` set."""
    rows = []
    for ds in datasets:
        try:
            rows.append(ComparisonRow(ds.category, model_a, model_b, fit_random_intercept(ds)))
        except (MixedModelError, np.linalg.LinAlgError) as exc:
            rows.append(ComparisonRow(ds.category, model_a, model_b, None, str(exc)))
    return rows


RESULT_COLUMNS = ["category", "model_a", "model_b", "estimate", "se", "p_value",
                  "sigma_alpha2", "sigma_eps2", "n_rows", "n_groups", "converged", "error"]


def result_row(r: ComparisonRow) -> list:
    if r.fit is None:
        return [r.category, r.model_a, r.model_b, "", "", "", "", "", "", "", "", r.error or ""]
    f = r.fit
    return [r.category, r.model_a, r.model_b, repr(f.beta), repr(f.se_beta), repr(f.p_value),
            repr(f.sigma_alpha2), repr(f.sigma_eps2), f.n_rows, f.n_groups,
            str(f.converged).lower(), ""]
