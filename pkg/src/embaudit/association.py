"""Cross-corpus word-association test with randomization inference.

Each target word has one vector in each of two aligned spaces. Its
association in space ``s`` is

    assoc_s(t) = mean cos(t_s, A_s) - mean cos(t_s, B_s)

with the attribute vectors taken from the same space as the target vector.
The observed statistic is ``sum_t assoc_a(t) - sum_t assoc_b(t)``. The null
distribution swaps, independently for each target, which of its two vectors
lands in group a; a swap flips the sign of that target's paired difference
``assoc_a(t) - assoc_b(t)``.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embedding_io import AttributeLexicon, CategoryWordList, EmbeddingSpace
from .embedding_space import AlignedPair, cosine_matrix

log = logging.getLogger(__name__)

TIE_TOL = 1e-12
EXACT_MAX_TARGETS = 20
DEFAULT_DRAWS = 100_000

P_VALUE_RULE = "(#{s_perm >= s_obs} + 1) / (N + 1)"
SD_DIVISOR = "n-1"


class AssociationError(ValueError):
    pass


@dataclass(frozen=True)
class PermutationPlan:
    mode: str = "monte_carlo"
    n_draws: int = DEFAULT_DRAWS
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "monte_carlo"):
            raise ValueError(f"unknown permutation mode {self.mode!r}")
        if self.mode == "monte_carlo" and self.n_draws < 1:
            raise ValueError("n_draws must be at least 1")

    @classmethod
    def auto(cls, n_targets: int, n_draws: int = DEFAULT_DRAWS, seed: int = 0) -> "PermutationPlan":
        if n_targets <= EXACT_MAX_TARGETS:
            return cls("exact", 0, seed)
        return cls("monte_carlo", n_draws, seed)


def _attribute_rows(space: EmbeddingSpace, words: Sequence[str], what: str) -> np.ndarray:
    present = [w for w in words if w in space]
    if not present:
        raise AssociationError(f"no {what} attribute word is in the vocabulary of {space.name!r}")
    return space.rows(present)


def word_association(space: EmbeddingSpace, t: str, A: Sequence[str], B: Sequence[str]) -> float:
    """Mean cosine of ``t`` to ``A`` minus mean cosine to ``B``; OOV attributes are skipped."""
    if t not in space:
        raise AssociationError(f"target {t!r} is not in the vocabulary of {space.name!r}")
    return float(associations(space, [t], A, B)[0])


def associations(space: EmbeddingSpace, targets: Sequence[str],
                 A: Sequence[str], B: Sequence[str]) -> np.ndarray:
    """Vectorized :func:`word_association` over ``targets``."""
    T = space.rows(targets)
    pos = _attribute_rows(space, A, "positive")
    neg = _attribute_rows(space, B, "negative")
    return cosine_matrix(T, pos).mean(axis=1) - cosine_matrix(T, neg).mean(axis=1)


@dataclass(frozen=True, eq=False)
class AssociationQuery:
    """Target category and lexicon realized in an aligned pair of spaces.

    Targets outside the shared vocabulary are dropped at construction.
    """

    targets: CategoryWordList
    lexicon: AttributeLexicon
    pair: AlignedPair
    used: tuple[str, ...] = field(init=False)
    dropped: tuple[str, ...] = field(init=False)
    assoc_a: np.ndarray = field(init=False, repr=False)
    assoc_b: np.ndarray = field(init=False, repr=False)
    attribute_counts: tuple[tuple[int, int], tuple[int, int]] = field(init=False)

    def __post_init__(self):
        a, b = self.pair.space_a, self.pair.space_b
        if not (a.standardized and b.standardized):
            log.warning("association query over non-standardized spaces (%s, %s)", a.name, b.name)
        used = tuple(w for w in self.targets.words if w in a and w in b)
        dropped = tuple(w for w in self.targets.words if not (w in a and w in b))
        if not used:
            raise AssociationError(f"no target word of {self.targets.category!r} is in the shared vocabulary")
        lex = self.lexicon
        counts = tuple(
            (sum(w in s for w in lex.positive), sum(w in s for w in lex.negative)) for s in (a, b)
        )
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("used", used)
        set_("dropped", dropped)
        set_("attribute_counts", counts)
        set_("assoc_a", associations(a, used, lex.positive, lex.negative))
        set_("assoc_b", associations(b, used, lex.positive, lex.negative))

    @property
    def n(self) -> int:
        return len(self.used)

    @property
    def differences(self) -> np.ndarray:
        return self.assoc_a - self.assoc_b

    def swapped(self) -> "AssociationQuery":
        return AssociationQuery(self.targets, self.lexicon, self.pair.swapped())


def test_statistic(query: AssociationQuery, assignment: Sequence[str] | None = None) -> float:
    """Statistic for one assignment.

    ``assignment[i]`` is ``"a"`` when target ``i``'s space-a vector sits in
    group a (the observed arrangement) and ``"b"`` when its two vectors are
    swapped. ``None`` means the observed arrangement.
    """
    d = query.differences
    if assignment is None:
        signs = np.ones(query.n)
    else:
        if len(assignment) != query.n:
            raise ValueError(f"assignment covers {len(assignment)} targets, query has {query.n}")
        try:
            signs = np.array([{"a": 1.0, "b": -1.0}[s] for s in assignment])
        except KeyError as exc:
            raise ValueError(f"assignment entries must be 'a' or 'b', got {exc.args[0]!r}") from None
    return float(signs @ d)


test_statistic.__test__ = False  # keep pytest from collecting the name


_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xBF58476D1CE4E5B9)
_M3 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _M1
        z = (z ^ (z >> np.uint64(30))) * _M2
        z = (z ^ (z >> np.uint64(27))) * _M3
    return z ^ (z >> np.uint64(31))


def draw_signs(seed: int, draws: np.ndarray, n: int) -> np.ndarray:
    """+/-1 sign matrix ``(len(draws), n)``; row ``k`` depends only on ``(seed, draws[k])``."""
    key = _splitmix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    n_blocks = (n + 63) // 64
    draws = np.asarray(draws, dtype=np.uint64)
    shifts = np.arange(64, dtype=np.uint64)
    out = np.empty((draws.size, n_blocks * 64), dtype=np.int8)
    with np.errstate(over="ignore"):
        for blk in range(n_blocks):
            counter = draws * np.uint64(n_blocks) + np.uint64(blk)
            h = _splitmix64(key ^ _splitmix64(counter))
            bits = (h[:, None] >> shifts) & np.uint64(1)
            out[:, blk * 64:(blk + 1) * 64] = 1 - 2 * bits.astype(np.int8)
    return out[:, :n]


def _exact_signs(lo: int, hi: int, n: int) -> np.ndarray:
    k = np.arange(lo, hi, dtype=np.int64)
    bits = (k[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.float64)


@dataclass(frozen=True)
class PermutationOutcome:
    p_value: float
    tie_count: int
    n_ge: int
    n_permutations: int
    statistic: float


def permutation_test(query: AssociationQuery, plan: PermutationPlan,
                     *, chunk: int = 1 << 15) -> PermutationOutcome:
    d = query.differences
    n = d.size
    observed = float(np.ones(n) @ d)
    if plan.mode == "exact":
        if n > EXACT_MAX_TARGETS:
            raise AssociationError(
                f"exact enumeration supports at most {EXACT_MAX_TARGETS} targets, got {n}"
            )
        total = 1 << n
        make = lambda lo, hi: _exact_signs(lo, hi, n)  # noqa: E731
    else:
        total = plan.n_draws
        make = lambda lo, hi: draw_signs(plan.seed, np.arange(lo, hi), n).astype(np.float64)  # noqa: E731
    n_ge = ties = 0
    for lo in range(0, total, chunk):
        stats = make(lo, min(total, lo + chunk)) @ d
        n_ge += int(np.count_nonzero(stats >= observed - TIE_TOL))
        ties += int(np.count_nonzero(np.abs(stats - observed) <= TIE_TOL))
    return PermutationOutcome((n_ge + 1) / (total + 1), ties, n_ge, total, observed)


def permutation_p_value(query: AssociationQuery, plan: PermutationPlan) -> tuple[float, int]:
    out = permutation_test(query, plan)
    return out.p_value, out.tie_count


def effect_size(query: AssociationQuery) -> float:
    """Mean association difference over the sample SD of all 2n associations."""
    if query.n < 2:
        raise AssociationError("effect size needs at least two usable targets")
    pooled = np.concatenate([query.assoc_a, query.assoc_b])
    sd = float(np.std(pooled, ddof=1))
    diff = float(query.assoc_a.mean() - query.assoc_b.mean())
    if sd == 0.0:
        if diff == 0.0:
            raise AssociationError("pooled standard deviation is zero")
        raise AssociationError("pooled standard deviation is zero with a nonzero mean difference")
    return diff / sd


@dataclass
class AssociationResult:
    category: str
    lexicon: str
    effect_size: float
    p_value: float
    statistic: float
    n_targets_used: int
    dropped_targets: tuple[str, ...]
    attribute_counts: tuple
    plan: PermutationPlan
    tie_count: int = 0
    n_permutations: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_query(targets: CategoryWordList, lexicon: AttributeLexicon, pair: AlignedPair,
              plan: PermutationPlan) -> AssociationResult:
    query = AssociationQuery(targets, lexicon, pair)
    if plan.mode == "exact" and query.n > EXACT_MAX_TARGETS:
        raise AssociationError(f"exact plan with {query.n} targets")
    es = effect_size(query)
    out = permutation_test(query, plan)
    return AssociationResult(
        targets.category, lexicon.name, es, out.p_value, out.statistic, query.n,
        query.dropped, query.attribute_counts, plan, out.tie_count, out.n_permutations,
    )


def run_audit(categories: Sequence[CategoryWordList], lexicons: Sequence[AttributeLexicon],
              pair: AlignedPair, plan: PermutationPlan) -> list[AssociationResult]:
    """One result per (lexicon, category); failures become rows with ``error`` set."""
    if not categories or not lexicons:
        raise ValueError("run_audit needs at least one category and one lexicon")
    rows = []
    for lex, cat in itertools.product(lexicons, categories):
        try:
            rows.append(run_query(cat, lex, pair, plan))
        except (AssociationError, KeyError, ValueError) as exc:
            log.warning("%s / %s failed: %s", cat.category, lex.name, exc)
            rows.append(AssociationResult(
                cat.category, lex.name, math.nan, math.nan, math.nan, 0,
                tuple(w for w in cat.words if w not in pair.space_a), (), plan, 0, 0, str(exc),
            ))
    return rows


RESULT_COLUMNS = ["category", "lexicon", "effect_size", "p_value", "statistic", "n_targets",
                  "dropped_targets", "mode", "n_draws", "seed", "error"]


def result_row(r: AssociationResult) -> list:
    def num(x):
        return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))
    n_draws = r.n_permutations or (r.plan.n_draws if r.plan.mode == "monte_carlo" else "")
    return [r.category, r.lexicon, num(r.effect_size), num(r.p_value), num(r.statistic),
            r.n_targets_used, ";".join(r.dropped_targets), r.plan.mode, n_draws, r.plan.seed,
            r.error or ""]
