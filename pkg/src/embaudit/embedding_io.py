"""Readers and writers for embedding files, word lists and labeled headlines."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """Raised when an input file violates its format; carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class EmbeddingSpace:
    """Named vocabulary plus a dense ``|vocab| x dim`` float64 matrix."""

    name: str
    vocab: tuple[str, ...]
    matrix: np.ndarray
    standardized: bool = False
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64).view()
        if matrix.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if matrix.shape[0] != len(self.vocab):
            raise ValueError(
                f"vocab has {len(self.vocab)} words but matrix has {matrix.shape[0]} rows"
            )
        if matrix.shape[1] < 1:
            raise ValueError("embedding dimension must be positive")
        index = {w: i for i, w in enumerate(self.vocab)}
        if len(index) != len(self.vocab):
            raise ValueError("vocabulary entries must be unique")
        if any(not w for w in self.vocab):
            raise ValueError("vocabulary entries must be non-empty")
        if not np.isfinite(matrix).all():
            raise ValueError("embedding matrix contains non-finite values")
        matrix.flags.writeable = False
        object.__setattr__(self, "vocab", tuple(self.vocab))
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_index", index)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def index(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise KeyError(f"{word!r} is not in the vocabulary of {self.name!r}") from None

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[self.index(word)]

    def rows(self, words: Iterable[str]) -> np.ndarray:
        return self.matrix[[self.index(w) for w in words]]


@dataclass(frozen=True)
class CategoryWordList:
    category: str
    words: tuple[str, ...]

    def __post_init__(self):
        if not self.words:
            raise ValueError(f"empty word list for category {self.category!r}")
        if len(set(self.words)) != len(self.words):
            raise ValueError(f"duplicate words in category {self.category!r}")


@dataclass(frozen=True)
class AttributeLexicon:
    """Positive (A) and negative (B) attribute words."""

    name: str
    positive: tuple[str, ...]
    negative: tuple[str, ...]
    kind: str = "user-defined"

    def __post_init__(self):
        if not self.positive or not self.negative:
            raise ValueError(f"lexicon {self.name!r} needs non-empty positive and negative sets")
        overlap = set(self.positive) & set(self.negative)
        if overlap:
            raise ValueError(
                f"lexicon {self.name!r} lists words as both positive and negative: "
                + ", ".join(sorted(overlap))
            )


LABEL_TOKENS = {
    "pos": 1, "+1": 1, "1": 1,
    "neu": 0, "0": 0,
    "neg": -1, "-1": -1, "−1": -1,
}


@dataclass
class HeadlineRecord:
    raw_text: str
    label: int
    tokens: list[str] = field(default_factory=list)
    target_word: str | None = None
    category: str | None = None
    line: int | None = None

    def __post_init__(self):
        if self.label not in (-1, 0, 1):
            raise ValueError(f"label must be -1, 0 or +1, got {self.label!r}")


@dataclass
class HeadlineSet:
    records: list[HeadlineRecord]
    duplicates_dropped: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


_PARSE_BATCH = 2048


def _lines(source: str | Path | TextIO | Iterable[str]) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def parse_word2vec_text(source, name: str) -> EmbeddingSpace:
    """Parse the word2vec text format: a ``<vocab_size> <dim>`` header, then
    one ``word v1 ... v_dim`` line per word.

    Duplicate words keep their first vector. A header count that disagrees
    with the number of rows only triggers a warning.
    """
    it = iter(_lines(source))
    header = next(it, None)
    if header is None or not header.strip():
        raise ParseError("empty embedding file", 1 if header is not None else None)
    parts = header.split()
    try:
        if len(parts) != 2:
            raise ValueError
        declared, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"malformed header {header.strip()!r}, expected '<vocab_size> <dim>'", 1) from None
    if declared < 0 or dim < 1:
        raise ParseError(f"malformed header {header.strip()!r}", 1)

    words: list[str] = []
    seen: set[str] = set()
    # trust the header for the initial allocation (np.empty is lazy), grow if it undercounts
    capacity = max(1024, min(declared, 1 << 24))
    matrix = np.empty((capacity, dim), dtype=np.float64)
    n_dups = 0

    def store(batch_words: list[str], rows: np.ndarray, linenos: list[int]) -> None:
        nonlocal matrix, n_dups
        keep = []
        for i, (word, lineno) in enumerate(zip(batch_words, linenos)):
            if word in seen:
                n_dups += 1
                log.warning("%s: duplicate word %r on line %d ignored", name, word, lineno)
                continue
            seen.add(word)
            words.append(word)
            keep.append(i)
        n_new = len(keep)
        start = len(words) - n_new
        while len(words) > matrix.shape[0]:
            matrix = np.resize(matrix, (2 * matrix.shape[0], dim))
        matrix[start:start + n_new] = rows[keep] if n_new != len(batch_words) else rows

    def parse_slow(batch: list[tuple[int, str]]) -> None:
        # per-line parsing; pinpoints the offending line of a malformed batch
        batch_words, rows, linenos = [], [], []
        for lineno, line in batch:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ParseError(f"expected a word and {dim} values, found {len(parts)} tokens", lineno)
            try:
                row = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                raise ParseError("non-numeric vector value", lineno) from None
            if not np.isfinite(row).all():
                raise ParseError("non-finite vector value", lineno)
            batch_words.append(parts[0])
            rows.append(row)
            linenos.append(lineno)
        if rows:
            store(batch_words, np.vstack(rows), linenos)

    def parse_batch(batch: list[tuple[int, str]]) -> None:
        # fast path: numpy's C reader converts the whole batch at once; any
        # irregular line sends the batch through the per-line path instead
        batch_words, values, linenos = [], [], []
        for lineno, line in batch:
            word, _, rest = line.rstrip("\r\n").partition(" ")
            if not word:
                return parse_slow(batch)
            batch_words.append(word)
            values.append(rest.strip(" "))
            linenos.append(lineno)
        try:
            rows = np.loadtxt(values, dtype=np.float64, delimiter=" ", ndmin=2, comments=None)
        except ValueError:
            return parse_slow(batch)
        if rows.shape != (len(values), dim) or not np.isfinite(rows).all():
            return parse_slow(batch)
        store(batch_words, rows, linenos)

    batch: list[tuple[int, str]] = []
    for lineno, line in enumerate(it, start=2):
        batch.append((lineno, line))
        if len(batch) == _PARSE_BATCH:
            parse_batch(batch)
            batch = []
    if batch:
        parse_batch(batch)
    if not words:
        raise ParseError("embedding file has no vectors")
    if len(words) + n_dups != declared:
        log.warning(
            "%s: header declares %d words but %d rows were read", name, declared, len(words) + n_dups
        )
    matrix = matrix[: len(words)]
    if matrix.base is not None and 2 * len(words) < matrix.base.shape[0]:
        matrix = matrix.copy()
    return EmbeddingSpace(name=name, vocab=tuple(words), matrix=matrix)


def write_word2vec_text(space: EmbeddingSpace, dest: str | Path | TextIO) -> None:
    """Write ``space`` in word2vec text format using shortest round-trip float reprs."""

    def _write(fh):
        fh.write(f"{len(space)} {space.dim}\n")
        for word, row in zip(space.vocab, space.matrix):
            fh.write(word + " " + " ".join(repr(float(v)) for v in row) + "\n")

    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(dest)


def _word_lines(source) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()
    for line in _lines(source):
        word = line.strip()
        if not word or word.startswith("#"):
            continue
        if word not in seen:
            seen.add(word)
            out.append(word)
    return out


def load_word_list(source, category: str) -> CategoryWordList:
    words = _word_lines(source)
    if not words:
        raise ParseError(f"empty word list for category {category!r}")
    return CategoryWordList(category, tuple(words))


def load_lexicon(positive, negative, name: str, kind: str = "user-defined") -> AttributeLexicon:
    pos, neg = _word_lines(positive), _word_lines(negative)
    if not pos or not neg:
        raise ParseError(f"empty attribute list in lexicon {name!r}")
    return AttributeLexicon(name, tuple(pos), tuple(neg), kind)


def parse_label(token: str, line: int | None = None) -> int:
    try:
        return LABEL_TOKENS[token.strip().lower()]
    except KeyError:
        raise ParseError(f"unknown label {token!r}", line) from None


def load_labeled_headlines(source) -> HeadlineSet:
    """Read a tab-separated headline file.

    Columns: label, text, optional target word, optional category. Rows whose
    text repeats an earlier row are dropped and counted.
    """
    records: list[HeadlineRecord] = []
    seen: set[str] = set()
    dups = 0
    for lineno, line in enumerate(_lines(source), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        cols = line.split("\t")
        label = parse_label(cols[0], lineno)
        if len(cols) < 2 or not cols[1].strip():
            raise ParseError("missing text column", lineno)
        text = cols[1].strip()
        target = cols[2].strip() if len(cols) > 2 and cols[2].strip() else None
        category = cols[3].strip() if len(cols) > 3 and cols[3].strip() else None
        if text in seen:
            dups += 1
            continue
        seen.add(text)
        records.append(HeadlineRecord(text, label, [], target, category, lineno))
    if dups:
        log.info("dropped %d duplicated headlines", dups)
    return HeadlineSet(records, dups)


def builtin_word_lists() -> list[CategoryWordList]:
    """The ten target categories shipped with the package, in a fixed order."""
    order = [
        "freedom", "democracy", "election", "collective_action", "negative_figures",
        "social_control", "surveillance", "ccp", "historical_events", "positive_figures",
    ]
    base = resources.files("embaudit") / "data" / "targets"
    return [load_word_list(base.joinpath(f"{stem}.txt").read_text("utf-8").splitlines(), stem)
            for stem in order]


def builtin_lexicon(name: str = "propaganda") -> AttributeLexicon:
    """``propaganda`` (full list) or ``evaluative_sample`` (the published sample only)."""
    base = resources.files("embaudit") / "data" / "lexicons"
    pos = base.joinpath(f"{name}_positive.txt").read_text("utf-8").splitlines()
    neg = base.joinpath(f"{name}_negative.txt").read_text("utf-8").splitlines()
    kind = "propaganda" if name == "propaganda" else "evaluative"
    return load_lexicon(pos, neg, name, kind)
