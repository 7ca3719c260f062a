"""Headline sentiment classification over averaged pretrained embeddings."""
from __future__ import annotations

import logging
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embedding_io import (EmbeddingSpace, HeadlineRecord, ParseError, _lines,
                           parse_label)

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-9
KINDS = ("gaussian_nb", "linear_svm")


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessConfig:
    agency_names: tuple[str, ...] = ()
    strip_punctuation: bool = True
    strip_digits: bool = True
    strip_special: bool = True


def preprocess(raw: str, config: PreprocessConfig = PreprocessConfig()) -> str:
    """Remove agency names and the configured character classes.

    Punctuation is any Unicode ``P*`` category, digits any ``N*`` category,
    special characters any symbol (``S*``) or control/format (``C*``)
    character. Whitespace survives so pre-segmented text stays segmented.
    """
    text = unicodedata.normalize("NFC", raw)
    for name in sorted(config.agency_names, key=len, reverse=True):
        if name:
            text = text.replace(name, " ")
    drop = set()
    if config.strip_punctuation:
        drop.add("P")
    if config.strip_digits:
        drop.add("N")
    if config.strip_special:
        drop.update("SC")
    out = []
    for ch in text:
        if ch.isspace():
            out.append(" ")
        elif unicodedata.category(ch)[0] in drop:
            out.append(" ")
        else:
            out.append(ch)
    return " ".join("".join(out).split())


class Segmenter:
    """Greedy forward maximal matching against a fixed vocabulary."""

    def __init__(self, vocab: Iterable[str], max_word_len: int | None = None):
        self.vocab = vocab if isinstance(vocab, (set, frozenset)) else set(vocab)
        longest = max((len(w) for w in self.vocab), default=1)
        self.max_len = min(longest, max_word_len) if max_word_len else longest

    def __call__(self, text: str, presegmented: bool = False) -> list[str]:
        return self.segment(text, presegmented)

    def _match(self, text: str) -> list[str]:
        tokens = []
        i, n = 0, len(text)
        while i < n:
            for j in range(min(n, i + self.max_len), i, -1):
                if text[i:j] in self.vocab:
                    break
            else:
                j = i + 1
            tokens.append(text[i:j])
            i = j
        return tokens

    def segment(self, text: str, presegmented: bool = False) -> list[str]:
        """Tokens of ``text``; whitespace always separates tokens.

        With ``presegmented`` the whitespace-delimited pieces are returned
        as they are, otherwise each piece is matched against the vocabulary.
        """
        if presegmented:
            return text.split()
        return [tok for chunk in text.split() for tok in self._match(chunk)]


def segment(text: str, vocab: Iterable[str], presegmented: bool = False) -> list[str]:
    return Segmenter(vocab).segment(text, presegmented)


def prepare_records(records: Sequence[HeadlineRecord], segmenter: Segmenter,
                    config: PreprocessConfig = PreprocessConfig(),
                    presegmented: bool = False) -> list[HeadlineRecord]:
    """Fill in ``tokens`` for every record (in place) and return the list."""
    for rec in records:
        rec.tokens = segmenter(preprocess(rec.raw_text, config), presegmented)
    return list(records)


@dataclass
class FeatureMatrix:
    X: np.ndarray
    labels: np.ndarray
    oov_counts: np.ndarray
    kept: np.ndarray
    skipped: np.ndarray
    space: str = ""
    standardized: bool = False

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, mask: np.ndarray) -> "FeatureMatrix":
        mask = np.asarray(mask, dtype=bool)
        return FeatureMatrix(self.X[mask], self.labels[mask], self.oov_counts[mask],
                             self.kept[mask], self.skipped, self.space, self.standardized)


def embed_headlines(records: Sequence[HeadlineRecord], space: EmbeddingSpace) -> FeatureMatrix:
    """Average the in-vocabulary token vectors of each headline.

    Headlines with no in-vocabulary token are listed in ``skipped``.
    """
    rows, labels, oov, kept, skipped = [], [], [], [], []
    m = space.matrix
    for i, rec in enumerate(records):
        idx = [space._index[t] for t in rec.tokens if t in space]
        if not idx:
            skipped.append(i)
            continue
        rows.append(m[idx].mean(axis=0))
        labels.append(rec.label)
        oov.append(len(rec.tokens) - len(idx))
        kept.append(i)
    if not rows:
        raise TrainingError(f"no headline has an in-vocabulary token in {space.name!r}")
    return FeatureMatrix(np.vstack(rows), np.array(labels, dtype=np.int64),
                         np.array(oov, dtype=np.int64), np.array(kept, dtype=np.int64),
                         np.array(skipped, dtype=np.int64), space.name, space.standardized)


@dataclass
class ClassifierModel:
    kind: str
    classes: tuple[int, ...]
    params: dict[str, np.ndarray]
    train_meta: dict = field(default_factory=dict)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.kind == "gaussian_nb":
            return _nb_joint_log_likelihood(self, X)
        scores = X @ self.params["weights"].T + self.params["bias"]
        if len(self.classes) == 2:
            return np.column_stack([np.zeros(len(X)), scores[:, 0]])
        return scores

    def predict(self, X: np.ndarray) -> np.ndarray:
        scores = self.decision_function(X)
        return np.asarray(self.classes)[np.argmax(scores, axis=1)]

    def predict_log_proba(self, X: np.ndarray) -> np.ndarray:
        if self.kind != "gaussian_nb":
            raise TypeError("posterior probabilities are only defined for gaussian_nb")
        jll = self.decision_function(X)
        top = jll.max(axis=1, keepdims=True)
        return jll - (top + np.log(np.exp(jll - top).sum(axis=1, keepdims=True)))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.exp(self.predict_log_proba(X))


def _as_arrays(features) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(features, FeatureMatrix):
        return features.X, features.labels
    X, y = features
    return np.asarray(X, dtype=np.float64), np.asarray(y)


def _check_classes(y: np.ndarray, classes: Sequence[int] | None) -> tuple[int, ...]:
    present = sorted(set(int(v) for v in y))
    classes = tuple(sorted(int(c) for c in classes)) if classes is not None else tuple(present)
    if len(classes) < 2:
        raise TrainingError("training needs at least two classes")
    missing = set(classes) - set(present)
    if missing:
        raise TrainingError(f"classes {sorted(missing)} have no training rows")
    extra = set(present) - set(classes)
    if extra:
        raise TrainingError(f"training labels {sorted(extra)} are outside classes {classes}")
    return classes


def train_gaussian_nb(features, classes: Sequence[int] | None = None) -> ClassifierModel:
    X, y = _as_arrays(features)
    classes = _check_classes(y, classes)
    priors, means, variances = [], [], []
    for c in classes:
        rows = X[y == c]
        if len(rows) < 2:
            raise TrainingError(f"class {c} has {len(rows)} training row(s), need at least 2")
        priors.append(len(rows) / len(X))
        means.append(rows.mean(axis=0))
        variances.append(np.maximum(rows.var(axis=0), VAR_FLOOR))
    params = {"priors": np.array(priors), "means": np.vstack(means), "variances": np.vstack(variances)}
    return ClassifierModel("gaussian_nb", classes, params, {"var_floor": VAR_FLOOR})


def _nb_joint_log_likelihood(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    p = model.params
    var = p["variances"]
    const = np.log(p["priors"]) - 0.5 * np.log(2.0 * np.pi * var).sum(axis=1)
    sq = ((X[:, None, :] - p["means"][None, :, :]) ** 2 / var[None, :, :]).sum(axis=2)
    return const[None, :] - 0.5 * sq


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, reg: float) -> float:
    """``reg/2 * (|w|^2 + b^2) + mean hinge``; labels ``y`` in {-1, +1}."""
    margins = y * (X @ w + b)
    return 0.5 * reg * (float(w @ w) + b * b) + float(np.maximum(0.0, 1.0 - margins).mean())


def train_linear_svm(features, classes: Sequence[int] | None = None, reg: float = 1e-4,
                     epochs: int = 50, seed: int = 0, *, record_objective: bool = False) -> ClassifierModel:
    """One-vs-rest hinge-loss classifiers fitted by Pegasos.

    The bias is an extra constant feature and is regularized with the
    weights. Every epoch visits the rows in a seeded random order, the step
    at update ``t`` is ``1/(reg*t)`` and iterates are projected onto the
    ball of radius ``1/sqrt(reg)``. At the end of every epoch the running
    average of all iterates is scored on the full training objective and
    kept if it beats the best average seen so far; that best average is the
    returned model, so the per-epoch objective never increases.
    """
    if reg <= 0 or epochs < 1:
        raise ValueError("reg must be positive and epochs at least 1")
    X, y = _as_arrays(features)
    if not np.isfinite(X).all():
        raise TrainingError("features must be finite")
    if len(set(int(v) for v in y)) < 2:
        raise TrainingError("linear SVM needs at least two classes in the training data")
    classes = _check_classes(y, classes)
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    positives = classes[1:] if len(classes) == 2 else classes
    Y = np.vstack([np.where(y == c, 1.0, -1.0) for c in positives])  # (K, n)
    K = Y.shape[0]
    W = np.zeros((K, d + 1))
    avg = np.zeros_like(W)
    radius = 1.0 / math.sqrt(reg)
    rng = np.random.default_rng(seed)
    best = np.zeros_like(W)
    best_obj = np.full(K, np.inf)
    history = []
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (reg * t)
            x = Xb[i]
            active = Y[:, i] * (W @ x) < 1.0
            W *= 1.0 - eta * reg
            if active.any():
                W[active] += (eta * Y[active, i])[:, None] * x[None, :]
            norms = np.linalg.norm(W, axis=1)
            over = norms > radius
            if over.any():
                W[over] *= (radius / norms[over])[:, None]
            avg += (W - avg) / t
        objective = np.array([svm_objective(avg[k, :d], avg[k, d], X, Y[k], reg) for k in range(K)])
        better = objective < best_obj
        best[better] = avg[better]
        best_obj = np.where(better, objective, best_obj)
        if record_objective:
            history.append(best_obj.copy())
    params = {"weights": best[:, :d].copy(), "bias": best[:, d].copy()}
    meta = {"seed": seed, "epochs": epochs, "reg": reg}
    if record_objective:
        meta["objective_history"] = np.array(history)
    return ClassifierModel("linear_svm", classes, params, meta)


def train(kind: str, features, classes=None, *, reg: float = 1e-4, epochs: int = 50,
          seed: int = 0) -> ClassifierModel:
    if kind == "gaussian_nb":
        return train_gaussian_nb(features, classes)
    if kind == "linear_svm":
        return train_linear_svm(features, classes, reg, epochs, seed)
    raise ValueError(f"unknown classifier kind {kind!r}; expected one of {KINDS}")


def predict(model: ClassifierModel, features) -> np.ndarray:
    X = features.X if isinstance(features, FeatureMatrix) else features
    return model.predict(X)


def accuracy(predicted: Sequence[int], actual: Sequence[int]) -> float:
    predicted, actual = np.asarray(predicted), np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ValueError("predicted and actual labels differ in length")
    if predicted.size == 0:
        raise ValueError("accuracy of an empty prediction list")
    return float(np.mean(predicted == actual))


# -- model persistence -------------------------------------------------------
#
#   kind = gaussian_nb
#   classes = -1 1
#   dim = 300
#   meta.<key> = <value>
#   <param>[<class>] = v1 v2 ...
#
# Parameter rows are stored one per class (or one per binary classifier for
# linear_svm, keyed by its positive class). Floats use repr() so a
# save/load round trip is exact.

def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


def save_model(model: ClassifierModel, path: str | Path) -> None:
    dim = (model.params["means"] if model.kind == "gaussian_nb" else model.params["weights"]).shape[1]
    lines = [f"kind = {model.kind}",
             "classes = " + " ".join(str(c) for c in model.classes),
             f"dim = {dim}"]
    for key, val in model.train_meta.items():
        if isinstance(val, np.ndarray):
            continue
        lines.append(f"meta.{key} = {val!r}")
    if model.kind == "gaussian_nb":
        for k, c in enumerate(model.classes):
            lines.append(f"prior[{c}] = {_fmt(model.params['priors'][k])}")
            lines.append(f"mean[{c}] = {_fmt(model.params['means'][k])}")
            lines.append(f"variance[{c}] = {_fmt(model.params['variances'][k])}")
    else:
        keys = model.classes[1:] if len(model.classes) == 2 else model.classes
        for k, c in enumerate(keys):
            lines.append(f"weight[{c}] = {_fmt(model.params['weights'][k])}")
            lines.append(f"bias[{c}] = {_fmt(model.params['bias'][k])}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ClassifierModel:
    entries: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, val = line.partition(" = ")
        if not sep:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        entries[key.strip()] = val.strip()
    kind = entries.get("kind")
    if kind not in KINDS:
        raise ParseError(f"unknown model kind {kind!r}")
    classes = tuple(int(c) for c in entries["classes"].split())
    meta = {}
    for key, val in entries.items():
        if key.startswith("meta."):
            try:
                meta[key[5:]] = int(val)
            except ValueError:
                try:
                    meta[key[5:]] = float(val)
                except ValueError:
                    meta[key[5:]] = val.strip("'\"")

    def row(name, c):
        return np.array([float(v) for v in entries[f"{name}[{c}]"].split()])

    if kind == "gaussian_nb":
        params = {"priors": np.array([row("prior", c)[0] for c in classes]),
                  "means": np.vstack([row("mean", c) for c in classes]),
                  "variances": np.vstack([row("variance", c) for c in classes])}
    else:
        keys = classes[1:] if len(classes) == 2 else classes
        params = {"weights": np.vstack([row("weight", c) for c in keys]),
                  "bias": np.array([row("bias", c)[0] for c in keys])}
    return ClassifierModel(kind, classes, params, meta)


def import_external_predictions(source) -> dict[str, int]:
    """Read ``headline_id<TAB>label`` rows produced by an external classifier.

    A first row whose id column reads ``headline_id`` is treated as a header.
    """
    out: dict[str, int] = {}
    for lineno, line in enumerate(_lines(source), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        cols = line.split("\t")
        if lineno == 1 and cols[0].strip().lower() == "headline_id":
            continue
        if len(cols) < 2:
            raise ParseError("expected headline_id and label columns", lineno)
        hid = cols[0].strip()
        if hid in out:
            raise ParseError(f"duplicate headline id {hid!r}", lineno)
        out[hid] = parse_label(cols[1], lineno)
    return out
