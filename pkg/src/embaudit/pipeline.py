"""Run configuration and the end-to-end audit workflows behind the CLI."""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .association import (P_VALUE_RULE, RESULT_COLUMNS as ASSOC_COLUMNS, SD_DIVISOR,
                          AssociationResult, PermutationPlan, result_row as assoc_row, run_audit)
from .embedding_io import (AttributeLexicon, CategoryWordList, EmbeddingSpace, HeadlineRecord,
                           builtin_lexicon, builtin_word_lists, load_labeled_headlines,
                           load_lexicon, load_word_list, parse_word2vec_text)
from .embedding_space import AlignedPair, intersect_vocab, nearest_neighbors, standardize
from .mixed_effects import (RESULT_COLUMNS as MIXED_COLUMNS, ComparisonRow, build_dataset,
                            compare_models, result_row as mixed_row)
from .sentiment import (KINDS, PreprocessConfig, Segmenter, accuracy, embed_headlines,
                        import_external_predictions, prepare_records, save_model, train)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Bad or incomplete run configuration (CLI exit status 1)."""


class DataError(ValueError):
    """Input data that parses but cannot be used (CLI exit status 2)."""


DEFAULTS: dict[str, Any] = {
    "standardize": True,
    "word_lists": "builtin",
    "lexicons": {"propaganda": "builtin:propaganda"},
    "permutation": {"mode": "monte_carlo", "n_draws": 100_000},
    "classifier": {"kinds": list(KINDS), "n_classes": 2, "reg": 1e-4, "epochs": 50,
                   "standardize": False},
    "preprocess": {"agency_names": [], "strip_punctuation": True, "strip_digits": True,
                   "strip_special": True},
    "external_predictions": {},
    "out": "results",
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "lexicons":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class AuditConfig:
    raw: dict
    root: Path
    embeddings: dict[str, Path]
    pairs: list[tuple[str, str]]
    out: Path
    hash: str = field(init=False)

    def __post_init__(self):
        semantic = {k: v for k, v in self.raw.items() if k != "out"}
        blob = json.dumps(semantic, sort_keys=True, ensure_ascii=False)
        self.hash = hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.root / p

    @property
    def permutation_plan(self) -> PermutationPlan:
        perm = self.section("permutation")
        try:
            return PermutationPlan(perm.get("mode", "monte_carlo"), int(perm.get("n_draws", 100_000)),
                                   int(perm["seed"]))
        except KeyError:
            raise ConfigError("permutation.seed is required (or pass --seed)") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid permutation settings: {exc}") from None

    @property
    def classifier_seed(self) -> int:
        try:
            return int(self.section("classifier")["seed"])
        except KeyError:
            raise ConfigError("classifier.seed is required (or pass --seed)") from None


def load_config(path: str | Path, *, seed: int | None = None, out: str | None = None,
                check_paths: bool = True) -> AuditConfig:
    path = Path(path)
    try:
        user = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    raw = _merge(DEFAULTS, user)
    if seed is not None:
        raw["permutation"]["seed"] = seed
        raw["classifier"]["seed"] = seed
    if out is not None:
        raw["out"] = out
    root = path.resolve().parent

    emb = raw.get("embeddings")
    if not isinstance(emb, dict) or not emb:
        raise ConfigError("config needs an 'embeddings' object mapping names to files")
    embeddings = {name: (Path(p) if Path(p).is_absolute() else root / p) for name, p in emb.items()}
    pairs_raw = raw.get("pairs")
    if pairs_raw is None:
        names = list(embeddings)
        if len(names) < 2:
            raise ConfigError("at least two embeddings are needed to form a pair")
        pairs = [(names[0], names[1])]
    else:
        pairs = [tuple(p) for p in pairs_raw]
    for a, b in pairs:
        for n in (a, b):
            if n not in embeddings:
                raise ConfigError(f"pair refers to unknown embedding {n!r}")
    out_path = Path(raw["out"])
    cfg = AuditConfig(raw, root, embeddings, pairs, out_path if out_path.is_absolute() else root / out_path)
    if check_paths:
        missing = [str(p) for p in referenced_paths(cfg) if not p.exists()]
        if missing:
            raise ConfigError("missing file(s): " + ", ".join(missing))
    return cfg


def referenced_paths(cfg: AuditConfig) -> list[Path]:
    paths = list(cfg.embeddings.values())
    wl = cfg.raw.get("word_lists", "builtin")
    if wl != "builtin":
        paths.append(cfg.path(wl))
    for spec in cfg.raw.get("lexicons", {}).values():
        if isinstance(spec, dict):
            paths += [cfg.path(spec["positive"]), cfg.path(spec["negative"])]
    for key in ("train", "test"):
        if key in cfg.section("headlines"):
            paths.append(cfg.path(cfg.section("headlines")[key]))
    for per_space in cfg.section("external_predictions").values():
        paths += [cfg.path(p) for p in per_space.values()]
    return paths


# -- loading -------------------------------------------------------------------

def load_space(cfg: AuditConfig, name: str) -> EmbeddingSpace:
    log.info("reading embeddings %s from %s", name, cfg.embeddings[name])
    return parse_word2vec_text(cfg.embeddings[name], name)


def load_categories(cfg: AuditConfig) -> list[CategoryWordList]:
    wl = cfg.raw.get("word_lists", "builtin")
    if wl == "builtin":
        return builtin_word_lists()
    d = cfg.path(wl)
    if d.is_file():
        return [load_word_list(d, d.stem)]
    files = sorted(d.glob("*.txt"))
    if not files:
        raise ConfigError(f"no *.txt word lists in {d}")
    return [load_word_list(f, f.stem) for f in files]


def load_lexicons(cfg: AuditConfig) -> list[AttributeLexicon]:
    out = []
    for name, spec in cfg.raw.get("lexicons", {}).items():
        if isinstance(spec, str) and spec.startswith("builtin:"):
            lex = builtin_lexicon(spec.split(":", 1)[1])
            out.append(AttributeLexicon(name, lex.positive, lex.negative, lex.kind))
        elif isinstance(spec, dict):
            out.append(load_lexicon(cfg.path(spec["positive"]), cfg.path(spec["negative"]),
                                    name, spec.get("kind", "user-defined")))
        else:
            raise ConfigError(f"lexicon {name!r} must be 'builtin:<name>' or an object with "
                              "'positive' and 'negative' paths")
    if not out:
        raise ConfigError("no lexicons configured")
    return out


def prepared_pair(cfg: AuditConfig, a: str, b: str, cache: dict | None = None) -> AlignedPair:
    cache = {} if cache is None else cache
    spaces = []
    for name in (a, b):
        if name not in cache:
            space = load_space(cfg, name)
            if cfg.raw.get("standardize", True):
                space = standardize(space)
            cache[name] = space
        spaces.append(cache[name])
    return intersect_vocab(*spaces)


# -- CSV output ----------------------------------------------------------------

def header_comment(cfg: AuditConfig, **extra) -> str:
    seeds = []
    perm = cfg.section("permutation")
    if "seed" in perm:
        seeds.append(f"permutation:{perm['seed']}")
    clf = cfg.section("classifier")
    if "seed" in clf:
        seeds.append(f"classifier:{clf['seed']}")
    parts = [f"embaudit {__version__}", f"config_sha256={cfg.hash}", "seeds=" + ",".join(seeds)]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts)


def write_csv(path: Path, comment: str, columns: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    buf.write(comment + "\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    writer.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# -- workflows -----------------------------------------------------------------

def expand_targets(cfg: AuditConfig, seed_word: str, k: int = 50) -> list[Path]:
    """Neighbor lists of ``seed_word`` in every configured space plus their union."""
    written = []
    union: list[str] = []
    for name in cfg.embeddings:
        space = load_space(cfg, name)
        neighbors = nearest_neighbors(space, seed_word, k)
        path = cfg.out / f"neighbors_{seed_word}_{name}.csv"
        write_csv(path, header_comment(cfg, space=name, seed_word=seed_word, k=k),
                  ["rank", "word", "cosine"],
                  [[i + 1, w, repr(c)] for i, (w, c) in enumerate(neighbors)])
        written.append(path)
        union += [w for w, _ in neighbors if w not in union]
    cand = cfg.out / f"candidates_{seed_word}.txt"
    lines = [f"# nearest neighbors of {seed_word} (k={k}) from: " + ", ".join(cfg.embeddings),
             "# prune by hand; one word per line", seed_word] + [w for w in union if w != seed_word]
    cand.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(cand)
    return written


def audit_assoc(cfg: AuditConfig) -> dict[tuple[str, str], list[AssociationResult]]:
    plan = cfg.permutation_plan
    categories = load_categories(cfg)
    lexicons = load_lexicons(cfg)
    cache: dict = {}
    results = {}
    for a, b in cfg.pairs:
        pair = prepared_pair(cfg, a, b, cache)
        log.info("%s vs %s: %d shared words (%d / %d dropped)", a, b, len(pair.shared_vocab),
                 pair.dropped_a, pair.dropped_b)
        rows = run_audit(categories, lexicons, pair, plan)
        results[(a, b)] = rows
        write_csv(cfg.out / f"assoc_{a}_vs_{b}.csv",
                  header_comment(cfg, space_a=a, space_b=b, p_rule=P_VALUE_RULE.replace(" ", ""),
                                 sd_divisor=SD_DIVISOR,
                                 standardized=str(bool(cfg.raw.get("standardize", True))).lower()),
                  ASSOC_COLUMNS, [assoc_row(r) for r in rows])
    return results


def _filter_classes(records: list[HeadlineRecord], n_classes: int) -> list[HeadlineRecord]:
    if n_classes == 2:
        return [r for r in records if r.label != 0]
    if n_classes == 3:
        return list(records)
    raise ConfigError("classifier.n_classes must be 2 or 3")


@dataclass
class SentimentReport:
    accuracy_rows: list[list]
    comparisons: list[ComparisonRow]
    n_test_common: int


def _mixed_rows(records: list[HeadlineRecord], preds_a: np.ndarray, preds_b: np.ndarray,
                name_a: str, name_b: str) -> list[ComparisonRow]:
    categories: list[str] = []
    for r in records:
        if r.category and r.category not in categories:
            categories.append(r.category)
    datasets = []
    for cat in categories:
        idx = [i for i, r in enumerate(records) if r.category == cat and r.target_word]
        if not idx:
            continue
        datasets.append(build_dataset(preds_a[idx], preds_b[idx],
                                      [records[i].label for i in idx],
                                      [records[i].target_word for i in idx], cat))
    return compare_models(datasets, name_a, name_b)


def audit_sentiment(cfg: AuditConfig) -> dict[tuple[str, str], SentimentReport]:
    hl = cfg.section("headlines")
    if "train" not in hl or "test" not in hl:
        raise ConfigError("headlines.train and headlines.test are required for audit-sentiment")
    clf = cfg.section("classifier")
    n_classes = int(clf.get("n_classes", 2))
    kinds = list(clf.get("kinds", KINDS))
    for kind in kinds:
        if kind not in KINDS:
            raise ConfigError(f"unknown classifier kind {kind!r}")
    seed = cfg.classifier_seed
    reg, epochs = float(clf.get("reg", 1e-4)), int(clf.get("epochs", 50))
    pp = cfg.section("preprocess")
    pre = PreprocessConfig(tuple(pp.get("agency_names", ())), bool(pp.get("strip_punctuation", True)),
                           bool(pp.get("strip_digits", True)), bool(pp.get("strip_special", True)))
    presegmented = bool(hl.get("presegmented", False))
    train_set = load_labeled_headlines(cfg.path(hl["train"]))
    test_set = load_labeled_headlines(cfg.path(hl["test"]))
    classes = (-1, 1) if n_classes == 2 else (-1, 0, 1)

    reports = {}
    for a, b in cfg.pairs:
        spaces = {}
        for name in (a, b):
            s = load_space(cfg, name)
            spaces[name] = standardize(s) if clf.get("standardize", False) else s
        shared = set(spaces[a].vocab).intersection(spaces[b].vocab)
        seg = Segmenter(shared)
        train_recs = prepare_records(_filter_classes(list(train_set), n_classes), seg, pre, presegmented)
        test_recs = prepare_records(_filter_classes(list(test_set), n_classes), seg, pre, presegmented)

        train_feats = {n: embed_headlines(train_recs, spaces[n]) for n in (a, b)}
        test_feats = {n: embed_headlines(test_recs, spaces[n]) for n in (a, b)}
        common = np.intersect1d(test_feats[a].kept, test_feats[b].kept)
        common_recs = [test_recs[i] for i in common]
        human = np.array([r.label for r in common_recs])
        acc_rows: list[list] = []
        comparisons: list[ComparisonRow] = []
        for kind in kinds:
            preds = {}
            for name in (a, b):
                feats = train_feats[name]
                model = train(kind, feats, classes, reg=reg, epochs=epochs, seed=seed)
                save_model(model, cfg.out / "models" / f"{kind}_{name}_{a}_vs_{b}.txt")
                tf = test_feats[name]
                rows = np.searchsorted(tf.kept, common)
                preds[name] = model.predict(tf.X[rows])
                acc_rows.append([kind, name, n_classes, repr(accuracy(preds[name], human)),
                                 len(common), len(feats), len(feats.skipped), len(tf.skipped)])
            comparisons += _mixed_rows(common_recs, preds[a], preds[b], f"{kind}/{a}", f"{kind}/{b}")

        for model_name, per_space in cfg.section("external_predictions").items():
            if a not in per_space or b not in per_space:
                continue
            ext = {n: import_external_predictions(cfg.path(per_space[n])) for n in (a, b)}
            recs = [r for r in test_recs if str(r.line) in ext[a] and str(r.line) in ext[b]]
            if not recs:
                log.warning("external predictions %s match no test headline", model_name)
                continue
            pa = np.array([ext[a][str(r.line)] for r in recs])
            pb = np.array([ext[b][str(r.line)] for r in recs])
            hum = np.array([r.label for r in recs])
            for name, p in ((a, pa), (b, pb)):
                acc_rows.append([model_name, name, n_classes, repr(accuracy(p, hum)), len(recs), "", "", ""])
            comparisons += _mixed_rows(recs, pa, pb, f"{model_name}/{a}", f"{model_name}/{b}")

        extra = dict(space_a=a, space_b=b, n_classes=n_classes, reg=reg, epochs=epochs,
                     features_standardized=str(bool(clf.get("standardize", False))).lower())
        write_csv(cfg.out / f"accuracy_{a}_vs_{b}.csv", header_comment(cfg, **extra),
                  ["model", "space", "n_classes", "accuracy", "n_test", "n_train", "n_train_skipped",
                   "n_test_skipped"], acc_rows)
        write_csv(cfg.out / f"mixed_{a}_vs_{b}.csv",
                  header_comment(cfg, **extra, estimator="REML", p_method="wald-normal"),
                  MIXED_COLUMNS, [mixed_row(r) for r in comparisons])
        reports[(a, b)] = SentimentReport(acc_rows, comparisons, len(common))
    return reports


def validate(cfg: AuditConfig) -> list[str]:
    """Load every configured input; returns informational lines, raises on problems."""
    notes = []
    spaces = {n: load_space(cfg, n) for n in cfg.embeddings}
    dims = {n: s.dim for n, s in spaces.items()}
    if len(set(dims.values())) > 1:
        raise DataError("dimension mismatch between embeddings: "
                        + ", ".join(f"{n}={d}" for n, d in dims.items()))
    for n, s in spaces.items():
        notes.append(f"embedding {n}: {len(s)} words, dim {s.dim}")
    categories = load_categories(cfg)
    lexicons = load_lexicons(cfg)
    for a, b in cfg.pairs:
        pair = intersect_vocab(spaces[a], spaces[b])
        notes.append(f"pair {a} vs {b}: {len(pair.shared_vocab)} shared words")
        for cat in categories:
            missing = [w for w in cat.words if w not in pair.space_a]
            notes.append(f"  {cat.category}: {len(cat.words) - len(missing)}/{len(cat.words)} targets usable")
        for lex in lexicons:
            pos = sum(w in pair.space_a for w in lex.positive)
            neg = sum(w in pair.space_a for w in lex.negative)
            notes.append(f"  lexicon {lex.name}: {pos} positive, {neg} negative usable")
            if not pos or not neg:
                notes.append(f"  warning: lexicon {lex.name} has no usable "
                             f"{'positive' if not pos else 'negative'} words; its rows will be errors")
    hl = cfg.section("headlines")
    for key in ("train", "test"):
        if key in hl:
            hs = load_labeled_headlines(cfg.path(hl[key]))
            notes.append(f"headlines {key}: {len(hs)} records, {hs.duplicates_dropped} duplicates dropped")
    return notes
