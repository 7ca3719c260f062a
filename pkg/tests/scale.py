"""Large synthetic embedding files for the scale check.

Files are written once per parameter set into a cache directory
(``EMBAUDIT_SCALE_DIR``, default: the system temp dir) and reused.
"""
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from embaudit.embedding_io import builtin_lexicon, builtin_word_lists

LEXICONS = ("propaganda", "evaluative_sample")


def _audit_words() -> list[str]:
    words = [w for c in builtin_word_lists() for w in c.words]
    for name in LEXICONS:
        lex = builtin_lexicon(name)
        words += list(lex.positive) + list(lex.negative)
    return list(dict.fromkeys(words))


def _write(path: Path, words: list[str], rng: np.random.Generator, dim: int, chunk: int = 5000) -> None:
    tmp = path.with_suffix(".partial")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(words)} {dim}\n")
        fmt = " ".join(["%.6f"] * dim)
        for start in range(0, len(words), chunk):
            block = rng.normal(scale=0.3, size=(min(chunk, len(words) - start), dim))
            fh.write("".join(f"{w} {fmt % tuple(row)}\n" for w, row in zip(words[start:start + chunk], block)))
    tmp.replace(path)


def scale_corpus(n_shared: int = 350_000, n_extra_b: int = 10_000, dim: int = 300, seed: int = 0) -> Path:
    """Directory holding ``a.txt``, ``b.txt`` and ``config.json``.

    Both spaces contain the built-in target and attribute words; ``a`` has
    exactly the shared vocabulary, ``b`` adds ``n_extra_b`` words of its own
    and lists its rows in a different order.
    """
    base = Path(os.environ.get("EMBAUDIT_SCALE_DIR", tempfile.gettempdir()))
    root = base / f"embaudit-scale-{n_shared}-{n_extra_b}-{dim}-{seed}"
    root.mkdir(parents=True, exist_ok=True)
    audit = _audit_words()
    shared = audit + [f"词{i}" for i in range(n_shared - len(audit))]
    rng = np.random.default_rng(seed)
    if not (root / "a.txt").exists():
        _write(root / "a.txt", shared, rng, dim)
    if not (root / "b.txt").exists():
        b_words = shared + [f"仅{i}" for i in range(n_extra_b)]
        order = np.random.default_rng(seed + 1).permutation(len(b_words))
        _write(root / "b.txt", [b_words[i] for i in order], rng, dim)
    cfg = {
        "embeddings": {"a": "a.txt", "b": "b.txt"},
        "lexicons": {name: f"builtin:{name}" for name in LEXICONS},
        "permutation": {"mode": "monte_carlo", "n_draws": 100_000, "seed": 1},
        "out": "out",
    }
    (root / "config.json").write_text(json.dumps(cfg), encoding="utf-8")
    return root
