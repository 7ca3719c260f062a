import json

import numpy as np
import pytest

from embaudit.embedding_io import EmbeddingSpace, builtin_lexicon, builtin_word_lists, write_word2vec_text

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def space(words, rows, name="s", standardized=False):
    return EmbeddingSpace(name, tuple(words), np.asarray(rows, dtype=float), standardized)


@pytest.fixture
def toy_space():
    return space(["甲", "乙", "丙", "丁"], [[1, 0], [1, 1], [0, 1], [-1, 0.2]], "toy")


# -- synthetic corpora ---------------------------------------------------------

FILLER = [f"词{i}" for i in range(120)]
POS_WORDS = ["好", "赞", "喜", "乐", "胜", "兴", "美", "福"]
NEG_WORDS = ["坏", "败", "悲", "苦", "乱", "衰", "灾", "祸"]


def planted_pair_spaces(seed=0, dim=16, shift=0.8, category_words=None):
    """Two related spaces; in ``b`` the ``category_words`` lean toward the
    negative propaganda attributes and in ``a`` they do not."""
    rng = np.random.default_rng(seed)
    lex = builtin_lexicon("propaganda")
    cats = builtin_word_lists()
    targets = [w for c in cats for w in c.words]
    vocab = list(dict.fromkeys(targets + list(lex.positive) + list(lex.negative)
                               + POS_WORDS + NEG_WORDS + FILLER))
    idx = {w: i for i, w in enumerate(vocab)}
    base = rng.normal(size=(len(vocab), dim))
    sent = np.zeros(dim)
    sent[0] = 3.0
    for w in list(lex.positive) + POS_WORDS:
        base[idx[w]] += sent
    for w in list(lex.negative) + NEG_WORDS:
        base[idx[w]] -= sent
    a = base + 0.2 * rng.normal(size=base.shape)
    b = base + 0.2 * rng.normal(size=base.shape)
    planted = category_words if category_words is not None else cats[0].words
    for w in planted:
        b[idx[w]] -= shift * sent
    return vocab, a, b


def write_planted_corpus(root, seed=0, n_train=80, n_test_per_target=6):
    """Embedding files, headline TSVs and a config for CLI runs."""
    root.mkdir(parents=True, exist_ok=True)
    cats = builtin_word_lists()
    freedom = cats[0]
    vocab, a, b = planted_pair_spaces(seed, category_words=freedom.words)
    # 'b' is the biased space and is listed first so positive beta means 'b' is more positive
    write_word2vec_text(space(vocab, b, "biased"), root / "biased.txt")
    write_word2vec_text(space(vocab, a, "neutral"), root / "neutral.txt")
    rng = np.random.default_rng(seed + 1)
    lines = []
    for i in range(n_train):
        label = 1 if i % 2 == 0 else -1
        pool = POS_WORDS if label == 1 else NEG_WORDS
        toks = list(rng.choice(pool, 2)) + list(rng.choice(FILLER, 2))
        lines.append(f"{'pos' if label == 1 else 'neg'}\t{' '.join(toks)}")
    (root / "train.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    lines = []
    for cat in (freedom, cats[5]):
        for t in cat.words[:8]:
            for j in range(n_test_per_target):
                label = 1 if j % 2 == 0 else -1
                pool = POS_WORDS if label == 1 else NEG_WORDS
                toks = [t, t, t] + list(rng.choice(pool, 1)) + list(rng.choice(FILLER, 1))
                lines.append(f"{'pos' if label == 1 else 'neg'}\t{' '.join(toks)}\t{t}\t{cat.category}")
    (root / "test.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    cfg = {
        "embeddings": {"biased": "biased.txt", "neutral": "neutral.txt"},
        "pairs": [["biased", "neutral"]],
        "lexicons": {"propaganda": "builtin:propaganda", "evaluative": "builtin:evaluative_sample"},
        "headlines": {"train": "train.tsv", "test": "test.tsv"},
        "permutation": {"mode": "monte_carlo", "n_draws": 2000, "seed": 11},
        "classifier": {"kinds": ["gaussian_nb", "linear_svm"], "n_classes": 2, "reg": 0.01,
                       "epochs": 5, "seed": 5},
        "out": "out",
    }
    (root / "config.json").write_text(json.dumps(cfg, ensure_ascii=False, indent=1), encoding="utf-8")
    return root / "config.json"


@pytest.fixture
def planted_corpus(tmp_path):
    return write_planted_corpus(tmp_path / "corpus")
