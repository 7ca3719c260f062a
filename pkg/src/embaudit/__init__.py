"""Audit cross-corpus differences in word-embedding associations."""

__version__ = "0.1.0"

from .embedding_io import (AttributeLexicon, CategoryWordList, EmbeddingSpace, HeadlineRecord,
                           HeadlineSet, ParseError, load_labeled_headlines, load_word_list,
                           parse_word2vec_text, write_word2vec_text)
from .embedding_space import (AlignedPair, average_vectors, cosine, intersect_vocab,
                              nearest_neighbors, standardize)
from .association import (AssociationQuery, AssociationResult, PermutationPlan, effect_size,
                          permutation_p_value, run_audit, test_statistic, word_association)
from .mixed_effects import MisclassDataset, MixedFit, build_dataset, compare_models, fit_random_intercept

__all__ = [
    "AlignedPair", "AssociationQuery", "AssociationResult", "AttributeLexicon", "CategoryWordList",
    "EmbeddingSpace", "HeadlineRecord", "HeadlineSet", "MisclassDataset", "MixedFit", "ParseError",
    "PermutationPlan", "average_vectors", "build_dataset", "compare_models", "cosine", "effect_size",
    "fit_random_intercept", "intersect_vocab", "load_labeled_headlines", "load_word_list",
    "nearest_neighbors", "parse_word2vec_text", "permutation_p_value", "run_audit", "standardize",
    "test_statistic", "word_association", "write_word2vec_text",
]
