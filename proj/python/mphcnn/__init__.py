"""Python bindings for the mphcnn reranker."""

from ._core import (
    AlignmentError,
    ConfigError,
    DataError,
    Error,
    NumericError,
    build_stats,
    char_trigrams,
    evaluate,
    evaluate_runs,
    fisher_randomization,
    gen_synthetic,
    idf,
    interpolate,
    param_count,
    rerank,
    tokenize,
    train,
    url_to_trigrams,
)

__all__ = [
    "AlignmentError",
    "ConfigError",
    "DataError",
    "Error",
    "NumericError",
    "build_stats",
    "char_trigrams",
    "evaluate",
    "evaluate_runs",
    "fisher_randomization",
    "gen_synthetic",
    "idf",
    "interpolate",
    "param_count",
    "rerank",
    "tokenize",
    "train",
    "url_to_trigrams",
]
