#pragma once

#include <span>
#include <string>
#include <vector>

#include "mphcnn/eval.hpp"
#include "mphcnn/stats.hpp"

namespace mphcnn {

struct QlConfig {
    double mu = 2500.0;
    /// Pseudo-count used in place of cf for terms unseen in the collection.
    double unseen_floor = 1e-10;
};

/// Dirichlet-smoothed query likelihood:
/// sum over query terms of log((tf + mu * p_c) / (|d| + mu)), p_c = cf / total_terms.
double ql_score(std::span<std::string const> query, std::span<std::string const> doc, CollectionStats const& stats,
                QlConfig const& config = {});

/// Per-query min-max normalization to [0, 1]; a constant list maps to 0.5.
RankedRun min_max_normalize(RankedRun const& run);

/// lambda * nn + (1 - lambda) * lm after normalizing both runs per query.
/// Both runs must score exactly the same (query, doc) pairs.
RankedRun interpolate(RankedRun const& nn, RankedRun const& lm, double lambda);

struct LambdaChoice {
    double lambda = 0.0;
    double map = 0.0;
};

/// Grid search lambda in {0, step, ..., 1} for the best MAP on `qrels`;
/// ties go to the smaller lambda.
LambdaChoice tune_lambda(RankedRun const& nn, RankedRun const& lm, Qrels const& qrels, double step = 0.05);

}  // namespace mphcnn
