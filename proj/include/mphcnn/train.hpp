#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mphcnn/eval.hpp"
#include "mphcnn/model.hpp"

namespace mphcnn {

/// All candidate instances of one query.
struct QueryGroup {
    std::string query_id;
    std::vector<Instance> instances;
};

struct EpochLog {
    std::size_t epoch = 0;
    /// Summed per-sample NLL over the epoch, measured while training.
    double loss = 0.0;
    double train_map = 0.0;
    double validation_map = 0.0;
};

struct TrainOptions {
    double learning_rate = 0.05;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 30;
    /// Epochs without a validation MAP improvement before stopping.
    std::size_t patience = 3;
    double validation_fraction = 0.15;
    bool track_train_map = true;
    /// Runs once on the freshly initialized parameters (e.g. to load pretrained rows).
    std::function<void(ModelParams&)> on_init;
    /// Called after every epoch.
    std::function<void(EpochLog const&)> on_epoch;
};

struct TrainResult {
    ModelParams params;  ///< best-validation parameters
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    std::vector<std::string> training_queries;
    std::vector<std::string> validation_queries;
};

/// Mini-batch SGD on the mean batch NLL, with a seeded query-level validation
/// split and early stopping on validation MAP. Every random draw (init, split,
/// shuffle, dropout) comes from one generator seeded by `config.seed`.
TrainResult train(std::span<QueryGroup const> groups, Qrels const& qrels, ModelConfig const& config,
                  TrainOptions const& options);

/// Scores candidates by P(relevant); descending, ties by ascending doc id.
std::vector<ScoredDoc> rank(ModelParams const& params, ModelConfig const& config, std::span<Instance const> candidates);

RankedRun rank_groups(ModelParams const& params, ModelConfig const& config, std::span<QueryGroup const> groups);

}  // namespace mphcnn
