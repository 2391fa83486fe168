#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mphcnn/dataset.hpp"
#include "mphcnn/eval.hpp"
#include "mphcnn/model.hpp"
#include "mphcnn/ql.hpp"
#include "mphcnn/synthetic.hpp"
#include "mphcnn/train.hpp"

namespace mphcnn {

namespace fs = std::filesystem;

/// Everything a command needs. Loaded from a flat INI file with `[section]`
/// headers; `set("section.key", value)` applies the same keys from the CLI.
struct ExperimentConfig {
    // [data]
    fs::path corpus;
    fs::path urlmap;
    fs::path background;  ///< defaults to `corpus`
    fs::path embeddings;
    fs::path stats;  ///< defaults to <output_dir>/stats.tsv
    std::size_t max_word_order = 3;
    std::size_t max_char_order = 5;

    // [train]
    fs::path train_topics;
    fs::path train_qrels;
    fs::path train_run;

    // [test]
    fs::path test_topics;
    fs::path test_qrels;
    fs::path test_run;

    ModelConfig model;
    TrainOptions train;
    QlConfig ql;

    // [experiment]
    /// "tune", "none", or a number in [0, 1].
    std::string lambda = "tune";
    std::uint64_t seed = 42;
    fs::path output_dir = "out";
    fs::path checkpoint;  ///< defaults to <output_dir>/model.ckpt
    std::size_t fisher_iterations = 10000;
    std::string tag = "mphcnn";

    static ExperimentConfig load(fs::path const& path);
    /// Applies one `section.key` setting; throws config_error for unknown keys.
    /// Relative paths are resolved against `base`.
    void set(std::string const& key, std::string const& value, fs::path const& base = {});
    /// Writes an INI file that load() reads back to the same settings.
    void save(fs::path const& path) const;

    [[nodiscard]] fs::path stats_path() const;
    [[nodiscard]] fs::path checkpoint_path() const;
    [[nodiscard]] fs::path background_path() const { return background.empty() ? corpus : background; }
};

/// Shared inputs for training and scoring, loaded once.
struct Workspace {
    Corpus corpus;
    UrlMap urls;
    CollectionStats stats;
};

Workspace load_workspace(ExperimentConfig const& config);

/// Model config with data-derived lengths filled in wherever the config left 0.
ModelConfig resolve_model_config(ExperimentConfig const& config, std::vector<Topic> const& topics,
                                 Workspace const& ws, Vocabularies const& vocab);

struct FitResult {
    ModelConfig model;
    Vocabularies vocab;
    TrainResult training;
    double train_map = 0.0;
    std::optional<double> tuned_lambda;
};

/// Trains on the [train] files; tunes lambda on the validation queries.
FitResult fit(ExperimentConfig const& config, Workspace const& ws);

struct ScoredRuns {
    RankedRun neural;
    RankedRun ql;
    std::optional<RankedRun> interpolated;
    std::optional<double> lambda;
};

/// Reranks the [test] run with a trained model.
ScoredRuns score_test(ExperimentConfig const& config, Workspace const& ws, ModelConfig const& model,
                      ModelParams const& params, Vocabularies const& vocab, std::optional<double> tuned_lambda);

// Commands. Each writes under config.output_dir and returns the primary artifact.

fs::path cmd_build_stats(ExperimentConfig const& config);

struct TrainSummary {
    fs::path checkpoint;
    fs::path log;
    std::size_t best_epoch = 0;
    double train_map = 0.0;
    double validation_map = 0.0;
    std::optional<double> tuned_lambda;
};

TrainSummary cmd_train(ExperimentConfig const& config);

struct RerankSummary {
    fs::path run;
    fs::path ql_run;
    std::optional<fs::path> interpolated_run;
};

RerankSummary cmd_rerank(ExperimentConfig const& config);

/// Metrics for one run, or a paired comparison with randomization p-values.
std::string evaluation_report(std::vector<RankedRun> const& runs, std::vector<std::string> const& names,
                              Qrels const& qrels, std::size_t fisher_iterations, std::uint64_t seed);

fs::path cmd_evaluate(ExperimentConfig const& config, std::vector<fs::path> const& runs, fs::path const& qrels);

struct AblationRow {
    std::string label;
    std::string flag;  ///< empty for the full model
    double map = 0.0;
    double p30 = 0.0;
};

/// Table row label of an ablation flag, e.g. "- max pooling".
std::string ablation_label(std::string const& flag);

/// Full model plus one row per flag, each trained and scored on the [test] run.
std::vector<AblationRow> run_ablation(ExperimentConfig const& config, Workspace const& ws,
                                      std::vector<std::string> const& flags);
/// One row per depth N = 0..max_depth.
std::vector<AblationRow> run_depth_sweep(ExperimentConfig const& config, Workspace const& ws,
                                         std::size_t max_depth = 4);

std::string format_ablation(std::vector<AblationRow> const& rows);

/// Writes ablation.tsv and, when requested, depth_sweep.tsv.
std::vector<fs::path> cmd_ablate(ExperimentConfig const& config, std::vector<std::string> const& flags,
                                 bool depth_sweep);

/// Writes the dataset plus experiment.ini pointing at it.
fs::path cmd_gen_synthetic(SyntheticConfig const& synthetic, ExperimentConfig const& config);

}  // namespace mphcnn
