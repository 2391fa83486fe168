#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mphcnn/tensor.hpp"
#include "mphcnn/text.hpp"

namespace mphcnn {

/// Component removals studied in the ablation table.
struct AblationFlags {
    bool no_mean_pool = false;
    bool no_max_pool = false;
    bool no_idf = false;
    bool no_word_module = false;
    bool no_url_char = false;
    bool no_doc_char = false;
    bool no_all_char = false;

    /// Flag names in table order.
    static std::vector<std::string> const& names();
    /// Sets the named flag; throws config_error listing valid names otherwise.
    void set(std::string const& name);
    [[nodiscard]] std::vector<std::string> active() const;

    [[nodiscard]] bool url_char_off() const noexcept { return no_url_char || no_all_char; }
    [[nodiscard]] bool doc_char_off() const noexcept { return no_doc_char || no_all_char; }

    friend bool operator==(AblationFlags const&, AblationFlags const&) = default;
};

struct ModelConfig {
    std::size_t depth = 4;
    std::size_t k_word = 2;
    std::size_t k_char = 4;
    std::size_t filters = 64;
    std::size_t embedding_dim = 32;
    std::size_t mlp_hidden = 150;
    double dropout = 0.1;
    AblationFlags ablation;
    /// Mean-pool the raw similarity matrix instead of the softmaxed one.
    bool mean_pool_on_raw = false;

    std::size_t query_len = 0;
    std::size_t doc_len = 0;
    std::size_t query_char_len = 0;
    std::size_t doc_char_len = 0;
    std::size_t url_char_len = 0;

    std::size_t word_vocab = 0;
    std::size_t char_vocab = 0;

    std::uint64_t seed = 0;

    [[nodiscard]] bool word_active() const noexcept { return !ablation.no_word_module; }
    [[nodiscard]] bool doc_char_active() const noexcept { return !ablation.doc_char_off(); }
    [[nodiscard]] bool url_char_active() const noexcept { return !ablation.url_char_off(); }
    [[nodiscard]] bool char_active() const noexcept { return doc_char_active() || url_char_active(); }
    [[nodiscard]] std::size_t pooling_count() const noexcept {
        return (ablation.no_max_pool ? 0 : 1) + (ablation.no_mean_pool ? 0 : 1);
    }
    /// Length of the concatenated match-feature vector.
    [[nodiscard]] std::size_t feature_dim() const noexcept;

    /// Rejects combinations that leave no features or more than one table row.
    void validate() const;

    [[nodiscard]] std::map<std::string, std::string> to_map() const;
    static ModelConfig from_map(std::map<std::string, std::string> const& kv);

    friend bool operator==(ModelConfig const&, ModelConfig const&) = default;
};

struct ConvLayer {
    Tensor filters;  ///< [F x k x C_in]
    Tensor bias;     ///< [F]
};

struct ModelParams {
    Tensor word_embedding;     ///< [V_w x L]
    Tensor trigram_embedding;  ///< [V_c x L]
    std::vector<ConvLayer> word_conv;
    std::vector<ConvLayer> char_conv;
    Tensor hidden_weight;  ///< [feature_dim x mlp_hidden]
    Tensor hidden_bias;
    Tensor output_weight;  ///< [mlp_hidden x 2]
    Tensor output_bias;

    /// Every allocated array, in a fixed order.
    std::vector<NamedTensor> named();
    [[nodiscard]] std::vector<std::pair<std::string, Tensor const*>> named() const;
    void zero_grad();
    void drop_grad();
};

/// Glorot-uniform conv and dense weights, zero biases, embeddings uniform in
/// [0, 0.1] with the PAD row fixed at zero. Only active perspectives allocate.
ModelParams init_params(ModelConfig const& config, std::mt19937_64& rng);

/// One encoded (query, document) pair with its per-layer query weights.
struct Instance {
    std::string query_id;
    std::string doc_id;
    EncodedSequence query_words;
    EncodedSequence doc_words;
    EncodedSequence query_chars;
    EncodedSequence doc_chars;
    EncodedSequence url_chars;
    std::vector<std::vector<double>> word_weights;  ///< [depth + 1][query_len]
    std::vector<std::vector<double>> char_weights;  ///< [depth + 1][query_char_len]
    int label = 0;
};

struct ConvVars {
    Var filters;
    Var bias;
};

/// M^0 = masked embeddings; M^h = mask(relu(conv(M^{h-1}))). Returns N + 1 matrices.
std::vector<Var> hierarchical_representations(Tape& tape, EncodedSequence const& seq, Var embedding,
                                              std::span<ConvVars const> layers);

struct SimilarityOptions {
    bool max_pool = true;
    bool mean_pool = true;
    bool use_weights = true;
    bool mean_on_raw = false;
};

/// S = Mq Md^T, document-side masked softmax, then weights * Max and weights *
/// Mean rows. With use_weights off the weights become the query mask.
Var similarity_features(Tape& tape, Var query_rep, Var doc_rep, std::span<std::uint8_t const> doc_mask,
                        std::span<double const> query_weights, std::span<std::uint8_t const> query_mask,
                        SimilarityOptions const& options);

struct ForwardOutput {
    Var logits;
    Var features;
};

/// Full network. Dropout applies only when `dropout_rng` is given.
ForwardOutput forward(Tape& tape, ModelParams& params, ModelConfig const& config, Instance const& instance,
                      std::mt19937_64* dropout_rng = nullptr);
ForwardOutput forward(Tape& tape, ModelParams const& params, ModelConfig const& config, Instance const& instance);

/// P(relevant) in evaluation mode.
double predict(ModelParams const& params, ModelConfig const& config, Instance const& instance);

/// Pre-MLP feature vector in evaluation mode.
std::vector<double> match_features(ModelParams const& params, ModelConfig const& config, Instance const& instance);

/// Sum of -log o[y] over the batch, evaluation mode.
double batch_loss(ModelParams const& params, ModelConfig const& config, std::span<Instance const> batch);

struct ParamCount {
    std::size_t conv = 0;
    std::size_t mlp = 0;
    std::size_t embedding = 0;

    /// Learnable scalars excluding embeddings.
    [[nodiscard]] std::size_t total() const noexcept { return conv + mlp; }
};

ParamCount param_count(ModelConfig const& config);

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    std::uint64_t word_vocab_hash = 0;
    std::uint64_t char_vocab_hash = 0;
    std::optional<double> tuned_lambda;

    void save(std::filesystem::path const& path) const;
    static Checkpoint load(std::filesystem::path const& path);
};

}  // namespace mphcnn
