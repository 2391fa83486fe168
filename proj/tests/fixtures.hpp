#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mphcnn/model.hpp"

namespace mphcnn::testing {

/// `len` positions with between 1 and `len` leading real tokens drawn from [2, vocab).
inline EncodedSequence random_sequence(std::size_t len, std::size_t vocab, std::mt19937_64& rng) {
    EncodedSequence seq;
    std::uniform_int_distribution<std::size_t> real_dist(1, len);
    std::uniform_int_distribution<int> id_dist(2, static_cast<int>(vocab) - 1);
    auto const real = real_dist(rng);
    for (std::size_t i = 0; i < len; ++i) {
        bool const on = i < real;
        seq.ids.push_back(on ? id_dist(rng) : Vocabulary::pad_id);
        seq.mask.push_back(on ? 1 : 0);
    }
    return seq;
}

inline std::vector<std::vector<double>> random_weights(EncodedSequence const& query, std::size_t depth,
                                                       std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.1, 3.0);
    std::vector<std::vector<double>> w(depth + 1, std::vector<double>(query.length(), 0.0));
    for (auto& layer : w) {
        for (std::size_t i = 0; i < layer.size(); ++i) {
            layer[i] = query.mask[i] ? u(rng) : 0.0;
        }
    }
    return w;
}

/// Instance with random tokens for every perspective the config reads.
inline Instance random_instance(ModelConfig const& config, std::mt19937_64& rng, int label = 0) {
    Instance inst;
    inst.query_id = "q";
    inst.doc_id = "d";
    inst.label = label;
    inst.query_words = random_sequence(config.query_len, config.word_vocab, rng);
    inst.doc_words = random_sequence(config.doc_len, config.word_vocab, rng);
    inst.query_chars = random_sequence(config.query_char_len, config.char_vocab, rng);
    inst.doc_chars = random_sequence(config.doc_char_len, config.char_vocab, rng);
    inst.url_chars = random_sequence(config.url_char_len, config.char_vocab, rng);
    inst.word_weights = random_weights(inst.query_words, config.depth, rng);
    inst.char_weights = random_weights(inst.query_chars, config.depth, rng);
    return inst;
}

/// Small model whose gradients are cheap to check numerically.
inline ModelConfig tiny_config(std::size_t depth = 2) {
    ModelConfig c;
    c.depth = depth;
    c.k_word = 2;
    c.k_char = 3;
    c.filters = 3;
    c.embedding_dim = 3;
    c.mlp_hidden = 4;
    c.dropout = 0.0;
    c.query_len = 3;
    c.doc_len = 4;
    c.query_char_len = 4;
    c.doc_char_len = 5;
    c.url_char_len = 4;
    c.word_vocab = 8;
    c.char_vocab = 9;
    c.seed = 1;
    return c;
}

/// Embedding rows and biases drawn away from zero so ReLU kinks and softmax
/// plateaus are avoided during finite differencing.
inline void spread_params(ModelParams& params, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (auto& [name, tensor] : params.named()) {
        bool const table = name.find("embedding") != std::string::npos;
        auto data = tensor->data();
        std::size_t const cols = tensor->rank() == 2 ? tensor->cols() : data.size();
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (table && i < cols) {
                continue;  // PAD row stays zero
            }
            data[i] = table ? u(rng) + (u(rng) > 0 ? 0.5 : -0.5) : u(rng);
        }
    }
}

/// Worst relative error between tape gradients of the NLL of `inst` and
/// central finite differences, over every parameter entry.
inline double model_gradient_error(ModelParams& params, ModelConfig const& config, Instance const& inst) {
    auto loss = [&](bool backprop) {
        Tape tape;
        auto const out = forward(tape, params, config, inst);
        auto const nll = softmax_nll(tape, out.logits, static_cast<std::size_t>(inst.label));
        if (backprop) {
            tape.backward(nll);
        }
        return tape.value(nll)[0];
    };
    params.zero_grad();
    loss(true);
    double worst = 0.0;
    for (auto& nt : params.named()) {
        std::vector<double> analytic(nt.tensor->grad().begin(), nt.tensor->grad().end());
        auto const numeric = finite_difference_gradient([&] { return loss(false); }, *nt.tensor);
        worst = std::max(worst, max_relative_error(analytic, numeric));
    }
    params.drop_grad();
    return worst;
}

/// Direct loops over the definition: dot products, masked softmax per query
/// row, max and mean over unmasked columns, times the query weight.
inline std::vector<double> similarity_oracle(std::vector<std::vector<double>> const& q,
                                      std::vector<std::vector<double>> const& d,
                                      std::vector<std::uint8_t> const& doc_mask, std::vector<double> const& weights,
                                      std::vector<std::uint8_t> const& query_mask) {
    std::size_t const n = q.size();
    std::size_t const m = d.size();
    std::vector<double> max_part(n);
    std::vector<double> mean_part(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(m, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t c = 0; c < q[i].size(); ++c) {
                s[j] += q[i][c] * d[j][c];
            }
        }
        double z = 0.0;
        double hi = -1e300;
        for (std::size_t j = 0; j < m; ++j) {
            if (doc_mask[j]) hi = std::max(hi, s[j]);
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (doc_mask[j]) z += std::exp(s[j] - hi);
        }
        double best = 0.0;
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (!doc_mask[j]) continue;
            double const p = std::exp(s[j] - hi) / z;
            best = std::max(best, p);
            total += p;
            ++count;
        }
        double const w = query_mask[i] ? weights[i] : 0.0;
        max_part[i] = w * best;
        mean_part[i] = w * total / static_cast<double>(count);
    }
    max_part.insert(max_part.end(), mean_part.begin(), mean_part.end());
    return max_part;
}

/// Exhaustive two-sided paired randomization p-value over all 2^T sign flips.
inline double exhaustive_fisher_p(std::vector<double> const& a, std::vector<double> const& b) {
    auto const t = a.size();
    double observed = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        observed += a[i] - b[i];
    }
    observed = std::abs(observed / static_cast<double>(t));
    std::size_t hits = 0;
    std::size_t const total = std::size_t{1} << t;
    for (std::size_t mask = 0; mask < total; ++mask) {
        double d = 0.0;
        for (std::size_t i = 0; i < t; ++i) {
            d += ((mask >> i) & 1U) ? b[i] - a[i] : a[i] - b[i];
        }
        if (std::abs(d / static_cast<double>(t)) >= observed - 1e-12) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace mphcnn::testing
