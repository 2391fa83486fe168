#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mphcnn/dataset.hpp"
#include "mphcnn/eval.hpp"

namespace mphcnn {

enum class synthetic_mode {
    /// Relevant posts contain a query term; negatives carry near-miss spellings
    /// and other queries' terms.
    term,
    /// Relevant posts contain the query bigram as a phrase; most negatives
    /// contain both words apart.
    bigram,
};

synthetic_mode parse_synthetic_mode(std::string const& name);
std::string to_string(synthetic_mode mode);

struct SyntheticConfig {
    synthetic_mode mode = synthetic_mode::term;
    std::uint64_t seed = 7;
    std::size_t train_queries = 20;
    std::size_t test_queries = 10;
    std::size_t docs_per_query = 50;
    std::size_t relevant_per_query = 6;
    std::size_t doc_words = 8;
    std::size_t filler_vocab = 400;
    double url_fraction = 0.5;
    /// Width of the generated pretrained word vectors; 0 writes none.
    std::size_t embedding_dim = 16;
};

struct SyntheticData {
    Corpus corpus;
    UrlMap urls;
    std::vector<std::pair<std::string, std::string>> url_pairs;
    std::vector<Topic> train_topics;
    std::vector<Topic> test_topics;
    Qrels qrels;
    RankedRun train_run;
    RankedRun test_run;
    /// (word, vector) rows for every generated dictionary word.
    std::vector<std::pair<std::string, std::vector<double>>> embeddings;
};

SyntheticData generate_synthetic(SyntheticConfig const& config);

/// Paths written by save_synthetic.
struct SyntheticFiles {
    std::filesystem::path corpus;
    std::filesystem::path urlmap;
    std::filesystem::path train_topics;
    std::filesystem::path test_topics;
    std::filesystem::path qrels;
    std::filesystem::path train_run;
    std::filesystem::path test_run;
    std::filesystem::path embeddings;  ///< empty when none were generated
};

SyntheticFiles save_synthetic(SyntheticData const& data, std::filesystem::path const& dir);

}  // namespace mphcnn
