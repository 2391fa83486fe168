#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mphcnn/text.hpp"

namespace mphcnn {

/// Which token stream an n-gram is drawn from.
enum class gram_kind { word, chars };

/// Document and collection frequencies over a background corpus.
///
/// Word n-grams up to `max_word_order` and n-grams of consecutive character
/// trigrams up to `max_char_order` carry document frequencies; word unigrams
/// additionally carry collection term counts for query likelihood.
class CollectionStats {
  public:
    CollectionStats() = default;
    CollectionStats(std::size_t max_word_order, std::size_t max_char_order);

    /// Counts one document given its word tokens. Character trigram grams are
    /// derived per word and concatenated in word order.
    void add_document(std::span<std::string const> words);

    [[nodiscard]] std::uint64_t num_docs() const noexcept { return m_num_docs; }
    [[nodiscard]] std::uint64_t total_terms() const noexcept { return m_total_terms; }
    [[nodiscard]] std::size_t max_order(gram_kind kind) const noexcept {
        return kind == gram_kind::word ? m_max_word_order : m_max_char_order;
    }

    [[nodiscard]] std::uint64_t df(gram_kind kind, std::span<std::string const> gram) const;
    [[nodiscard]] std::uint64_t cf(std::string const& word) const;

    /// ln((num_docs + 1) / (df + 1)).
    [[nodiscard]] double idf(gram_kind kind, std::span<std::string const> gram) const;
    [[nodiscard]] double idf(gram_kind kind, std::string const& unigram) const;

    /// Weight of a query phrase: exact n-gram idf when the window is no longer
    /// than the indexed order, else the largest constituent unigram idf.
    [[nodiscard]] double phrase_weight(gram_kind kind, std::span<std::string const> window) const;

    void save(std::filesystem::path const& path) const;
    static CollectionStats load(std::filesystem::path const& path);

    friend bool operator==(CollectionStats const&, CollectionStats const&) = default;

  private:
    using count_map = std::unordered_map<std::string, std::uint64_t>;

    static std::string join(std::span<std::string const> gram);
    void count_grams(count_map& df, std::span<std::string const> tokens, std::size_t max_order);

    std::size_t m_max_word_order = 3;
    std::size_t m_max_char_order = 5;
    std::uint64_t m_num_docs = 0;
    std::uint64_t m_total_terms = 0;
    count_map m_word_df;
    count_map m_char_df;
    count_map m_cf;
};

/// Builds statistics from tokenized documents. Throws when `docs` is empty.
CollectionStats build_stats(std::span<token_list const> docs, std::size_t max_word_order = 3,
                            std::size_t max_char_order = 5);

/// Per-layer query weights for a hierarchical stack of same-length convolutions
/// with filter width `k`. Position i at layer h is the query window covering its
/// receptive field, clipped to the real tokens; padded positions get weight 0.
/// Returns `depth + 1` vectors of length `padded_len`.
std::vector<std::vector<double>> layer_query_weights(CollectionStats const& stats, gram_kind kind,
                                                     std::span<std::string const> query_tokens,
                                                     std::size_t padded_len, std::size_t depth, std::size_t k);

}  // namespace mphcnn
