#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mphcnn/eval.hpp"
#include "mphcnn/model.hpp"
#include "mphcnn/ql.hpp"
#include "mphcnn/stats.hpp"
#include "mphcnn/text.hpp"
#include "mphcnn/train.hpp"

namespace mphcnn {

struct Document {
    std::string id;
    std::string text;
    std::string url;  ///< empty when the post carries no link
};

/// `doc_id<TAB>text<TAB>url` per line.
class Corpus {
  public:
    static Corpus load(std::filesystem::path const& path);
    void save(std::filesystem::path const& path) const;

    void add(Document doc);
    [[nodiscard]] Document const* find(std::string const& id) const;
    [[nodiscard]] std::vector<Document> const& documents() const noexcept { return m_docs; }
    [[nodiscard]] std::size_t size() const noexcept { return m_docs.size(); }

  private:
    std::vector<Document> m_docs;
    std::unordered_map<std::string, std::size_t> m_index;
};

struct Topic {
    std::string id;
    std::string text;
};

/// `query_id<TAB>query_text` per line.
std::vector<Topic> load_topics(std::filesystem::path const& path);
void save_topics(std::filesystem::path const& path, std::span<Topic const> topics);

/// Stand-in token for posts whose text tokenizes to nothing, so the
/// document-side softmax always has a real column.
inline constexpr std::string_view empty_doc_token = "<empty>";

struct AnalyzedQuery {
    token_list words;
    token_list chars;
};

struct AnalyzedDoc {
    token_list words;
    token_list chars;
    token_list url_chars;
};

AnalyzedQuery analyze_query(std::string_view text);
AnalyzedDoc analyze_document(Document const& doc, UrlMap const& urls);

struct Vocabularies {
    Vocabulary words{"word", 0};
    Vocabulary chars{"trigram", 0};
};

/// Ids in first-seen order over the topics, then the corpus in file order.
Vocabularies build_vocabularies(std::span<Topic const> topics, Corpus const& corpus, UrlMap const& urls,
                                std::size_t embedding_dim);

struct SequenceLengths {
    std::size_t query = 1;
    std::size_t doc = 1;
    std::size_t query_char = 1;
    std::size_t doc_char = 1;
    std::size_t url_char = 1;
};

/// Longest query over `topics` and longest post and URL over `corpus`.
SequenceLengths measure_lengths(std::span<Topic const> topics, Corpus const& corpus, UrlMap const& urls);

void apply_lengths(ModelConfig& config, SequenceLengths const& lengths);

/// Per-layer IDF weights and padded ids for one pair.
Instance encode_instance(AnalyzedQuery const& query, AnalyzedDoc const& doc, Vocabularies const& vocab,
                         CollectionStats const& stats, ModelConfig const& config);

/// One group per topic present in `run`, candidates in run order. Candidates
/// absent from `qrels` (or judged 0) are label 0.
std::vector<QueryGroup> build_groups(std::span<Topic const> topics, RankedRun const& run, Corpus const& corpus,
                                     UrlMap const& urls, Qrels const* qrels, Vocabularies const& vocab,
                                     CollectionStats const& stats, ModelConfig const& config);

/// Query-likelihood run over the same candidates as `run`.
RankedRun ql_run(std::span<Topic const> topics, RankedRun const& run, Corpus const& corpus,
                 CollectionStats const& stats, QlConfig const& ql);

/// Copies word2vec text-format vectors (`token v1 .. vL`, optional `count dim`
/// header) into matching rows. Returns the number of rows overwritten.
std::size_t load_pretrained_embeddings(Tensor& table, Vocabulary const& vocab, std::filesystem::path const& path);

/// Background statistics from a corpus file's post text.
CollectionStats stats_from_corpus(Corpus const& corpus, std::size_t max_word_order = 3, std::size_t max_char_order = 5);

}  // namespace mphcnn
