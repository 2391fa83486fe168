#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mphcnn {

/// Graded judgments on the three-point scale {0, 1, 2}; grade >= 1 is relevant.
class Qrels {
  public:
    void set(std::string const& query, std::string const& doc, int grade);
    [[nodiscard]] int grade(std::string const& query, std::string const& doc) const;
    [[nodiscard]] bool relevant(std::string const& query, std::string const& doc) const {
        return grade(query, doc) >= 1;
    }
    [[nodiscard]] std::size_t num_relevant(std::string const& query) const;
    [[nodiscard]] bool has_query(std::string const& query) const { return m_grades.contains(query); }
    [[nodiscard]] std::vector<std::string> queries() const;
    [[nodiscard]] std::map<std::string, int> const* judgments(std::string const& query) const;

    /// Whitespace-separated `query_id 0 doc_id grade` lines.
    static Qrels load(std::filesystem::path const& path);
    void save(std::filesystem::path const& path) const;

  private:
    std::map<std::string, std::map<std::string, int>> m_grades;
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

/// Descending score, ties by ascending doc id.
void sort_ranking(std::vector<ScoredDoc>& docs);

/// Per-query ranked lists, each sorted by `sort_ranking` with unique doc ids.
struct RankedRun {
    std::map<std::string, std::vector<ScoredDoc>> queries;

    /// Sorts every list and rejects duplicate doc ids.
    void normalize();

    /// `query_id Q0 doc_id rank score tag`.
    static RankedRun load(std::filesystem::path const& path);
    void save(std::filesystem::path const& path, std::string const& tag) const;
};

/// Average precision over the full list; nullopt when the query has no
/// relevant documents. Unjudged documents count as non-relevant.
std::optional<double> average_precision(std::span<ScoredDoc const> ranking, Qrels const& qrels,
                                        std::string const& query);

/// Relevant documents among the first k, divided by k.
double precision_at_k(std::span<ScoredDoc const> ranking, Qrels const& qrels, std::string const& query,
                      std::size_t k = 30);

struct TopicMetrics {
    std::string topic;
    double ap = 0.0;
    double p30 = 0.0;
};

struct EvalResult {
    std::vector<TopicMetrics> topics;
    double map = 0.0;
    double p30 = 0.0;
    /// Topics skipped because their judgments contain no relevant document.
    std::vector<std::string> skipped;
};

/// Evaluates `run` over `topics` (default: the run's own topics). A topic the
/// run does not cover scores 0.
EvalResult evaluate(RankedRun const& run, Qrels const& qrels,
                    std::optional<std::vector<std::string>> const& topics = std::nullopt);

/// Two-sided paired randomization test on per-topic scores. Each iteration
/// flips every topic's pair with probability 1/2; the identity permutation is
/// counted, giving p = (count + 1) / (iterations + 1).
double fisher_randomization(std::span<double const> a, std::span<double const> b, std::size_t iterations = 10000,
                            std::uint64_t seed = 0);

struct TopicDelta {
    std::string topic;
    double a = 0.0;
    double b = 0.0;
    double delta = 0.0;
};

struct PerTopicReport {
    std::vector<TopicDelta> rows;  ///< sorted by delta descending
    std::size_t wins = 0;
    std::size_t losses = 0;
    std::size_t ties = 0;
};

/// Per-topic AP comparison over the union of both runs' judged topics.
PerTopicReport per_topic_report(RankedRun const& a, RankedRun const& b, Qrels const& qrels);

/// Topics with at least one relevant judgment covered by either run.
std::vector<std::string> shared_topics(RankedRun const& a, RankedRun const& b, Qrels const& qrels);

/// Kendall tau-a between two orderings of the same document set.
double kendall_tau(std::span<ScoredDoc const> a, std::span<ScoredDoc const> b);

}  // namespace mphcnn
