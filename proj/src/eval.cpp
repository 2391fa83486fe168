#include "mphcnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "mphcnn/error.hpp"

namespace mphcnn {

void Qrels::set(std::string const& query, std::string const& doc, int grade) {
    if (grade < 0 || grade > 2) {
        throw data_error("qrels grade " + std::to_string(grade) + " outside {0, 1, 2}");
    }
    m_grades[query][doc] = grade;
}

int Qrels::grade(std::string const& query, std::string const& doc) const {
    auto q = m_grades.find(query);
    if (q == m_grades.end()) {
        return 0;
    }
    auto d = q->second.find(doc);
    return d == q->second.end() ? 0 : d->second;
}

std::size_t Qrels::num_relevant(std::string const& query) const {
    auto q = m_grades.find(query);
    if (q == m_grades.end()) {
        return 0;
    }
    return static_cast<std::size_t>(
        std::count_if(q->second.begin(), q->second.end(), [](auto const& kv) { return kv.second >= 1; }));
}

std::vector<std::string> Qrels::queries() const {
    std::vector<std::string> out;
    for (auto const& [q, _] : m_grades) {
        out.push_back(q);
    }
    return out;
}

std::map<std::string, int> const* Qrels::judgments(std::string const& query) const {
    auto q = m_grades.find(query);
    return q == m_grades.end() ? nullptr : &q->second;
}

Qrels Qrels::load(std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open qrels: " + path.string());
    }
    Qrels qrels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream fields(line);
        std::string query, iter, doc, grade_text, extra;
        if (!(fields >> query)) {
            continue;
        }
        if (!(fields >> iter >> doc >> grade_text) || (fields >> extra)) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": expected 'query_id 0 doc_id grade'");
        }
        int grade = 0;
        try {
            std::size_t used = 0;
            grade = std::stoi(grade_text, &used);
            if (used != grade_text.size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (std::logic_error const&) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": grade is not an integer");
        }
        try {
            qrels.set(query, doc, grade);
        } catch (data_error const& e) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return qrels;
}

void Qrels::save(std::filesystem::path const& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw data_error("cannot write qrels: " + path.string());
    }
    for (auto const& [q, docs] : m_grades) {
        for (auto const& [d, g] : docs) {
            out << q << " 0 " << d << ' ' << g << '\n';
        }
    }
}

// ---------------------------------------------------------------------------

void sort_ranking(std::vector<ScoredDoc>& docs) {
    std::sort(docs.begin(), docs.end(), [](ScoredDoc const& x, ScoredDoc const& y) {
        if (x.score != y.score) {
            return x.score > y.score;
        }
        return x.doc_id < y.doc_id;
    });
}

void RankedRun::normalize() {
    for (auto& [q, docs] : queries) {
        sort_ranking(docs);
        std::set<std::string> seen;
        for (auto const& d : docs) {
            if (!seen.insert(d.doc_id).second) {
                throw data_error("duplicate document '" + d.doc_id + "' in ranking for query '" + q + "'");
            }
        }
    }
}

RankedRun RankedRun::load(std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open run file: " + path.string());
    }
    RankedRun run;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream fields(line);
        std::string query, q0, doc, rank_text, score_text, tag, extra;
        if (!(fields >> query)) {
            continue;
        }
        auto const where = path.string() + ":" + std::to_string(lineno) + ": ";
        if (!(fields >> q0 >> doc >> rank_text >> score_text >> tag) || (fields >> extra)) {
            throw data_error(where + "expected 'query_id Q0 doc_id rank score tag'");
        }
        double score = 0.0;
        try {
            std::size_t used = 0;
            (void)std::stol(rank_text, &used);
            if (used != rank_text.size()) {
                throw std::invalid_argument("rank");
            }
            score = std::stod(score_text, &used);
            if (used != score_text.size()) {
                throw std::invalid_argument("score");
            }
        } catch (std::logic_error const&) {
            throw data_error(where + "rank or score is not numeric");
        }
        if (!std::isfinite(score)) {
            throw data_error(where + "score is not finite");
        }
        run.queries[query].push_back({doc, score});
    }
    run.normalize();
    return run;
}

void RankedRun::save(std::filesystem::path const& path, std::string const& tag) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw data_error("cannot write run file: " + path.string());
    }
    out << std::setprecision(17);
    for (auto const& [q, docs] : queries) {
        std::size_t rank = 1;
        for (auto const& d : docs) {
            out << q << " Q0 " << d.doc_id << ' ' << rank++ << ' ' << d.score << ' ' << tag << '\n';
        }
    }
}

// ---------------------------------------------------------------------------

std::optional<double> average_precision(std::span<ScoredDoc const> ranking, Qrels const& qrels,
                                        std::string const& query) {
    auto const total = qrels.num_relevant(query);
    if (total == 0) {
        return std::nullopt;
    }
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        if (qrels.relevant(query, ranking[r].doc_id)) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(total);
}

double precision_at_k(std::span<ScoredDoc const> ranking, Qrels const& qrels, std::string const& query,
                      std::size_t k) {
    if (k == 0) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) {
        hits += qrels.relevant(query, ranking[r].doc_id) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

EvalResult evaluate(RankedRun const& run, Qrels const& qrels, std::optional<std::vector<std::string>> const& topics) {
    std::vector<std::string> wanted;
    if (topics) {
        wanted = *topics;
    } else {
        for (auto const& [q, _] : run.queries) {
            wanted.push_back(q);
        }
    }
    EvalResult result;
    static std::vector<ScoredDoc> const empty;
    for (auto const& topic : wanted) {
        auto it = run.queries.find(topic);
        auto const& ranking = it == run.queries.end() ? empty : it->second;
        auto ap = average_precision(ranking, qrels, topic);
        if (!ap) {
            result.skipped.push_back(topic);
            continue;
        }
        result.topics.push_back({topic, *ap, precision_at_k(ranking, qrels, topic, 30)});
    }
    if (!result.topics.empty()) {
        for (auto const& t : result.topics) {
            result.map += t.ap;
            result.p30 += t.p30;
        }
        result.map /= static_cast<double>(result.topics.size());
        result.p30 /= static_cast<double>(result.topics.size());
    }
    return result;
}

double fisher_randomization(std::span<double const> a, std::span<double const> b, std::size_t iterations,
                            std::uint64_t seed) {
    if (a.size() != b.size()) {
        throw alignment_error("randomization test: metric vectors have " + std::to_string(a.size()) + " and "
                              + std::to_string(b.size()) + " topics");
    }
    if (a.empty()) {
        throw alignment_error("randomization test: no topics");
    }
    std::size_t const n = a.size();
    std::vector<double> diff(n);
    for (std::size_t t = 0; t < n; ++t) {
        diff[t] = a[t] - b[t];
    }
    auto mean_abs = [&](auto&& sign) {
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            acc += sign(t) ? -diff[t] : diff[t];
        }
        return std::abs(acc / static_cast<double>(n));
    };
    double const observed = mean_abs([](std::size_t) { return false; });
    // Permuted sums can differ from the observed one by rounding alone.
    double const threshold = observed - 1e-12 * std::max(1.0, observed);

    std::mt19937_64 rng(seed);
    std::vector<std::uint64_t> bits((n + 63) / 64);
    std::size_t count = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
        for (auto& w : bits) {
            w = rng();
        }
        double const permuted = mean_abs([&](std::size_t t) { return ((bits[t / 64] >> (t % 64)) & 1U) != 0; });
        if (permuted >= threshold) {
            ++count;
        }
    }
    return static_cast<double>(count + 1) / static_cast<double>(iterations + 1);
}

std::vector<std::string> shared_topics(RankedRun const& a, RankedRun const& b, Qrels const& qrels) {
    std::set<std::string> topics;
    for (auto const* run : {&a, &b}) {
        for (auto const& [q, _] : run->queries) {
            if (qrels.num_relevant(q) > 0) {
                topics.insert(q);
            }
        }
    }
    return {topics.begin(), topics.end()};
}

PerTopicReport per_topic_report(RankedRun const& a, RankedRun const& b, Qrels const& qrels) {
    auto const topics = shared_topics(a, b, qrels);
    auto const ea = evaluate(a, qrels, topics);
    auto const eb = evaluate(b, qrels, topics);
    PerTopicReport report;
    for (std::size_t i = 0; i < ea.topics.size(); ++i) {
        double const d = ea.topics[i].ap - eb.topics[i].ap;
        report.rows.push_back({ea.topics[i].topic, ea.topics[i].ap, eb.topics[i].ap, d});
        if (d > 0) {
            ++report.wins;
        } else if (d < 0) {
            ++report.losses;
        } else {
            ++report.ties;
        }
    }
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](TopicDelta const& x, TopicDelta const& y) { return x.delta > y.delta; });
    return report;
}

double kendall_tau(std::span<ScoredDoc const> a, std::span<ScoredDoc const> b) {
    if (a.size() != b.size()) {
        throw alignment_error("kendall_tau: rankings have different lengths");
    }
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < b.size(); ++i) {
        pos[b[i].doc_id] = i;
    }
    std::vector<std::size_t> order;
    order.reserve(a.size());
    for (auto const& d : a) {
        auto it = pos.find(d.doc_id);
        if (it == pos.end()) {
            throw alignment_error("kendall_tau: document '" + d.doc_id + "' missing from second ranking");
        }
        order.push_back(it->second);
    }
    std::size_t const n = order.size();
    if (n < 2) {
        return 1.0;
    }
    long long concordant = 0;
    long long discordant = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            (order[i] < order[j] ? concordant : discordant) += 1;
        }
    }
    return static_cast<double>(concordant - discordant) / static_cast<double>(n * (n - 1) / 2);
}

}  // namespace mphcnn
