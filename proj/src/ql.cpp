#include "mphcnn/ql.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mphcnn/error.hpp"

namespace mphcnn {

double ql_score(std::span<std::string const> query, std::span<std::string const> doc, CollectionStats const& stats,
                QlConfig const& config) {
    if (!(config.mu > 0.0)) {
        throw config_error("query likelihood mu must be positive");
    }
    if (stats.total_terms() == 0) {
        throw data_error("query likelihood needs statistics with a nonzero term count");
    }
    std::map<std::string_view, std::size_t> tf;
    for (auto const& t : doc) {
        ++tf[t];
    }
    auto const total = static_cast<double>(stats.total_terms());
    auto const denom = static_cast<double>(doc.size()) + config.mu;
    double score = 0.0;
    for (auto const& t : query) {
        auto const cf = stats.cf(t);
        double const background = (cf > 0 ? static_cast<double>(cf) : config.unseen_floor) / total;
        auto it = tf.find(t);
        double const count = it == tf.end() ? 0.0 : static_cast<double>(it->second);
        score += std::log((count + config.mu * background) / denom);
    }
    return score;
}

RankedRun min_max_normalize(RankedRun const& run) {
    RankedRun out;
    for (auto const& [q, docs] : run.queries) {
        auto& dst = out.queries[q];
        dst = docs;
        if (docs.empty()) {
            continue;
        }
        auto [lo, hi] = std::minmax_element(docs.begin(), docs.end(),
                                            [](auto const& x, auto const& y) { return x.score < y.score; });
        double const low = lo->score;
        double const range = hi->score - low;
        for (auto& d : dst) {
            d.score = range > 0.0 ? (d.score - low) / range : 0.5;
        }
    }
    return out;
}

RankedRun interpolate(RankedRun const& nn, RankedRun const& lm, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) {
        throw config_error("interpolation lambda must lie in [0, 1]");
    }
    if (nn.queries.size() != lm.queries.size()) {
        throw alignment_error("interpolation: runs cover different query sets");
    }
    auto const a = min_max_normalize(nn);
    auto const b = min_max_normalize(lm);
    RankedRun out;
    for (auto const& [q, docs] : a.queries) {
        auto it = b.queries.find(q);
        if (it == b.queries.end() || it->second.size() != docs.size()) {
            throw alignment_error("interpolation: query '" + q + "' is not scored identically by both runs");
        }
        std::map<std::string, double> lm_scores;
        for (auto const& d : it->second) {
            lm_scores.emplace(d.doc_id, d.score);
        }
        auto& dst = out.queries[q];
        for (auto const& d : docs) {
            auto m = lm_scores.find(d.doc_id);
            if (m == lm_scores.end()) {
                throw alignment_error("interpolation: document '" + d.doc_id + "' of query '" + q
                                      + "' has no language-model score");
            }
            dst.push_back({d.doc_id, lambda * d.score + (1.0 - lambda) * m->second});
        }
        sort_ranking(dst);
    }
    return out;
}

LambdaChoice tune_lambda(RankedRun const& nn, RankedRun const& lm, Qrels const& qrels, double step) {
    if (!(step > 0.0) || step > 1.0) {
        throw config_error("lambda grid step must lie in (0, 1]");
    }
    auto const steps = static_cast<std::size_t>(std::llround(1.0 / step));
    LambdaChoice best{0.0, -1.0};
    for (std::size_t i = 0; i <= steps; ++i) {
        double const lambda = static_cast<double>(i) / static_cast<double>(steps);
        double const map = evaluate(interpolate(nn, lm, lambda), qrels).map;
        if (map > best.map) {
            best = {lambda, map};
        }
    }
    return best;
}

}  // namespace mphcnn
