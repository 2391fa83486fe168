#include "mphcnn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

#include "mphcnn/error.hpp"

namespace mphcnn {

CollectionStats::CollectionStats(std::size_t max_word_order, std::size_t max_char_order)
    : m_max_word_order(max_word_order), m_max_char_order(max_char_order) {
    if (max_word_order == 0 || max_char_order == 0) {
        throw config_error("n-gram orders must be at least 1");
    }
}

std::string CollectionStats::join(std::span<std::string const> gram) {
    std::string key;
    for (std::size_t i = 0; i < gram.size(); ++i) {
        if (i) {
            key.push_back(' ');
        }
        key.append(gram[i]);
    }
    return key;
}

void CollectionStats::count_grams(count_map& df, std::span<std::string const> tokens, std::size_t max_order) {
    std::unordered_set<std::string> seen;
    for (std::size_t order = 1; order <= max_order; ++order) {
        for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
            seen.insert(join(tokens.subspan(i, order)));
        }
    }
    for (auto const& g : seen) {
        ++df[g];
    }
}

void CollectionStats::add_document(std::span<std::string const> words) {
    ++m_num_docs;
    m_total_terms += words.size();
    for (auto const& w : words) {
        ++m_cf[w];
    }
    count_grams(m_word_df, words, m_max_word_order);
    auto const trigrams = word_trigrams(words);
    count_grams(m_char_df, trigrams, m_max_char_order);
}

std::uint64_t CollectionStats::df(gram_kind kind, std::span<std::string const> gram) const {
    auto const& map = kind == gram_kind::word ? m_word_df : m_char_df;
    auto it = map.find(join(gram));
    return it == map.end() ? 0 : it->second;
}

std::uint64_t CollectionStats::cf(std::string const& word) const {
    auto it = m_cf.find(word);
    return it == m_cf.end() ? 0 : it->second;
}

double CollectionStats::idf(gram_kind kind, std::span<std::string const> gram) const {
    return std::log((static_cast<double>(m_num_docs) + 1.0) / (static_cast<double>(df(kind, gram)) + 1.0));
}

double CollectionStats::idf(gram_kind kind, std::string const& unigram) const {
    return idf(kind, std::span<std::string const>(&unigram, 1));
}

double CollectionStats::phrase_weight(gram_kind kind, std::span<std::string const> window) const {
    if (window.empty()) {
        return 0.0;
    }
    if (window.size() <= max_order(kind)) {
        return idf(kind, window);
    }
    double best = 0.0;
    for (auto const& t : window) {
        best = std::max(best, idf(kind, t));
    }
    return best;
}

void CollectionStats::save(std::filesystem::path const& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw data_error("cannot write stats file: " + path.string());
    }
    out << "mphcnn-stats\t1\tnum_docs=" << m_num_docs << "\ttotal_terms=" << m_total_terms
        << "\tn_max_w=" << m_max_word_order << "\tn_max_c=" << m_max_char_order << '\n';
    std::map<std::string, std::uint64_t> words(m_word_df.begin(), m_word_df.end());
    for (auto const& [gram, count] : words) {
        out << "w:" << gram << '\t' << count;
        if (gram.find(' ') == std::string::npos) {
            out << '\t' << cf(gram);
        }
        out << '\n';
    }
    std::map<std::string, std::uint64_t> chars(m_char_df.begin(), m_char_df.end());
    for (auto const& [gram, count] : chars) {
        out << "c:" << gram << '\t' << count << '\n';
    }
}

CollectionStats CollectionStats::load(std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open stats file: " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw data_error(path.string() + ": empty stats file");
    }
    auto header_field = [&](std::string_view key) -> std::uint64_t {
        std::string const tag = "\t" + std::string(key) + "=";
        auto pos = line.find(tag);
        if (pos == std::string::npos) {
            throw data_error(path.string() + ":1: missing header field '" + std::string(key) + "'");
        }
        return std::stoull(line.substr(pos + tag.size()));
    };
    if (!line.starts_with("mphcnn-stats\t1\t")) {
        throw data_error(path.string() + ":1: not a version-1 stats header");
    }
    CollectionStats s(header_field("n_max_w"), header_field("n_max_c"));
    s.m_num_docs = header_field("num_docs");
    auto const declared_terms = header_field("total_terms");

    std::size_t lineno = 1;
    std::uint64_t summed_terms = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        auto const bad = [&] { return data_error(path.string() + ":" + std::to_string(lineno) + ": malformed stats line"); };
        auto const t1 = line.find('\t');
        if (t1 == std::string::npos || line.size() < 3 || line[1] != ':') {
            throw bad();
        }
        auto const t2 = line.find('\t', t1 + 1);
        std::string const gram = line.substr(2, t1 - 2);
        try {
            auto const df = std::stoull(line.substr(t1 + 1, t2 == std::string::npos ? std::string::npos : t2 - t1 - 1));
            if (df > s.m_num_docs) {
                throw data_error(path.string() + ":" + std::to_string(lineno) + ": df exceeds num_docs");
            }
            if (line[0] == 'w') {
                s.m_word_df[gram] = df;
                if (t2 != std::string::npos) {
                    auto const cf = std::stoull(line.substr(t2 + 1));
                    s.m_cf[gram] = cf;
                    summed_terms += cf;
                }
            } else if (line[0] == 'c') {
                s.m_char_df[gram] = df;
            } else {
                throw bad();
            }
        } catch (std::logic_error const&) {
            throw bad();
        }
    }
    if (summed_terms != declared_terms) {
        throw data_error(path.string() + ": total_terms does not equal the sum of collection frequencies");
    }
    s.m_total_terms = declared_terms;
    return s;
}

CollectionStats build_stats(std::span<token_list const> docs, std::size_t max_word_order, std::size_t max_char_order) {
    if (docs.empty()) {
        throw data_error("cannot build statistics from an empty corpus");
    }
    CollectionStats stats(max_word_order, max_char_order);
    for (auto const& d : docs) {
        stats.add_document(d);
    }
    return stats;
}

std::vector<std::vector<double>> layer_query_weights(CollectionStats const& stats, gram_kind kind,
                                                     std::span<std::string const> query_tokens,
                                                     std::size_t padded_len, std::size_t depth, std::size_t k) {
    std::size_t const real = std::min(query_tokens.size(), padded_len);
    std::size_t const left = (k - 1) / 2;
    std::size_t const right = k / 2;
    std::vector<std::vector<double>> out(depth + 1, std::vector<double>(padded_len, 0.0));
    for (std::size_t h = 0; h <= depth; ++h) {
        for (std::size_t i = 0; i < real; ++i) {
            std::size_t const lo = i >= h * left ? i - h * left : 0;
            std::size_t const hi = std::min(real - 1, i + h * right);
            out[h][i] = stats.phrase_weight(kind, query_tokens.subspan(lo, hi - lo + 1));
        }
    }
    return out;
}

}  // namespace mphcnn
