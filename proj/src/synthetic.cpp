#include "mphcnn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "mphcnn/error.hpp"

namespace mphcnn {

synthetic_mode parse_synthetic_mode(std::string const& name) {
    if (name == "term") {
        return synthetic_mode::term;
    }
    if (name == "bigram") {
        return synthetic_mode::bigram;
    }
    throw config_error("unknown synthetic mode '" + name + "' (expected term or bigram)");
}

std::string to_string(synthetic_mode mode) { return mode == synthetic_mode::term ? "term" : "bigram"; }

namespace {

class Generator {
  public:
    explicit Generator(SyntheticConfig const& config) : m_config(config), m_rng(config.seed) {}

    SyntheticData run();

  private:
    std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(m_rng); }
    bool coin(double p) { return std::bernoulli_distribution(p)(m_rng); }
    char letter() { return static_cast<char>('a' + pick(26)); }
    char letter_except(char c) {
        char r = letter();
        while (r == c) {
            r = letter();
        }
        return r;
    }

    std::string fresh_word(std::size_t min_len, std::size_t max_len);
    std::string const& filler() { return m_fillers[pick(m_fillers.size())]; }
    std::vector<std::string> filler_words(std::size_t n);

    /// Inserts `words` at random positions of `base`, keeping their order.
    void scatter(std::vector<std::string>& base, std::vector<std::string> const& words);
    /// Inserts `a` then `b` with at least one word between them.
    void scatter_apart(std::vector<std::string>& base, std::string const& a, std::string const& b);

    std::string next_doc_id();
    void add_document(SyntheticData& data, std::vector<std::string> const& words,
                      std::vector<std::string> const& url_words);

    std::vector<std::string> term_document(std::vector<std::vector<std::string>> const& terms, std::size_t q,
                                           bool relevant, std::vector<std::string>& url_words);
    std::vector<std::string> bigram_document(std::vector<std::string> const& terms, bool relevant,
                                             std::vector<std::string>& url_words);

    SyntheticConfig m_config;
    std::mt19937_64 m_rng;
    std::set<std::string> m_used;
    std::vector<std::string> m_fillers;
    std::vector<std::string> m_sites;
    std::size_t m_next_doc = 1;
};

std::string Generator::fresh_word(std::size_t min_len, std::size_t max_len) {
    while (true) {
        auto const len = min_len + pick(max_len - min_len + 1);
        std::string w;
        for (std::size_t i = 0; i < len; ++i) {
            w.push_back(letter());
        }
        if (m_used.insert(w).second) {
            return w;
        }
    }
}

std::vector<std::string> Generator::filler_words(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(filler());
    }
    return out;
}

void Generator::scatter(std::vector<std::string>& base, std::vector<std::string> const& words) {
    std::size_t lo = 0;
    for (auto const& w : words) {
        auto const pos = lo + pick(base.size() - lo + 1);
        base.insert(base.begin() + static_cast<std::ptrdiff_t>(pos), w);
        lo = pos + 1;
    }
}

void Generator::scatter_apart(std::vector<std::string>& base, std::string const& a, std::string const& b) {
    if (base.empty()) {
        base.push_back(filler());
    }
    auto const pa = pick(base.size());
    base.insert(base.begin() + static_cast<std::ptrdiff_t>(pa), a);
    // Positions after a, leaving at least one word in between.
    auto const first = pa + 2;
    auto const pb = first + pick(base.size() - first + 1);
    base.insert(base.begin() + static_cast<std::ptrdiff_t>(pb), b);
}

std::string Generator::next_doc_id() {
    std::ostringstream id;
    id << 'd' << std::setw(6) << std::setfill('0') << m_next_doc++;
    return id.str();
}

void Generator::add_document(SyntheticData& data, std::vector<std::string> const& words,
                             std::vector<std::string> const& url_words) {
    Document doc;
    doc.id = next_doc_id();
    for (std::size_t i = 0; i < words.size(); ++i) {
        doc.text += (i == 0 ? "" : " ") + words[i];
    }
    if (coin(m_config.url_fraction)) {
        doc.url = "http://t.co/" + doc.id.substr(1);
        std::string resolved = "http://www." + m_sites[pick(m_sites.size())] + ".com/";
        for (std::size_t i = 0; i < url_words.size(); ++i) {
            resolved += (i == 0 ? "" : "-") + url_words[i];
        }
        resolved += ".html";
        data.urls.add(doc.url, resolved);
        data.url_pairs.emplace_back(doc.url, resolved);
    }
    data.corpus.add(std::move(doc));
}

std::vector<std::string> Generator::term_document(std::vector<std::vector<std::string>> const& terms, std::size_t q,
                                                  bool relevant, std::vector<std::string>& url_words) {
    auto words = filler_words(m_config.doc_words);
    url_words = filler_words(2);
    auto const& own = terms[q];
    if (relevant) {
        auto const choice = pick(3);
        std::vector<std::string> planted;
        if (choice != 1) {
            planted.push_back(own[0]);
        }
        if (choice != 0) {
            planted.push_back(own[1]);
        }
        scatter(words, planted);
        scatter(url_words, {planted.front()});
        return words;
    }
    if (coin(0.6)) {
        // Near misses: together the two spellings cover every trigram of the term.
        auto const& t = own[pick(own.size())];
        auto const near_a = t.substr(0, t.size() - 1) + letter_except(t.back());
        auto const near_b = letter_except(t.front()) + t.substr(1);
        scatter(words, {near_a, near_b});
        scatter(url_words, {near_a});
    }
    if (coin(0.4) && terms.size() > 1) {
        auto other = pick(terms.size() - 1);
        other += other >= q ? 1 : 0;
        auto const& t = terms[other][pick(terms[other].size())];
        scatter(words, {t});
        scatter(url_words, {t});
    }
    return words;
}

std::vector<std::string> Generator::bigram_document(std::vector<std::string> const& terms, bool relevant,
                                                    std::vector<std::string>& url_words) {
    auto words = filler_words(m_config.doc_words);
    url_words = filler_words(2);
    auto const& a = terms[0];
    auto const& b = terms[1];
    if (relevant) {
        auto const pos = pick(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), {a, b});
        return words;
    }
    auto const kind = pick(10);
    if (kind < 5) {
        scatter_apart(words, a, b);
    } else if (kind < 7) {
        scatter_apart(words, b, a);
    } else if (kind < 8) {
        auto const pos = pick(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), {b, a});
    } else {
        scatter(words, {kind == 8 ? a : b});
    }
    return words;
}

SyntheticData Generator::run() {
    auto const& c = m_config;
    if (c.docs_per_query == 0 || c.relevant_per_query == 0 || c.relevant_per_query > c.docs_per_query) {
        throw config_error("synthetic data needs 0 < relevant_per_query <= docs_per_query");
    }
    if (c.train_queries + c.test_queries == 0 || c.filler_vocab == 0 || c.doc_words == 0) {
        throw config_error("synthetic data needs queries, filler words and post length");
    }
    SyntheticData data;
    for (std::size_t i = 0; i < c.filler_vocab; ++i) {
        m_fillers.push_back(fresh_word(3, 7));
    }
    for (std::size_t i = 0; i < 5; ++i) {
        m_sites.push_back(fresh_word(4, 6));
    }
    std::size_t const num_queries = c.train_queries + c.test_queries;
    std::vector<std::vector<std::string>> terms(num_queries);
    for (auto& t : terms) {
        t = {fresh_word(5, 8), fresh_word(5, 8)};
    }

    for (std::size_t q = 0; q < num_queries; ++q) {
        std::ostringstream qid;
        qid << 'q' << std::setw(3) << std::setfill('0') << q + 1;
        Topic topic{qid.str(), terms[q][0] + " " + terms[q][1]};
        (q < c.train_queries ? data.train_topics : data.test_topics).push_back(topic);

        // Relevance must not correlate with doc id order, which breaks score ties.
        std::vector<bool> labels(c.docs_per_query, false);
        std::fill_n(labels.begin(), c.relevant_per_query, true);
        std::shuffle(labels.begin(), labels.end(), m_rng);
        std::vector<std::string> ids;
        for (std::size_t j = 0; j < c.docs_per_query; ++j) {
            bool const relevant = labels[j];
            std::vector<std::string> url_words;
            auto const words = c.mode == synthetic_mode::term ? term_document(terms, q, relevant, url_words)
                                                              : bigram_document(terms[q], relevant, url_words);
            add_document(data, words, url_words);
            auto const& id = data.corpus.documents().back().id;
            data.qrels.set(topic.id, id, relevant ? 1 : 0);
            ids.push_back(id);
        }
        std::shuffle(ids.begin(), ids.end(), m_rng);
        auto& ranking = (q < c.train_queries ? data.train_run : data.test_run).queries[topic.id];
        for (std::size_t r = 0; r < ids.size(); ++r) {
            ranking.push_back({ids[r], static_cast<double>(ids.size() - r)});
        }
    }

    if (c.embedding_dim > 0) {
        std::normal_distribution<double> gauss(0.0, 1.5 / std::sqrt(static_cast<double>(c.embedding_dim)));
        for (auto const& w : m_used) {
            std::vector<double> v(c.embedding_dim);
            for (auto& x : v) {
                x = gauss(m_rng);
            }
            data.embeddings.emplace_back(w, std::move(v));
        }
    }
    return data;
}

}  // namespace

SyntheticData generate_synthetic(SyntheticConfig const& config) { return Generator(config).run(); }

SyntheticFiles save_synthetic(SyntheticData const& data, std::filesystem::path const& dir) {
    std::filesystem::create_directories(dir);
    SyntheticFiles files{dir / "corpus.tsv",     dir / "urlmap.tsv", dir / "train_topics.tsv", dir / "test_topics.tsv",
                         dir / "qrels.txt",      dir / "train.run",  dir / "test.run",         {}};
    data.corpus.save(files.corpus);
    {
        std::ofstream out(files.urlmap, std::ios::binary);
        if (!out) {
            throw data_error("cannot write url map: " + files.urlmap.string());
        }
        for (auto const& [s, r] : data.url_pairs) {
            out << s << '\t' << r << '\n';
        }
    }
    save_topics(files.train_topics, data.train_topics);
    save_topics(files.test_topics, data.test_topics);
    data.qrels.save(files.qrels);
    data.train_run.save(files.train_run, "synthetic");
    data.test_run.save(files.test_run, "synthetic");
    if (!data.embeddings.empty()) {
        files.embeddings = dir / "embeddings.txt";
        std::ofstream out(files.embeddings, std::ios::binary);
        if (!out) {
            throw data_error("cannot write embeddings: " + files.embeddings.string());
        }
        out << data.embeddings.size() << ' ' << data.embeddings.front().second.size() << '\n';
        out << std::setprecision(9);
        for (auto const& [w, v] : data.embeddings) {
            out << w;
            for (double x : v) {
                out << ' ' << x;
            }
            out << '\n';
        }
    }
    return files;
}

}  // namespace mphcnn
