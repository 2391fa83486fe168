#include "mphcnn/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "mphcnn/error.hpp"

namespace mphcnn {

namespace {

std::vector<std::string> split_tabs(std::string const& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        auto const tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

}  // namespace

Corpus Corpus::load(std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open corpus: " + path.string());
    }
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() < 2 || fields.size() > 3 || fields[0].empty()) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": expected 'doc_id<TAB>text<TAB>url'");
        }
        if (corpus.find(fields[0]) != nullptr) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": duplicate doc id '" + fields[0] + "'");
        }
        corpus.add({fields[0], fields[1], fields.size() == 3 ? fields[2] : std::string{}});
    }
    return corpus;
}

void Corpus::save(std::filesystem::path const& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw data_error("cannot write corpus: " + path.string());
    }
    for (auto const& d : m_docs) {
        out << d.id << '\t' << d.text << '\t' << d.url << '\n';
    }
}

void Corpus::add(Document doc) {
    m_index.emplace(doc.id, m_docs.size());
    m_docs.push_back(std::move(doc));
}

Document const* Corpus::find(std::string const& id) const {
    auto it = m_index.find(id);
    return it == m_index.end() ? nullptr : &m_docs[it->second];
}

std::vector<Topic> load_topics(std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open topics: " + path.string());
    }
    std::vector<Topic> topics;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != 2 || fields[0].empty()) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": expected 'query_id<TAB>query_text'");
        }
        topics.push_back({fields[0], fields[1]});
    }
    return topics;
}

void save_topics(std::filesystem::path const& path, std::span<Topic const> topics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw data_error("cannot write topics: " + path.string());
    }
    for (auto const& t : topics) {
        out << t.id << '\t' << t.text << '\n';
    }
}

AnalyzedQuery analyze_query(std::string_view text) {
    AnalyzedQuery q;
    q.words = tokenize(text);
    q.chars = word_trigrams(q.words);
    return q;
}

AnalyzedDoc analyze_document(Document const& doc, UrlMap const& urls) {
    AnalyzedDoc d;
    d.words = tokenize(doc.text);
    if (d.words.empty()) {
        d.words.emplace_back(empty_doc_token);
    }
    d.chars = word_trigrams(d.words);
    if (doc.url.empty()) {
        d.url_chars = url_to_trigrams(std::nullopt);
    } else {
        d.url_chars = url_to_trigrams(urls.resolve(doc.url));
    }
    return d;
}

Vocabularies build_vocabularies(std::span<Topic const> topics, Corpus const& corpus, UrlMap const& urls,
                                std::size_t embedding_dim) {
    Vocabularies v{Vocabulary("word", embedding_dim), Vocabulary("trigram", embedding_dim)};
    for (auto const& t : topics) {
        auto const q = analyze_query(t.text);
        for (auto const& w : q.words) {
            v.words.add(w);
        }
        for (auto const& c : q.chars) {
            v.chars.add(c);
        }
    }
    for (auto const& doc : corpus.documents()) {
        auto const d = analyze_document(doc, urls);
        for (auto const& w : d.words) {
            v.words.add(w);
        }
        for (auto const& c : d.chars) {
            v.chars.add(c);
        }
        for (auto const& c : d.url_chars) {
            v.chars.add(c);
        }
    }
    v.words.freeze();
    v.chars.freeze();
    return v;
}

SequenceLengths measure_lengths(std::span<Topic const> topics, Corpus const& corpus, UrlMap const& urls) {
    SequenceLengths len;
    for (auto const& t : topics) {
        auto const q = analyze_query(t.text);
        len.query = std::max(len.query, q.words.size());
        len.query_char = std::max(len.query_char, q.chars.size());
    }
    for (auto const& doc : corpus.documents()) {
        auto const d = analyze_document(doc, urls);
        len.doc = std::max(len.doc, d.words.size());
        len.doc_char = std::max(len.doc_char, d.chars.size());
        len.url_char = std::max(len.url_char, d.url_chars.size());
    }
    return len;
}

void apply_lengths(ModelConfig& config, SequenceLengths const& lengths) {
    config.query_len = lengths.query;
    config.doc_len = lengths.doc;
    config.query_char_len = lengths.query_char;
    config.doc_char_len = lengths.doc_char;
    config.url_char_len = lengths.url_char;
}

Instance encode_instance(AnalyzedQuery const& query, AnalyzedDoc const& doc, Vocabularies const& vocab,
                         CollectionStats const& stats, ModelConfig const& config) {
    Instance inst;
    inst.query_words = encode_and_pad(query.words, vocab.words, config.query_len);
    inst.doc_words = encode_and_pad(doc.words, vocab.words, config.doc_len);
    inst.query_chars = encode_and_pad(query.chars, vocab.chars, config.query_char_len);
    inst.doc_chars = encode_and_pad(doc.chars, vocab.chars, config.doc_char_len);
    inst.url_chars = encode_and_pad(doc.url_chars, vocab.chars, config.url_char_len);

    auto const qw = std::span<std::string const>(query.words).first(std::min(query.words.size(), config.query_len));
    auto const qc =
        std::span<std::string const>(query.chars).first(std::min(query.chars.size(), config.query_char_len));
    inst.word_weights = layer_query_weights(stats, gram_kind::word, qw, config.query_len, config.depth, config.k_word);
    inst.char_weights =
        layer_query_weights(stats, gram_kind::chars, qc, config.query_char_len, config.depth, config.k_char);
    return inst;
}

std::vector<QueryGroup> build_groups(std::span<Topic const> topics, RankedRun const& run, Corpus const& corpus,
                                     UrlMap const& urls, Qrels const* qrels, Vocabularies const& vocab,
                                     CollectionStats const& stats, ModelConfig const& config) {
    std::map<std::string, AnalyzedDoc> analyzed;
    std::vector<QueryGroup> groups;
    for (auto const& topic : topics) {
        auto it = run.queries.find(topic.id);
        if (it == run.queries.end()) {
            continue;
        }
        auto const query = analyze_query(topic.text);
        QueryGroup group{topic.id, {}};
        for (auto const& cand : it->second) {
            auto a = analyzed.find(cand.doc_id);
            if (a == analyzed.end()) {
                auto const* doc = corpus.find(cand.doc_id);
                if (doc == nullptr) {
                    throw data_error("run references document '" + cand.doc_id + "' missing from the corpus");
                }
                a = analyzed.emplace(cand.doc_id, analyze_document(*doc, urls)).first;
            }
            auto inst = encode_instance(query, a->second, vocab, stats, config);
            inst.query_id = topic.id;
            inst.doc_id = cand.doc_id;
            inst.label = qrels != nullptr && qrels->relevant(topic.id, cand.doc_id) ? 1 : 0;
            group.instances.push_back(std::move(inst));
        }
        groups.push_back(std::move(group));
    }
    return groups;
}

RankedRun ql_run(std::span<Topic const> topics, RankedRun const& run, Corpus const& corpus,
                 CollectionStats const& stats, QlConfig const& ql) {
    RankedRun out;
    for (auto const& topic : topics) {
        auto it = run.queries.find(topic.id);
        if (it == run.queries.end()) {
            continue;
        }
        auto const query = tokenize(topic.text);
        auto& ranking = out.queries[topic.id];
        for (auto const& cand : it->second) {
            auto const* doc = corpus.find(cand.doc_id);
            if (doc == nullptr) {
                throw data_error("run references document '" + cand.doc_id + "' missing from the corpus");
            }
            ranking.push_back({cand.doc_id, ql_score(query, tokenize(doc->text), stats, ql)});
        }
    }
    out.normalize();
    return out;
}

std::size_t load_pretrained_embeddings(Tensor& table, Vocabulary const& vocab, std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open embeddings: " + path.string());
    }
    auto const dim = table.cols();
    std::size_t loaded = 0;
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream fields(line);
        std::string token;
        if (!(fields >> token)) {
            continue;
        }
        values.clear();
        double v = 0.0;
        while (fields >> v) {
            values.push_back(v);
        }
        if (lineno == 1 && values.size() == 1) {
            continue;  // "count dim" header
        }
        if (values.size() != dim) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim)
                             + " values, found " + std::to_string(values.size()));
        }
        if (!vocab.contains(token)) {
            continue;
        }
        auto const row = static_cast<std::size_t>(vocab.lookup(token));
        std::copy(values.begin(), values.end(), table.data().begin() + static_cast<std::ptrdiff_t>(row * dim));
        ++loaded;
    }
    return loaded;
}

CollectionStats stats_from_corpus(Corpus const& corpus, std::size_t max_word_order, std::size_t max_char_order) {
    std::vector<token_list> docs;
    docs.reserve(corpus.size());
    for (auto const& d : corpus.documents()) {
        docs.push_back(tokenize(d.text));
    }
    return build_stats(docs, max_word_order, max_char_order);
}

}  // namespace mphcnn
