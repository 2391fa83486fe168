#include "mphcnn/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "mphcnn/error.hpp"

namespace mphcnn {

namespace {

bool is_ascii(char c) { return static_cast<unsigned char>(c) < 0x80; }

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool is_inner_char(char c) { return c == '-' || c == '_' || c == '\''; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

void emit_trimmed(std::string& piece, token_list& out) {
    auto const first = piece.find_first_not_of("-_'");
    if (first != std::string::npos) {
        auto const last = piece.find_last_not_of("-_'");
        out.push_back(piece.substr(first, last - first + 1));
    }
    piece.clear();
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto const pos = line.find('\t', start);
        fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return fields;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

}  // namespace

token_list tokenize(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        if (is_ascii(c)) {
            clean.push_back(lower(c));
        }
    }

    token_list out;
    std::istringstream chunks(clean);
    std::string chunk;
    std::string piece;
    while (chunks >> chunk) {
        if (chunk.front() == '@') {
            continue;
        }
        for (char c : chunk) {
            if (is_word_char(c) || is_inner_char(c)) {
                piece.push_back(c);
            } else {
                emit_trimmed(piece, out);
            }
        }
        emit_trimmed(piece, out);
    }
    return out;
}

token_list char_trigrams(std::string_view token) {
    token_list out;
    if (token.empty()) {
        return out;
    }
    std::string wrapped;
    wrapped.reserve(token.size() + 2);
    wrapped.push_back('#');
    wrapped.append(token);
    wrapped.push_back('#');
    out.reserve(token.size());
    for (std::size_t i = 0; i + 3 <= wrapped.size(); ++i) {
        out.push_back(wrapped.substr(i, 3));
    }
    return out;
}

token_list word_trigrams(std::span<std::string const> words) {
    token_list out;
    for (auto const& w : words) {
        auto grams = char_trigrams(w);
        out.insert(out.end(), std::make_move_iterator(grams.begin()), std::make_move_iterator(grams.end()));
    }
    return out;
}

std::string normalize_url(std::optional<std::string_view> url) {
    std::string s;
    if (url) {
        for (char c : *url) {
            if (is_ascii(c) && !std::isspace(static_cast<unsigned char>(c))) {
                s.push_back(lower(c));
            }
        }
    }
    for (std::string_view scheme : {"http://", "https://"}) {
        if (s.starts_with(scheme)) {
            s.erase(0, scheme.size());
            break;
        }
    }
    if (s.empty()) {
        return std::string(url_placeholder);
    }
    if (s.size() > max_url_chars) {
        s.resize(max_url_chars);
    }
    return s;
}

token_list url_to_trigrams(std::optional<std::string_view> url) { return char_trigrams(normalize_url(url)); }

// ---------------------------------------------------------------------------

UrlMap UrlMap::load(std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open url map: " + path.string());
    }
    UrlMap map;
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
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": expected short_url<TAB>resolved_url");
        }
        map.add(std::string(fields[0]), std::string(fields[1]));
    }
    return map;
}

void UrlMap::add(std::string short_url, std::string resolved) { m_map[std::move(short_url)] = std::move(resolved); }

std::string UrlMap::resolve(std::string_view url) const {
    auto it = m_map.find(std::string(url));
    return it == m_map.end() ? std::string(url) : it->second;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::string kind, std::size_t embedding_dim) : m_kind(std::move(kind)), m_dim(embedding_dim) {}

int Vocabulary::add(std::string const& token) {
    if (auto it = m_ids.find(token); it != m_ids.end()) {
        return it->second;
    }
    if (m_frozen) {
        return oov_id;
    }
    auto const id = static_cast<int>(m_tokens.size());
    m_tokens.push_back(token);
    m_ids.emplace(token, id);
    return id;
}

int Vocabulary::lookup(std::string const& token) const {
    auto it = m_ids.find(token);
    return it == m_ids.end() ? oov_id : it->second;
}

bool Vocabulary::contains(std::string const& token) const { return m_ids.contains(token); }

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](std::string_view s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    };
    mix(m_kind);
    for (std::size_t id = 2; id < m_tokens.size(); ++id) {
        mix(m_tokens[id]);
        mix(std::to_string(id));
    }
    return h;
}

void Vocabulary::save(std::filesystem::path const& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw data_error("cannot write vocabulary: " + path.string());
    }
    out << "mphcnn-vocab\t1\tkind=" << m_kind << "\tdim=" << m_dim << "\tpad=" << pad_id << "\toov=" << oov_id
        << "\tsize=" << m_tokens.size() << '\n';
    for (std::size_t id = 2; id < m_tokens.size(); ++id) {
        out << m_tokens[id] << '\t' << id << '\n';
    }
}

Vocabulary Vocabulary::load(std::filesystem::path const& path) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open vocabulary: " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw data_error(path.string() + ": empty vocabulary file");
    }
    strip_cr(line);
    auto header = split_tabs(line);
    if (header.size() != 7 || header[0] != "mphcnn-vocab" || header[1] != "1") {
        throw data_error(path.string() + ":1: not a version-1 vocabulary header");
    }
    auto field = [&](std::size_t i, std::string_view key) -> std::string {
        auto f = header[i];
        if (!f.starts_with(key) || f.size() <= key.size() || f[key.size()] != '=') {
            throw data_error(path.string() + ":1: expected header field '" + std::string(key) + "'");
        }
        return std::string(f.substr(key.size() + 1));
    };
    Vocabulary v(field(2, "kind"), std::stoul(field(3, "dim")));
    if (std::stoi(field(4, "pad")) != pad_id || std::stoi(field(5, "oov")) != oov_id) {
        throw data_error(path.string() + ":1: unsupported reserved ids");
    }
    auto const size = std::stoul(field(6, "size"));
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        auto fields = split_tabs(line);
        if (fields.size() != 2) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>id");
        }
        auto const id = std::stoul(std::string(fields[1]));
        if (id != v.m_tokens.size()) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": ids must be dense and ascending");
        }
        v.add(std::string(fields[0]));
    }
    if (v.size() != size) {
        throw data_error(path.string() + ": header size " + std::to_string(size) + " but "
                         + std::to_string(v.size()) + " ids read");
    }
    v.freeze();
    return v;
}

// ---------------------------------------------------------------------------

std::size_t EncodedSequence::real_length() const noexcept {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

EncodedSequence encode_and_pad(std::span<std::string const> tokens, Vocabulary& vocab, std::size_t max_len) {
    EncodedSequence out{std::vector<int>(max_len, Vocabulary::pad_id), std::vector<std::uint8_t>(max_len, 0)};
    std::size_t const n = std::min(tokens.size(), max_len);
    for (std::size_t i = 0; i < n; ++i) {
        out.ids[i] = vocab.add(tokens[i]);
        out.mask[i] = 1;
    }
    return out;
}

EncodedSequence encode_and_pad(std::span<std::string const> tokens, Vocabulary const& vocab, std::size_t max_len) {
    EncodedSequence out{std::vector<int>(max_len, Vocabulary::pad_id), std::vector<std::uint8_t>(max_len, 0)};
    std::size_t const n = std::min(tokens.size(), max_len);
    for (std::size_t i = 0; i < n; ++i) {
        out.ids[i] = vocab.lookup(tokens[i]);
        out.mask[i] = 1;
    }
    return out;
}

}  // namespace mphcnn
