#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mphcnn {

using token_list = std::vector<std::string>;

/// Lowercased word tokens. Non-ASCII bytes are dropped first, whitespace
/// chunks starting with '@' (mentions) are removed, and the remainder is split
/// on every character that is not alphanumeric, '-', '_' or '\''. Those three
/// survive only inside a token, so "#bbcnews" becomes "bbcnews" and
/// "chrome-os" stays whole.
token_list tokenize(std::string_view text);

/// Trigrams of "#" + token + "#", in order. One trigram per character.
token_list char_trigrams(std::string_view token);

/// Trigrams of every word, concatenated in word order (no cross-word grams).
token_list word_trigrams(std::span<std::string const> words);

inline constexpr std::size_t max_url_chars = 120;
inline constexpr std::string_view url_placeholder = "<url>";

/// Lowercased, scheme-stripped, whitespace- and non-ASCII-free URL truncated to
/// 120 characters; the placeholder when absent or empty.
std::string normalize_url(std::optional<std::string_view> url);

/// Trigrams over the whole normalized URL string.
token_list url_to_trigrams(std::optional<std::string_view> url);

/// Offline substitute for redirect resolution: short URL -> resolved URL.
class UrlMap {
  public:
    UrlMap() = default;
    static UrlMap load(std::filesystem::path const& path);

    void add(std::string short_url, std::string resolved);
    /// The resolved form, or `url` itself when unmapped.
    [[nodiscard]] std::string resolve(std::string_view url) const;
    [[nodiscard]] std::size_t size() const noexcept { return m_map.size(); }

  private:
    std::unordered_map<std::string, std::string> m_map;
};

/// Token <-> id map with reserved ids 0 (PAD) and 1 (OOV fallback).
class Vocabulary {
  public:
    static constexpr int pad_id = 0;
    static constexpr int oov_id = 1;

    Vocabulary() = default;
    Vocabulary(std::string kind, std::size_t embedding_dim);

    /// Id of `token`, allocating the next dense id when absent and not frozen.
    int add(std::string const& token);
    /// Id of `token`, or the OOV fallback when absent.
    [[nodiscard]] int lookup(std::string const& token) const;
    [[nodiscard]] bool contains(std::string const& token) const;

    void freeze() noexcept { m_frozen = true; }
    [[nodiscard]] bool frozen() const noexcept { return m_frozen; }

    /// Number of ids including the two reserved ones.
    [[nodiscard]] std::size_t size() const noexcept { return m_tokens.size(); }
    [[nodiscard]] std::string const& token(int id) const { return m_tokens.at(static_cast<std::size_t>(id)); }
    [[nodiscard]] std::string const& kind() const noexcept { return m_kind; }
    [[nodiscard]] std::size_t embedding_dim() const noexcept { return m_dim; }
    void set_embedding_dim(std::size_t dim) noexcept { m_dim = dim; }

    /// FNV-1a over kind and every (token, id) pair in id order.
    [[nodiscard]] std::uint64_t hash() const;

    void save(std::filesystem::path const& path) const;
    /// Loaded vocabularies are frozen.
    static Vocabulary load(std::filesystem::path const& path);

  private:
    std::string m_kind = "word";
    std::size_t m_dim = 0;
    std::vector<std::string> m_tokens{"<pad>", "<oov>"};
    std::unordered_map<std::string, int> m_ids;
    bool m_frozen = false;
};

struct EncodedSequence {
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;

    [[nodiscard]] std::size_t length() const noexcept { return ids.size(); }
    [[nodiscard]] std::size_t real_length() const noexcept;
};

/// Truncates to `max_len`, maps through `vocab` (allocating ids unless frozen)
/// and pads with PAD. The mask is 1 exactly on real tokens.
EncodedSequence encode_and_pad(std::span<std::string const> tokens, Vocabulary& vocab, std::size_t max_len);

/// Same, against a vocabulary that is never modified.
EncodedSequence encode_and_pad(std::span<std::string const> tokens, Vocabulary const& vocab, std::size_t max_len);

}  // namespace mphcnn
