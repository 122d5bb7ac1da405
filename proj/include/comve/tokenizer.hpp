#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace comve {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr std::size_t kReservedTokens = 4;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";

// Word-level vocabulary. Ids are dense; 0..3 are always [PAD] [UNK] [CLS] [SEP].
class Vocab {
public:
    // Only the four reserved tokens.
    Vocab();
    // tokens[i] gets id i; the first four must be the reserved tokens.
    explicit Vocab(std::vector<std::string> tokens);

    std::size_t size() const noexcept { return tokens_.size(); }
    // Falls back to [UNK].
    TokenId id(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string& token(TokenId id) const;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    // One token per line, line number = id.
    void save(const std::filesystem::path& path) const;
    static Vocab load(const std::filesystem::path& path);

    bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

struct TokenizedSequence {
    std::vector<TokenId> ids;
    std::vector<std::int32_t> attention_mask;

    std::size_t size() const noexcept { return ids.size(); }
    std::size_t real_length() const noexcept;
};

// Lowercases ASCII letters and splits on whitespace; every ASCII punctuation
// character becomes its own token.
std::vector<std::string> split_words(std::string_view text);

// max_size counts the reserved tokens. Most frequent words win; equal
// frequencies are ordered lexicographically.
Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_size);

// [CLS] tokens... truncated to max_len and padded with [PAD].
TokenizedSequence encode(const Vocab& vocab, std::string_view text, std::size_t max_len);

// [CLS] a [SEP] b, trimming the longer side first until it fits, then padded.
TokenizedSequence encode_pair(const Vocab& vocab, std::string_view first, std::string_view second,
                              std::size_t max_len);

// Drops trailing [PAD] positions.
TokenizedSequence trim_padding(const TokenizedSequence& seq);

} // namespace comve
