#include "comve/tokenizer.hpp"

#include "comve/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <fstream>
#include <map>

namespace comve {

namespace {

std::vector<std::string> reserved_tokens() {
    return {std::string(kPadToken), std::string(kUnkToken), std::string(kClsToken), std::string(kSepToken)};
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Bytes >= 0x80 belong to UTF-8 sequences and stay inside words.
bool is_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u) != 0;
}

std::vector<TokenId> word_ids(const Vocab& vocab, std::string_view text) {
    std::vector<TokenId> ids;
    for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
    return ids;
}

TokenizedSequence pad_to(std::vector<TokenId> ids, std::size_t max_len) {
    TokenizedSequence seq;
    seq.attention_mask.assign(ids.size(), 1);
    seq.ids = std::move(ids);
    seq.ids.resize(max_len, kPadId);
    seq.attention_mask.resize(max_len, 0);
    return seq;
}

} // namespace

Vocab::Vocab() : Vocab(reserved_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    const auto reserved = reserved_tokens();
    if (tokens_.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), tokens_.begin())) {
        throw FormatError("vocabulary must start with [PAD], [UNK], [CLS], [SEP]");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
            throw FormatError(fmt::format("duplicate vocabulary token '{}' at id {}", tokens_[i], i));
        }
    }
}

TokenId Vocab::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const { return index_.contains(std::string(token)); }

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw InputError(fmt::format("token id {} outside vocabulary of size {}", id, tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write vocabulary file " + path.string());
    for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open vocabulary file " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return Vocab(std::move(tokens));
}

std::size_t TokenizedSequence::real_length() const noexcept {
    return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) words.push_back(std::move(current));
        current.clear();
    };
    for (char c : text) {
        if (is_space(c)) {
            flush();
        } else if (is_punct(c)) {
            flush();
            words.emplace_back(1, c);
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    flush();
    return words;
}

Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_size) {
    if (corpus.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
    if (max_size < kReservedTokens) {
        throw InputError(fmt::format("vocabulary size {} leaves no room for the {} reserved tokens", max_size,
                                     kReservedTokens));
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& sentence : corpus)
        for (auto& w : split_words(sentence)) ++counts[std::move(w)];
    for (const auto& r : reserved_tokens()) counts.erase(r);

    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    // map iteration is already lexicographic, so a stable sort by count keeps that as the tie order
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    auto tokens = reserved_tokens();
    for (auto& [word, count] : ranked) {
        if (tokens.size() >= max_size) break;
        tokens.push_back(std::move(word));
    }
    return Vocab(std::move(tokens));
}

TokenizedSequence encode(const Vocab& vocab, std::string_view text, std::size_t max_len) {
    if (max_len < 2) throw InputError(fmt::format("max_len must be at least 2, got {}", max_len));
    std::vector<TokenId> ids{kClsId};
    for (TokenId id : word_ids(vocab, text)) {
        if (ids.size() == max_len) break;
        ids.push_back(id);
    }
    return pad_to(std::move(ids), max_len);
}

TokenizedSequence encode_pair(const Vocab& vocab, std::string_view first, std::string_view second,
                              std::size_t max_len) {
    if (max_len < 3) throw InputError(fmt::format("max_len must be at least 3 for a pair, got {}", max_len));
    auto a = word_ids(vocab, first);
    auto b = word_ids(vocab, second);
    const std::size_t budget = max_len - 2;
    while (a.size() + b.size() > budget) {
        if (a.size() > b.size()) {
            a.pop_back();
        } else {
            b.pop_back();
        }
    }
    std::vector<TokenId> ids{kClsId};
    ids.insert(ids.end(), a.begin(), a.end());
    ids.push_back(kSepId);
    ids.insert(ids.end(), b.begin(), b.end());
    return pad_to(std::move(ids), max_len);
}

TokenizedSequence trim_padding(const TokenizedSequence& seq) {
    std::size_t end = seq.ids.size();
    while (end > 1 && seq.attention_mask[end - 1] == 0) --end;
    TokenizedSequence out;
    out.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(end));
    out.attention_mask.assign(seq.attention_mask.begin(), seq.attention_mask.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

} // namespace comve
