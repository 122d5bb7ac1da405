#include "comve/errors.hpp"
#include "comve/tokenizer.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <random>

using namespace comve;

namespace {

TokenId id_of(const Vocab& v, const char* word) { return v.id(word); }

} // namespace

TEST_CASE("reserved tokens sit at ids 0..3") {
    const Vocab v;
    CHECK(v.size() == 4);
    CHECK(v.token(kPadId) == kPadToken);
    CHECK(v.token(kUnkId) == kUnkToken);
    CHECK(v.token(kClsId) == kClsToken);
    CHECK(v.token(kSepId) == kSepToken);
    CHECK(v.id("anything") == kUnkId);
}

TEST_CASE("split_words lowercases and separates punctuation") {
    CHECK(split_words("He drinks MILK.") == std::vector<std::string>{"he", "drinks", "milk", "."});
    CHECK(split_words("  a,b  ") == std::vector<std::string>{"a", ",", "b"});
    CHECK(split_words("").empty());
}

TEST_CASE("build_vocab keeps every word when there is room") {
    const std::vector<std::string> corpus{"a b", "a c"};
    const auto v = build_vocab(corpus, 10);
    CHECK(v.size() == 7);
    for (const char* w : {"a", "b", "c"}) CHECK(v.contains(w));
    CHECK(v.token(0) == kPadToken);
    CHECK(v.token(3) == kSepToken);
}

TEST_CASE("build_vocab truncation keeps the most frequent words, ties lexicographic") {
    const std::vector<std::string> corpus{"z z z y y x w", "x w"};
    const auto v = build_vocab(corpus, 5);
    CHECK(v.size() == 5);
    CHECK(v.contains("z"));
    CHECK_FALSE(v.contains("y"));

    const auto v7 = build_vocab(corpus, 7);
    // counts: z 3, w 2, x 2, y 2 -> w and x win the tie for the last two slots
    CHECK(v7.tokens() == std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "z", "w", "x"});
}

TEST_CASE("build_vocab is deterministic and dense") {
    const std::vector<std::string> corpus{"The cat sat on the mat.", "A dog ate the bone!", "cat and dog"};
    const auto a = build_vocab(corpus, 100);
    const auto b = build_vocab(corpus, 100);
    CHECK(a == b);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.id(a.token(static_cast<TokenId>(i))) == static_cast<TokenId>(i));
}

TEST_CASE("build_vocab rejects a size without room for reserved tokens") {
    const std::vector<std::string> corpus{"a"};
    CHECK_THROWS_AS(build_vocab(corpus, 3), InputError);
}

TEST_CASE("encode pads and masks") {
    const std::vector<std::string> corpus{"a b"};
    const auto v = build_vocab(corpus, 10);
    const auto seq = encode(v, "a b", 5);
    CHECK(seq.ids == std::vector<TokenId>{kClsId, id_of(v, "a"), id_of(v, "b"), kPadId, kPadId});
    CHECK(seq.attention_mask == std::vector<std::int32_t>{1, 1, 1, 0, 0});
    CHECK(seq.real_length() == 3);
}

TEST_CASE("encode maps unknown words to [UNK]") {
    const std::vector<std::string> corpus{"a b"};
    const auto v = build_vocab(corpus, 10);
    const auto seq = encode(v, "a q b", 6);
    CHECK(seq.ids[2] == kUnkId);
    CHECK(seq.attention_mask[2] == 1);
}

TEST_CASE("encode truncates long text") {
    const std::vector<std::string> corpus{"a b c d e f g"};
    const auto v = build_vocab(corpus, 20);
    const auto seq = encode(v, "a b c d e f g", 4);
    CHECK(seq.size() == 4);
    CHECK(seq.ids.front() == kClsId);
    CHECK(seq.attention_mask == std::vector<std::int32_t>{1, 1, 1, 1});
}

TEST_CASE("encode_pair layout") {
    const std::vector<std::string> corpus{"a b"};
    const auto v = build_vocab(corpus, 10);
    const auto seq = encode_pair(v, "a", "b", 6);
    CHECK(seq.ids == std::vector<TokenId>{kClsId, id_of(v, "a"), kSepId, id_of(v, "b"), kPadId, kPadId});
    CHECK(seq.attention_mask == std::vector<std::int32_t>{1, 1, 1, 1, 0, 0});

    const auto empty_first = encode_pair(v, "", "b", 5);
    CHECK(empty_first.ids == std::vector<TokenId>{kClsId, kSepId, id_of(v, "b"), kPadId, kPadId});
}

TEST_CASE("encode_pair trims the longer side first, equal budgets on a tie") {
    const std::vector<std::string> corpus{"a b c d e f g h"};
    const auto v = build_vocab(corpus, 20);
    const auto tie = encode_pair(v, "a b c d e f", "c d e f g h", 8);
    CHECK(tie.real_length() == 8);
    const auto sep = std::find(tie.ids.begin(), tie.ids.end(), kSepId) - tie.ids.begin();
    CHECK(sep == 4); // [CLS] + 3 words
    CHECK(tie.ids.back() == id_of(v, "e"));

    const auto uneven = encode_pair(v, "a", "b c d e f g h", 6);
    CHECK(uneven.ids == std::vector<TokenId>{kClsId, id_of(v, "a"), kSepId, id_of(v, "b"), id_of(v, "c"), id_of(v, "d")});
}

TEST_CASE("tokenized sequences always start with [CLS], mask marks exactly the non-pad ids") {
    const std::vector<std::string> corpus{"one two three four five six"};
    const auto v = build_vocab(corpus, 12);
    std::mt19937_64 rng(4);
    const std::vector<std::string> words{"one", "two", "three", "four", "five", "six", "seven", ","};
    for (int trial = 0; trial < 200; ++trial) {
        std::string a, b;
        for (int k = static_cast<int>(rng() % 9); k > 0; --k) a += words[rng() % words.size()] + " ";
        for (int k = static_cast<int>(rng() % 9); k > 0; --k) b += words[rng() % words.size()] + " ";
        const std::size_t max_len = 3 + rng() % 10;
        for (const auto& seq : {encode(v, a, max_len), encode_pair(v, a, b, max_len)}) {
            REQUIRE(seq.size() == max_len);
            CHECK(seq.ids.front() == kClsId);
            for (std::size_t i = 0; i < seq.size(); ++i) CHECK((seq.attention_mask[i] == 1) == (seq.ids[i] != kPadId));
        }
        const auto pair = encode_pair(v, a, b, max_len);
        CHECK(std::count(pair.ids.begin(), pair.ids.end(), kSepId) == 1);
    }
}

TEST_CASE("trim_padding drops only trailing pads") {
    const std::vector<std::string> corpus{"a b"};
    const auto v = build_vocab(corpus, 10);
    const auto seq = encode(v, "a b", 8);
    const auto t = trim_padding(seq);
    CHECK(t.ids == std::vector<TokenId>{kClsId, id_of(v, "a"), id_of(v, "b")});
    CHECK(t.attention_mask == std::vector<std::int32_t>{1, 1, 1});
}

TEST_CASE("vocab save/load round trip") {
    oracle::TempDir dir("vocab");
    const std::vector<std::string> corpus{"alpha beta, gamma!", "beta delta"};
    const auto v = build_vocab(corpus, 50);
    v.save(dir / "v.txt");
    CHECK(Vocab::load(dir / "v.txt") == v);

    std::ofstream(dir / "bad.txt") << "[UNK]\n[PAD]\n[CLS]\n[SEP]\n";
    CHECK_THROWS_AS(Vocab::load(dir / "bad.txt"), FormatError);
    CHECK_THROWS(Vocab::load(dir / "missing.txt"));
}
