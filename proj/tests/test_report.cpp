#include "comve/errors.hpp"
#include "comve/report.hpp"

#include <doctest.h>

#include <fmt/format.h>
#include <fstream>
#include <sstream>

using namespace comve;

namespace {

std::vector<SentenceLabel> pairs_with(std::size_t n, std::size_t inconsistent) {
    std::vector<SentenceLabel> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = std::to_string(i);
        out.push_back({id, 0, 1});
        out.push_back({id, 1, i < inconsistent ? 1 : 0});
    }
    return out;
}

std::string published_table_text() {
    std::ifstream in(COMVE_PAPER_PATH);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<AblationRow> sample_rows() {
    return {
        {"mean_siamese", HeadVariant::Siamese, Pooling::Mean, 0.9375, 0.0},
        {"cls_binary", HeadVariant::Binary, Pooling::Cls, 0.5, 1.0},
        {"phrase", HeadVariant::BinaryPhrase, Pooling::Mean, 0.71875, std::nullopt},
    };
}

} // namespace

TEST_CASE("fallacy rate examples") {
    CHECK(fallacy_rate(pairs_with(10, 3)) == doctest::Approx(0.3));
    CHECK(fallacy_rate(pairs_with(10, 0)) == 0.0);
    CHECK(fallacy_rate(pairs_with(4, 4)) == 1.0);

    // a constant classifier labels every sentence the same way
    std::vector<SentenceLabel> constant;
    for (int i = 0; i < 7; ++i) {
        constant.push_back({std::to_string(i), 0, 1});
        constant.push_back({std::to_string(i), 1, 1});
    }
    CHECK(fallacy_rate(constant) == 1.0);

    // exactly one flagged sentence per pair, as the siamese argmax produces
    std::vector<SentenceLabel> siamese;
    for (int i = 0; i < 9; ++i) {
        const int pick = i % 2;
        siamese.push_back({std::to_string(i), 0, pick == 0 ? 1 : 0});
        siamese.push_back({std::to_string(i), 1, pick == 1 ? 1 : 0});
    }
    CHECK(fallacy_rate(siamese) == 0.0);
}

TEST_CASE("fallacy rate input errors") {
    CHECK_THROWS_AS(fallacy_rate({}), InputError);
    std::vector<SentenceLabel> missing{{"a", 0, 1}};
    CHECK_THROWS_AS(fallacy_rate(missing), InputError);
    std::vector<SentenceLabel> twice{{"a", 0, 1}, {"a", 0, 0}, {"a", 1, 0}};
    CHECK_THROWS_AS(fallacy_rate(twice), InputError);
    std::vector<SentenceLabel> third{{"a", 0, 1}, {"a", 1, 0}, {"a", 2, 0}};
    CHECK_THROWS_AS(fallacy_rate(third), InputError);
}

TEST_CASE("every published result appears verbatim in the source table") {
    const auto text = published_table_text();
    CHECK(published_results(Task::A).size() == 7);
    CHECK(published_results(Task::B).size() == 7);
    for (const auto& r : published_results()) {
        CAPTURE(r.model_name);
        const auto cell = fmt::format("{} & {:.1f}\\%", r.model_name, 100.0 * r.accuracy);
        CHECK(text.find(cell) != std::string::npos);
    }
    const auto best = [](Task t) {
        double b = 0.0;
        for (const auto& r : published_results(t)) b = std::max(b, r.accuracy);
        return b;
    };
    CHECK(best(Task::A) == 0.952);
    CHECK(best(Task::B) == 0.897);
    CHECK(text.find("RoBERTa-large Siamese & 95.2\\%") != std::string::npos);
    CHECK(text.find("RoBERTa-base Siamese+avg. pool & 89.7\\%") != std::string::npos);
}

TEST_CASE("report without reference has no reference column") {
    const auto rows = sample_rows();
    const auto r = build_report(rows);
    CHECK(r.text.find(kReferenceColumn) == std::string::npos);
    CHECK(r.csv.find("reference") == std::string::npos);
    CHECK(r.text.find("mean_siamese") != std::string::npos);
    CHECK(r.text.find("93.8%") != std::string::npos);
    CHECK(r.csv.find("mean_siamese,siamese,mean,0.937500,0.000000") != std::string::npos);
    CHECK(r.csv.find("phrase,binary+phrase,mean,0.718750,\r\n") != std::string::npos);
    // header, rule, three rows
    CHECK(std::count(r.text.begin(), r.text.end(), '\n') == 5);
}

TEST_CASE("report with reference matches head and pooling") {
    const auto rows = sample_rows();
    const auto ref = published_results(Task::B);
    const auto r = build_report(rows, std::span<const ReferenceResult>(ref));
    CHECK(r.text.find(kReferenceColumn) != std::string::npos);
    CHECK(r.text.find("RoBERTa-base Siamese+avg. pool 89.7%") != std::string::npos);
    CHECK(r.text.find("BERT Classifier 77.3%") != std::string::npos);
    CHECK(r.csv.find("reference_model,reference_accuracy") != std::string::npos);
    // no published phrase model uses mean pooling
    CHECK(r.csv.find("phrase,binary+phrase,mean,0.718750,,,\r\n") != std::string::npos);
}

TEST_CASE("report regeneration is byte-identical and rejects empty input") {
    const auto rows = sample_rows();
    const auto ref = published_results(Task::A);
    const auto a = build_report(rows, std::span<const ReferenceResult>(ref));
    const auto b = build_report(rows, std::span<const ReferenceResult>(ref));
    CHECK(a.text == b.text);
    CHECK(a.csv == b.csv);
    CHECK_THROWS_AS(build_report(std::span<const AblationRow>{}), InputError);
}

TEST_CASE("head variant names") {
    CHECK(to_string(HeadVariant::Binary) == "binary");
    CHECK(to_string(HeadVariant::BinaryPhrase) == "binary+phrase");
    CHECK(to_string(HeadVariant::Siamese) == "siamese");
}
