#pragma once

#include "comve/dataset.hpp"
#include "comve/encoder.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace comve {

// One per-sentence decision: does sentence `sentence_index` of pair `pair_id`
// get label 1 ("against common sense") or 0?
struct SentenceLabel {
    std::string pair_id;
    std::size_t sentence_index = 0;
    int label = 0;
};

// Fraction of pairs whose two sentences received the same label (both flagged
// or both passed). Throws InputError unless every pair has exactly entries 0 and 1.
double fallacy_rate(std::span<const SentenceLabel> labels);

enum class HeadVariant { Binary, BinaryPhrase, Siamese };

std::string_view to_string(HeadVariant variant);

struct AblationRow {
    std::string model_name;
    HeadVariant head = HeadVariant::Siamese;
    Pooling pooling = Pooling::Cls;
    double dev_accuracy = 0.0;
    std::optional<double> fallacy_rate; // task A only
};

// Dev-set accuracy published for large pretrained encoders, kept for side-by-side display.
struct ReferenceResult {
    Task task = Task::A;
    std::string model_name;
    HeadVariant head = HeadVariant::Siamese;
    Pooling pooling = Pooling::Cls;
    double accuracy = 0.0;
};

const std::vector<ReferenceResult>& published_results();
std::vector<ReferenceResult> published_results(Task task);

inline constexpr std::string_view kReferenceColumn = "paper (not desk-reproducible)";

struct Report {
    std::string text;
    std::string csv;
};

// Aligned text table plus CSV. With reference results, each row gains a column
// showing the best published result for the same head variant and pooling.
// Throws InputError on empty rows.
Report build_report(std::span<const AblationRow> rows,
                    std::optional<std::span<const ReferenceResult>> reference = std::nullopt);

} // namespace comve
