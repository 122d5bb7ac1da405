#include "comve/report.hpp"

#include "comve/csv.hpp"
#include "comve/errors.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <fmt/format.h>
#include <map>

namespace comve {

double fallacy_rate(std::span<const SentenceLabel> labels) {
    if (labels.empty()) throw InputError("fallacy_rate needs at least one pair");
    std::map<std::string, std::array<std::optional<int>, 2>> pairs;
    for (const auto& l : labels) {
        if (l.sentence_index > 1) {
            throw InputError(fmt::format("pair '{}': sentence index {} is not 0 or 1", l.pair_id, l.sentence_index));
        }
        auto& slot = pairs[l.pair_id][l.sentence_index];
        if (slot) throw InputError(fmt::format("pair '{}': sentence {} labelled twice", l.pair_id, l.sentence_index));
        slot = l.label;
    }
    std::size_t inconsistent = 0;
    for (const auto& [id, entry] : pairs) {
        if (!entry[0] || !entry[1]) throw InputError(fmt::format("pair '{}' is missing a sentence label", id));
        if (*entry[0] == *entry[1]) ++inconsistent;
    }
    return static_cast<double>(inconsistent) / static_cast<double>(pairs.size());
}

std::string_view to_string(HeadVariant variant) {
    switch (variant) {
    case HeadVariant::Binary:
        return "binary";
    case HeadVariant::BinaryPhrase:
        return "binary+phrase";
    case HeadVariant::Siamese:
        return "siamese";
    }
    return "?";
}

const std::vector<ReferenceResult>& published_results() {
    using enum HeadVariant;
    static const std::vector<ReferenceResult> results{
        {Task::A, "BERT Classifier", Binary, Pooling::Cls, 0.771},
        {Task::A, "BERT Classifier + phrase concat.", BinaryPhrase, Pooling::Cls, 0.843},
        {Task::A, "Albert-base Siamese", Siamese, Pooling::Cls, 0.876},
        {Task::A, "BERT-base Siamese", Siamese, Pooling::Cls, 0.886},
        {Task::A, "RoBERTa-base Siamese", Siamese, Pooling::Cls, 0.907},
        {Task::A, "Electra-base Siamese", Siamese, Pooling::Cls, 0.936},
        {Task::A, "RoBERTa-large Siamese", Siamese, Pooling::Cls, 0.952},
        {Task::B, "BERT Classifier", Binary, Pooling::Cls, 0.773},
        {Task::B, "BERT Classifier + phrase concat", BinaryPhrase, Pooling::Cls, 0.832},
        {Task::B, "BERT-base Siamese", Siamese, Pooling::Cls, 0.843},
        {Task::B, "AlBERT-base Siamese", Siamese, Pooling::Cls, 0.857},
        {Task::B, "RoBERTa-base Siamese", Siamese, Pooling::Cls, 0.875},
        {Task::B, "Electra-base Siamese", Siamese, Pooling::Cls, 0.877},
        {Task::B, "RoBERTa-base Siamese+avg. pool", Siamese, Pooling::Mean, 0.897},
    };
    return results;
}

std::vector<ReferenceResult> published_results(Task task) {
    std::vector<ReferenceResult> out;
    for (const auto& r : published_results())
        if (r.task == task) out.push_back(r);
    return out;
}

namespace {

std::string percent(double fraction) { return fmt::format("{:.1f}%", 100.0 * fraction); }

const ReferenceResult* best_match(std::span<const ReferenceResult> reference, const AblationRow& row) {
    const ReferenceResult* best = nullptr;
    for (const auto& r : reference) {
        if (r.head != row.head || r.pooling != row.pooling) continue;
        if (best == nullptr || r.accuracy > best->accuracy) best = &r;
    }
    return best;
}

} // namespace

Report build_report(std::span<const AblationRow> rows, std::optional<std::span<const ReferenceResult>> reference) {
    if (rows.empty()) throw InputError("build_report needs at least one row");

    std::vector<std::string> header{"model", "head", "pooling", "dev accuracy", "fallacy rate"};
    std::vector<csv::Row> csv_rows{{"model_name", "head", "pooling", "dev_accuracy", "fallacy_rate"}};
    if (reference) {
        header.emplace_back(kReferenceColumn);
        csv_rows.front().push_back("reference_model");
        csv_rows.front().push_back("reference_accuracy");
    }

    std::vector<std::vector<std::string>> cells;
    for (const auto& row : rows) {
        std::vector<std::string> line{row.model_name, std::string(to_string(row.head)),
                                      std::string(to_string(row.pooling)), percent(row.dev_accuracy),
                                      row.fallacy_rate ? percent(*row.fallacy_rate) : "-"};
        csv::Row csv_line{row.model_name, std::string(to_string(row.head)), std::string(to_string(row.pooling)),
                          fmt::format("{:.6f}", row.dev_accuracy),
                          row.fallacy_rate ? fmt::format("{:.6f}", *row.fallacy_rate) : ""};
        if (reference) {
            const auto* match = best_match(*reference, row);
            line.push_back(match ? fmt::format("{} {}", match->model_name, percent(match->accuracy)) : "-");
            csv_line.push_back(match ? match->model_name : "");
            csv_line.push_back(match ? fmt::format("{:.3f}", match->accuracy) : "");
        }
        cells.push_back(std::move(line));
        csv_rows.push_back(std::move(csv_line));
    }

    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        widths[c] = header[c].size();
        for (const auto& line : cells) widths[c] = std::max(widths[c], line[c].size());
    }
    auto render_line = [&](const std::vector<std::string>& line) {
        std::string out;
        for (std::size_t c = 0; c < line.size(); ++c) {
            if (c > 0) out += " | ";
            out += fmt::format("{:<{}}", line[c], widths[c]);
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out + '\n';
    };

    Report report;
    report.text = render_line(header);
    std::string rule;
    for (std::size_t c = 0; c < widths.size(); ++c) {
        if (c > 0) rule += "-+-";
        rule += std::string(widths[c], '-');
    }
    report.text += rule + '\n';
    for (const auto& line : cells) report.text += render_line(line);
    for (const auto& r : csv_rows) report.csv += csv::format_row(r) + "\r\n";
    return report;
}

} // namespace comve
