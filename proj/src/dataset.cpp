#include "comve/dataset.hpp"

#include "comve/csv.hpp"
#include "comve/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <numeric>
#include <set>
#include <unordered_map>

namespace comve {

std::string_view to_string(Task task) { return task == Task::A ? "A" : "B"; }

Task parse_task(std::string_view text) {
    if (text == "A" || text == "a") return Task::A;
    if (text == "B" || text == "b") return Task::B;
    throw ConfigError(fmt::format("unknown task '{}' (expected A or B)", text));
}

const std::string& ExampleSet::id(std::size_t i) const {
    return task == Task::A ? validation.at(i).id : explanation.at(i).id;
}

std::size_t ExampleSet::label(std::size_t i) const {
    return task == Task::A ? validation.at(i).label : explanation.at(i).label;
}

std::vector<std::string> ExampleSet::sentences() const {
    std::vector<std::string> out;
    for (const auto& ex : validation) {
        out.push_back(ex.sent0);
        out.push_back(ex.sent1);
    }
    for (const auto& ex : explanation) {
        out.push_back(ex.false_sent);
        out.insert(out.end(), ex.options.begin(), ex.options.end());
    }
    return out;
}

char option_letter(std::size_t index) { return static_cast<char>('A' + index); }

namespace {

std::string normalize_column(std::string_view name) {
    std::string out;
    for (char c : name) {
        if (c == '_' || c == ' ' || c == '-') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

struct DataTable {
    std::vector<csv::Row> rows; // without header
    std::vector<std::size_t> columns;
};

DataTable read_data_table(const std::filesystem::path& path, std::initializer_list<std::string_view> required) {
    if (!std::filesystem::exists(path)) throw InputError("data file not found: " + path.string());
    auto rows = csv::read_file(path);
    if (rows.empty()) throw FormatError(path.string() + ": missing header row");
    const auto& header = rows.front();
    DataTable table;
    for (auto name : required) {
        auto it = std::find_if(header.begin(), header.end(),
                               [&](const std::string& h) { return normalize_column(h) == normalize_column(name); });
        if (it == header.end()) throw FormatError(fmt::format("{}: missing column '{}'", path.string(), name));
        table.columns.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    const std::size_t width = header.size();
    std::set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto& row = rows[r];
        if (row.size() != width) {
            throw FormatError(fmt::format("{}: row {} (id '{}') has {} fields, header has {}", path.string(), r + 1,
                                          row.empty() ? "" : row.front(), row.size(), width));
        }
        const auto& id = row[table.columns[0]];
        if (!seen.insert(id).second) throw FormatError(fmt::format("{}: duplicate id '{}'", path.string(), id));
        for (std::size_t c = 1; c < table.columns.size(); ++c) {
            if (trim(row[table.columns[c]]).empty()) {
                throw FormatError(fmt::format("{}: empty '{}' for id '{}'", path.string(), *(required.begin() + c), id));
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::unordered_map<std::string, std::string> read_answers(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InputError("answers file not found: " + path.string());
    auto rows = csv::read_file(path);
    std::size_t start = 0;
    if (!rows.empty() && !rows.front().empty() && normalize_column(rows.front().front()) == "id") start = 1;
    std::unordered_map<std::string, std::string> answers;
    for (std::size_t r = start; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() < 2) throw FormatError(fmt::format("{}: row {} needs id,label", path.string(), r + 1));
        if (!answers.emplace(row[0], trim(row[1])).second) {
            throw FormatError(fmt::format("{}: duplicate answer for id '{}'", path.string(), row[0]));
        }
    }
    return answers;
}

template <typename Example, typename ParseLabel>
void join_answers(std::vector<Example>& examples, const std::filesystem::path& answers_path, ParseLabel parse_label) {
    auto answers = read_answers(answers_path);
    for (auto& ex : examples) {
        auto it = answers.find(ex.id);
        if (it == answers.end()) {
            throw FormatError(fmt::format("{}: no answer for id '{}'", answers_path.string(), ex.id));
        }
        ex.label = parse_label(ex.id, it->second);
        answers.erase(it);
    }
    if (!answers.empty()) {
        std::vector<std::string> extra;
        for (const auto& [id, label] : answers) extra.push_back(id);
        std::sort(extra.begin(), extra.end());
        throw FormatError(fmt::format("{}: answer for unknown id '{}'", answers_path.string(), extra.front()));
    }
}

} // namespace

std::vector<ValidationExample> read_validation_data(const std::filesystem::path& data_path) {
    const auto table = read_data_table(data_path, {"id", "sent0", "sent1"});
    std::vector<ValidationExample> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        out.push_back({row[table.columns[0]], row[table.columns[1]], row[table.columns[2]], 0});
    }
    return out;
}

std::vector<ExplanationExample> read_explanation_data(const std::filesystem::path& data_path) {
    const auto table = read_data_table(data_path, {"id", "FalseSent", "OptionA", "OptionB", "OptionC"});
    std::vector<ExplanationExample> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const auto& c = table.columns;
        out.push_back({row[c[0]], row[c[1]], {row[c[2]], row[c[3]], row[c[4]]}, 0});
    }
    return out;
}

std::vector<ValidationExample> load_validation_csv(const std::filesystem::path& data_path,
                                                   const std::filesystem::path& answers_path) {
    auto examples = read_validation_data(data_path);
    join_answers(examples, answers_path, [&](const std::string& id, const std::string& label) -> std::size_t {
        if (label == "0") return 0;
        if (label == "1") return 1;
        throw FormatError(fmt::format("{}: label '{}' for id '{}' is not 0 or 1", answers_path.string(), label, id));
    });
    return examples;
}

std::vector<ExplanationExample> load_explanation_csv(const std::filesystem::path& data_path,
                                                     const std::filesystem::path& answers_path) {
    auto examples = read_explanation_data(data_path);
    join_answers(examples, answers_path, [&](const std::string& id, const std::string& label) -> std::size_t {
        if (label.size() == 1 && label[0] >= 'A' && label[0] <= 'C') return static_cast<std::size_t>(label[0] - 'A');
        throw FormatError(fmt::format("{}: label '{}' for id '{}' is not A, B or C", answers_path.string(), label, id));
    });
    return examples;
}

ExampleSet load_examples(Task task, const std::filesystem::path& data_path,
                         const std::optional<std::filesystem::path>& answers_path) {
    ExampleSet set;
    set.task = task;
    if (task == Task::A) {
        set.validation = answers_path ? load_validation_csv(data_path, *answers_path) : read_validation_data(data_path);
    } else {
        set.explanation =
            answers_path ? load_explanation_csv(data_path, *answers_path) : read_explanation_data(data_path);
    }
    return set;
}

void save_validation_csv(std::span<const ValidationExample> examples, const std::filesystem::path& data_path,
                         const std::filesystem::path& answers_path) {
    std::vector<csv::Row> data{{"id", "sent0", "sent1"}};
    std::vector<csv::Row> answers;
    for (const auto& ex : examples) {
        data.push_back({ex.id, ex.sent0, ex.sent1});
        answers.push_back({ex.id, std::to_string(ex.label)});
    }
    csv::write_file(data_path, data);
    csv::write_file(answers_path, answers);
}

void save_explanation_csv(std::span<const ExplanationExample> examples, const std::filesystem::path& data_path,
                          const std::filesystem::path& answers_path) {
    std::vector<csv::Row> data{{"id", "FalseSent", "OptionA", "OptionB", "OptionC"}};
    std::vector<csv::Row> answers;
    for (const auto& ex : examples) {
        data.push_back({ex.id, ex.false_sent, ex.options[0], ex.options[1], ex.options[2]});
        answers.push_back({ex.id, std::string(1, option_letter(ex.label))});
    }
    csv::write_file(data_path, data);
    csv::write_file(answers_path, answers);
}

void save_examples(const ExampleSet& examples, const std::filesystem::path& data_path,
                   const std::filesystem::path& answers_path) {
    if (examples.task == Task::A) {
        save_validation_csv(examples.validation, data_path, answers_path);
    } else {
        save_explanation_csv(examples.explanation, data_path, answers_path);
    }
}

// --- templates ---------------------------------------------------------------

namespace {

// Slot names in order of appearance; throws on an unterminated brace.
std::vector<std::string> template_slots(const TemplateSpec& spec) {
    std::vector<std::string> slots;
    std::size_t pos = 0;
    while ((pos = spec.pattern.find('{', pos)) != std::string::npos) {
        const auto close = spec.pattern.find('}', pos);
        if (close == std::string::npos) {
            throw TemplateError(fmt::format("template '{}': unterminated slot", spec.name));
        }
        slots.push_back(spec.pattern.substr(pos + 1, close - pos - 1));
        pos = close + 1;
    }
    return slots;
}

std::string collapse_spaces(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

} // namespace

TemplateKind TemplateSpec::kind() const {
    const auto slots = template_slots(*this);
    if (slots.empty()) throw TemplateError(fmt::format("template '{}' has no slots", name));
    bool pair = false, explanation = false, permuted = false;
    for (const auto& s : slots) {
        if (s == "A" || s == "B") {
            pair = true;
        } else if (s == "S" || s == "O" || s == "O1") {
            explanation = true;
        } else if (s == "O2" || s == "O3") {
            explanation = permuted = true;
        } else {
            throw TemplateError(fmt::format("template '{}': unknown slot {{{}}}", name, s));
        }
    }
    if (pair && explanation) {
        throw TemplateError(fmt::format("template '{}' mixes sentence-pair and explanation slots", name));
    }
    if (pair) return TemplateKind::Pair;
    return permuted ? TemplateKind::MultiChoice : TemplateKind::Reason;
}

const std::vector<TemplateSpec>& builtin_templates() {
    static const std::vector<TemplateSpec> templates{
        {"more_sense", "{A} makes more sense than {B}"},
        {"less_sense_because", "{S} makes less sense because {O}"},
        {"rather_than", "The reason {S} makes less sense is {O1} rather than {O2} or {O3}"},
    };
    return templates;
}

const TemplateSpec& builtin_template(std::string_view name) {
    const auto& all = builtin_templates();
    auto it = std::find_if(all.begin(), all.end(), [&](const TemplateSpec& t) { return t.name == name; });
    if (it == all.end()) throw TemplateError(fmt::format("unknown template '{}'", name));
    return *it;
}

std::string render_template(const TemplateSpec& spec, const std::map<std::string, std::string>& slots) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = spec.pattern.find('{', pos);
        out += spec.pattern.substr(pos, open == std::string::npos ? std::string::npos : open - pos);
        if (open == std::string::npos) break;
        const auto close = spec.pattern.find('}', open);
        if (close == std::string::npos) throw TemplateError(fmt::format("template '{}': unterminated slot", spec.name));
        const auto slot = spec.pattern.substr(open + 1, close - open - 1);
        auto it = slots.find(slot);
        if (it == slots.end()) throw TemplateError(fmt::format("template '{}': unfilled slot {{{}}}", spec.name, slot));
        out += ' ' + trim(it->second) + ' ';
        pos = close + 1;
    }
    return collapse_spaces(out);
}

std::vector<std::string> render_template(const TemplateSpec& spec, const ValidationExample& ex) {
    if (spec.kind() != TemplateKind::Pair) {
        throw TemplateError(fmt::format("template '{}' does not apply to sentence pairs", spec.name));
    }
    return {render_template(spec, {{"A", ex.sent0}, {"B", ex.sent1}}),
            render_template(spec, {{"A", ex.sent1}, {"B", ex.sent0}})};
}

namespace {

std::vector<std::array<std::size_t, 3>> option_permutations() {
    std::array<std::size_t, 3> p{0, 1, 2};
    std::vector<std::array<std::size_t, 3>> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

} // namespace

std::vector<std::string> render_template(const TemplateSpec& spec, const ExplanationExample& ex) {
    const auto kind = spec.kind();
    if (kind == TemplateKind::Pair) {
        throw TemplateError(fmt::format("template '{}' does not apply to explanation examples", spec.name));
    }
    std::vector<std::string> out;
    if (kind == TemplateKind::Reason) {
        for (const auto& option : ex.options) {
            out.push_back(render_template(spec, {{"S", ex.false_sent}, {"O", option}, {"O1", option}}));
        }
        return out;
    }
    for (const auto& p : option_permutations()) {
        out.push_back(render_template(spec, {{"S", ex.false_sent},
                                             {"O", ex.options[p[0]]},
                                             {"O1", ex.options[p[0]]},
                                             {"O2", ex.options[p[1]]},
                                             {"O3", ex.options[p[2]]}}));
    }
    return out;
}

// --- candidates --------------------------------------------------------------

CandidateSet make_candidates_A(const ValidationExample& ex, const Vocab& vocab, std::size_t max_len) {
    return {{encode(vocab, ex.sent0, max_len), encode(vocab, ex.sent1, max_len)}, ex.label};
}

CandidateSet make_candidates_B(const ExplanationExample& ex, const Vocab& vocab, std::size_t max_len) {
    CandidateSet set;
    for (const auto& option : ex.options) set.candidates.push_back(encode_pair(vocab, ex.false_sent, option, max_len));
    set.gold = ex.label;
    return set;
}

ScoringItem build_item(const ExampleSet& examples, std::size_t index, const Vocab& vocab, std::size_t max_len,
                       const std::optional<TemplateSpec>& templ) {
    ScoringItem item;
    item.id = examples.id(index);
    item.gold = examples.label(index);
    if (!templ) {
        auto set = examples.task == Task::A ? make_candidates_A(examples.validation[index], vocab, max_len)
                                            : make_candidates_B(examples.explanation[index], vocab, max_len);
        item.inputs = std::move(set.candidates);
        item.n_candidates = item.inputs.size();
        item.candidate_of_input.resize(item.n_candidates);
        std::iota(item.candidate_of_input.begin(), item.candidate_of_input.end(), std::size_t{0});
        return item;
    }
    if (examples.task == Task::A) {
        // rendered[0] puts sent0 first, so it is the claim about sent1
        const auto rendered = render_template(*templ, examples.validation[index]);
        item.inputs = {encode(vocab, rendered[1], max_len), encode(vocab, rendered[0], max_len)};
        item.candidate_of_input = {0, 1};
        item.n_candidates = 2;
        return item;
    }
    const auto rendered = render_template(*templ, examples.explanation[index]);
    for (const auto& text : rendered) item.inputs.push_back(encode(vocab, text, max_len));
    item.n_candidates = 3;
    if (templ->kind() == TemplateKind::Reason) {
        item.candidate_of_input = {0, 1, 2};
    } else {
        for (const auto& p : option_permutations()) item.candidate_of_input.push_back(p[0]);
    }
    return item;
}

std::vector<ScoringItem> build_items(const ExampleSet& examples, const Vocab& vocab, std::size_t max_len,
                                     const std::optional<TemplateSpec>& templ) {
    std::vector<ScoringItem> items;
    items.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) items.push_back(build_item(examples, i, vocab, max_len, templ));
    return items;
}

} // namespace comve
