#pragma once

#include "comve/tokenizer.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace comve {

enum class Task { A, B };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

// Sentence pair; label is the index of the sentence that is against common sense.
struct ValidationExample {
    std::string id;
    std::string sent0;
    std::string sent1;
    std::size_t label = 0;

    bool operator==(const ValidationExample&) const = default;
};

// Nonsensical statement with three candidate reasons; label indexes the right one.
struct ExplanationExample {
    std::string id;
    std::string false_sent;
    std::array<std::string, 3> options;
    std::size_t label = 0;

    bool operator==(const ExplanationExample&) const = default;
};

// Examples of one task. Only the vector matching `task` is populated.
struct ExampleSet {
    Task task = Task::A;
    std::vector<ValidationExample> validation;
    std::vector<ExplanationExample> explanation;

    std::size_t size() const noexcept { return task == Task::A ? validation.size() : explanation.size(); }
    bool empty() const noexcept { return size() == 0; }
    const std::string& id(std::size_t i) const;
    std::size_t label(std::size_t i) const;
    // Every sentence, for vocabulary building.
    std::vector<std::string> sentences() const;
};

// --- CSV files ---------------------------------------------------------------
// Data:    id,sent0,sent1                          (task A)
//          id,FalseSent,OptionA,OptionB,OptionC    (task B)
// Answers: id,label  with label 0/1 (A) or A/B/C (B)
// Column names match case-insensitively, ignoring underscores. An answers
// file without a header row is accepted.

std::vector<ValidationExample> load_validation_csv(const std::filesystem::path& data_path,
                                                   const std::filesystem::path& answers_path);
std::vector<ExplanationExample> load_explanation_csv(const std::filesystem::path& data_path,
                                                     const std::filesystem::path& answers_path);
// Data file only; labels are left at 0.
std::vector<ValidationExample> read_validation_data(const std::filesystem::path& data_path);
std::vector<ExplanationExample> read_explanation_data(const std::filesystem::path& data_path);

ExampleSet load_examples(Task task, const std::filesystem::path& data_path,
                         const std::optional<std::filesystem::path>& answers_path);

void save_validation_csv(std::span<const ValidationExample> examples, const std::filesystem::path& data_path,
                         const std::filesystem::path& answers_path);
void save_explanation_csv(std::span<const ExplanationExample> examples, const std::filesystem::path& data_path,
                          const std::filesystem::path& answers_path);
void save_examples(const ExampleSet& examples, const std::filesystem::path& data_path,
                   const std::filesystem::path& answers_path);

char option_letter(std::size_t index);

// --- templates ---------------------------------------------------------------

enum class TemplateKind {
    Pair,        // {A} {B}: one input per ordering of a sentence pair
    Reason,      // {S} {O}: one input per option
    MultiChoice, // {S} {O1} {O2} {O3}: one input per permutation of the options
};

struct TemplateSpec {
    std::string name;
    std::string pattern;

    // Throws TemplateError on unknown slots or a mix of pair and explanation slots.
    TemplateKind kind() const;
    bool operator==(const TemplateSpec&) const = default;
};

const std::vector<TemplateSpec>& builtin_templates();
// Throws TemplateError for unknown names.
const TemplateSpec& builtin_template(std::string_view name);

// Literal slot substitution with slot values trimmed and whitespace runs at
// the joins collapsed to one space. Missing slot values throw TemplateError.
std::string render_template(const TemplateSpec& spec, const std::map<std::string, std::string>& slots);

// [A=sent0,B=sent1], [A=sent1,B=sent0]
std::vector<std::string> render_template(const TemplateSpec& spec, const ValidationExample& ex);
// Reason: one sentence per option. MultiChoice: one per permutation, in
// lexicographic permutation order.
std::vector<std::string> render_template(const TemplateSpec& spec, const ExplanationExample& ex);

// --- candidates --------------------------------------------------------------

struct CandidateSet {
    std::vector<TokenizedSequence> candidates;
    std::size_t gold = 0;
};

// [encode(sent0), encode(sent1)], gold = label.
CandidateSet make_candidates_A(const ValidationExample& ex, const Vocab& vocab, std::size_t max_len);
// encode_pair(false_sent, option_i) for i = 0..2, gold = label.
CandidateSet make_candidates_B(const ExplanationExample& ex, const Vocab& vocab, std::size_t max_len);

// Model-ready inputs for one example. inputs[j] speaks for candidate
// candidate_of_input[j]; without a multi-choice template the two coincide.
struct ScoringItem {
    std::string id;
    std::vector<TokenizedSequence> inputs;
    std::vector<std::size_t> candidate_of_input;
    std::size_t n_candidates = 0;
    std::size_t gold = 0;
};

// No template: the plain candidate sets above. Pair template: input j is
// "{S_other} ... {S_j}", true exactly when S_j is the odd one out. Reason and
// multi-choice templates render the false sentence with its options.
ScoringItem build_item(const ExampleSet& examples, std::size_t index, const Vocab& vocab, std::size_t max_len,
                       const std::optional<TemplateSpec>& templ);
std::vector<ScoringItem> build_items(const ExampleSet& examples, const Vocab& vocab, std::size_t max_len,
                                     const std::optional<TemplateSpec>& templ);

} // namespace comve
