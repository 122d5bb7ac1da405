#pragma once

#include "comve/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace comve {

// An action with the objects it sensibly applies to and the property that
// explains why.
struct ActionFrame {
    std::string verb;     // "drinks"
    std::string property; // "drinkable"
    std::vector<std::string> fitting_objects;
};

// Word lists the generator draws from. Absurd objects never appear in a
// sensible statement, which is the lexical signal a small model can pick up.
struct SyntheticVocabSpec {
    std::vector<std::string> subjects;
    std::vector<ActionFrame> frames;
    std::vector<std::string> absurd_objects;
    std::vector<std::string> settings;

    static SyntheticVocabSpec defaults();
};

struct SyntheticCorpus {
    std::vector<ValidationExample> validation;
    std::vector<ExplanationExample> explanation;

    ExampleSet task_set(Task task) const;
};

// n_examples of each kind. Labels are assigned round-robin and then shuffled,
// so every label count is within one of the others. Deterministic per seed.
SyntheticCorpus generate_synthetic(std::uint64_t seed, std::size_t n_examples,
                                   const SyntheticVocabSpec& spec = SyntheticVocabSpec::defaults());

// First n_train examples of each kind go to the first set, the rest to the second.
std::pair<SyntheticCorpus, SyntheticCorpus> split_corpus(const SyntheticCorpus& corpus, std::size_t n_train);

} // namespace comve
