#pragma once

#include "comve/dataset.hpp"
#include "comve/encoder.hpp"
#include "comve/heads.hpp"
#include "comve/tokenizer.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace comve {

enum class HeadKind { Binary, Siamese };

std::string_view to_string(HeadKind head);
HeadKind parse_head(std::string_view text);

struct ModelSpec {
    Task task = Task::A;
    HeadKind head = HeadKind::Siamese;
    std::optional<TemplateSpec> templ;
    EncoderConfig encoder;

    // Throws ConfigError for combinations the scorer cannot express.
    void validate() const;
};

// Encoder plus whichever head the spec selects; the vocabulary travels with it.
struct Model {
    ModelSpec spec;
    Vocab vocab;
    EncoderWeights encoder;
    ScorerHead scorer;                // siamese head
    BinaryClassifierHead classifier;  // binary head

    static Model create(const ModelSpec& spec, Vocab vocab, std::uint64_t seed);

    // Trainable tensors of the active head and the encoder, in a fixed order.
    std::vector<NamedTensor> parameters() const;

    ScoringItem item(const ExampleSet& examples, std::size_t index) const;
    std::vector<ScoringItem> items(const ExampleSet& examples) const;
};

struct ItemResult {
    // Siamese: softmax over candidates. Binary: mean P(class 1) of each
    // candidate's inputs.
    std::vector<double> candidate_scores;
    std::size_t predicted = 0;
    // Hard per-input labels (1 = "this input is the answer").
    std::vector<int> input_labels;
    // Defined only when requested.
    Tensor loss;
};

// One example through the model. With `with_loss`, the loss is built on the
// active tape: siamese cross-entropy over candidates, or the mean binary
// cross-entropy over inputs.
ItemResult run_item(const Model& model, const ScoringItem& item, bool with_loss, const ForwardContext& ctx = {});

} // namespace comve
