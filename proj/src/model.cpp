#include "comve/model.hpp"

#include "comve/errors.hpp"
#include "comve/ops.hpp"

#include <fmt/format.h>

namespace comve {

std::string_view to_string(HeadKind head) { return head == HeadKind::Binary ? "binary" : "siamese"; }

HeadKind parse_head(std::string_view text) {
    if (text == "binary") return HeadKind::Binary;
    if (text == "siamese") return HeadKind::Siamese;
    throw ConfigError(fmt::format("unknown head '{}' (expected binary or siamese)", text));
}

void ModelSpec::validate() const {
    encoder.validate();
    if (!templ) return;
    const auto kind = templ->kind();
    if (task == Task::A && kind != TemplateKind::Pair) {
        throw ConfigError(fmt::format("template '{}' needs explanation examples; task A uses pair templates", templ->name));
    }
    if (task == Task::B && kind == TemplateKind::Pair) {
        throw ConfigError(fmt::format("template '{}' is a sentence-pair template; task B needs {{S}}/{{O}} slots",
                                      templ->name));
    }
    if (kind == TemplateKind::MultiChoice && head != HeadKind::Binary) {
        throw ConfigError(fmt::format("multi-choice template '{}' needs the binary head", templ->name));
    }
}

Model Model::create(const ModelSpec& spec, Vocab vocab, std::uint64_t seed) {
    spec.validate();
    Model model;
    model.spec = spec;
    model.spec.encoder.vocab_size = vocab.size();
    model.vocab = std::move(vocab);
    model.encoder = init_weights(model.spec.encoder, seed);
    model.scorer = ScorerHead::init(model.spec.encoder.d_model, seed + 1);
    model.classifier = BinaryClassifierHead::init(model.spec.encoder.d_model, seed + 2);
    return model;
}

std::vector<NamedTensor> Model::parameters() const {
    auto params = encoder.parameters();
    auto head = spec.head == HeadKind::Siamese ? scorer.parameters() : classifier.parameters();
    params.insert(params.end(), head.begin(), head.end());
    return params;
}

ScoringItem Model::item(const ExampleSet& examples, std::size_t index) const {
    return build_item(examples, index, vocab, spec.encoder.max_sequence_length, spec.templ);
}

std::vector<ScoringItem> Model::items(const ExampleSet& examples) const {
    return build_items(examples, vocab, spec.encoder.max_sequence_length, spec.templ);
}

ItemResult run_item(const Model& model, const ScoringItem& item, bool with_loss, const ForwardContext& ctx) {
    if (item.inputs.empty()) throw InputError(fmt::format("example '{}' has no inputs", item.id));
    ItemResult result;

    if (model.spec.head == HeadKind::Siamese) {
        auto dist = score_candidates(model.encoder, model.scorer, item.inputs, ctx);
        result.candidate_scores = dist.values;
        result.predicted = dist.predicted_index;
        for (std::size_t j = 0; j < item.inputs.size(); ++j) {
            result.input_labels.push_back(item.candidate_of_input[j] == result.predicted ? 1 : 0);
        }
        if (with_loss) result.loss = siamese_loss(dist, item.gold);
        return result;
    }

    std::vector<double> score_sum(item.n_candidates, 0.0);
    std::vector<std::size_t> score_count(item.n_candidates, 0);
    std::vector<Tensor> losses;
    for (std::size_t j = 0; j < item.inputs.size(); ++j) {
        auto dist = classify_binary(model.encoder, model.classifier, item.inputs[j], ctx);
        const auto candidate = item.candidate_of_input[j];
        score_sum[candidate] += dist.values[1];
        ++score_count[candidate];
        result.input_labels.push_back(static_cast<int>(dist.predicted_index));
        if (with_loss) losses.push_back(siamese_loss(dist, candidate == item.gold ? 1 : 0));
    }
    for (std::size_t c = 0; c < item.n_candidates; ++c) {
        result.candidate_scores.push_back(score_count[c] == 0 ? 0.0 : score_sum[c] / static_cast<double>(score_count[c]));
    }
    result.predicted = argmax(result.candidate_scores);
    if (with_loss) result.loss = mean(stack(losses));
    return result;
}

} // namespace comve
