#include "comve/heads.hpp"

#include "comve/errors.hpp"
#include "comve/ops.hpp"

#include <fmt/format.h>
#include <random>

namespace comve {

ScorerHead ScorerHead::init(std::size_t d_model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    std::vector<double> w(d_model);
    for (auto& v : w) v = normal(rng);
    return {Tensor::vector(std::move(w), true), Tensor::scalar(0.0, true)};
}

std::vector<NamedTensor> ScorerHead::parameters() const { return {{"scorer.weight", weight}, {"scorer.bias", bias}}; }

BinaryClassifierHead BinaryClassifierHead::init(std::size_t d_model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    std::vector<double> w(2 * d_model);
    for (auto& v : w) v = normal(rng);
    return {Tensor::matrix(2, d_model, std::move(w), true), Tensor::zeros({2}, true)};
}

std::vector<NamedTensor> BinaryClassifierHead::parameters() const {
    return {{"classifier.weight", weight}, {"classifier.bias", bias}};
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

CandidateDistribution distribution_from_logits(const Tensor& logits) {
    CandidateDistribution dist;
    dist.logits = logits;
    dist.probs = softmax(logits);
    dist.values.assign(dist.probs.data().begin(), dist.probs.data().end());
    dist.predicted_index = argmax(dist.values);
    return dist;
}

CandidateDistribution score_candidates(const EncoderWeights& encoder, const ScorerHead& head,
                                       std::span<const TokenizedSequence> candidates, const ForwardContext& ctx) {
    if (candidates.empty()) throw InputError("score_candidates needs at least one candidate");
    std::vector<Tensor> logits;
    logits.reserve(candidates.size());
    for (const auto& c : candidates) logits.push_back(add(dot(head.weight, encode_pooled(encoder, c, ctx)), head.bias));
    return distribution_from_logits(stack(logits));
}

CandidateDistribution classify_binary(const EncoderWeights& encoder, const BinaryClassifierHead& head,
                                      const TokenizedSequence& input, const ForwardContext& ctx) {
    return distribution_from_logits(add(matvec(head.weight, encode_pooled(encoder, input, ctx)), head.bias));
}

Tensor siamese_loss(const CandidateDistribution& dist, std::size_t gold) {
    if (gold >= dist.size()) {
        throw InputError(fmt::format("gold index {} outside {} candidates", gold, dist.size()));
    }
    return neg(log(clamp_min(element(dist.probs, gold), kProbabilityFloor)));
}

} // namespace comve
