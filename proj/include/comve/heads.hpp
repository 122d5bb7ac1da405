#pragma once

#include "comve/encoder.hpp"
#include "comve/tensor.hpp"
#include "comve/tokenizer.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace comve {

// Shared affine map pooled[d] -> scalar logit, applied to every candidate.
// The bias cancels in the softmax; it is kept so the head is a plain affine map.
struct ScorerHead {
    Tensor weight; // [d_model]
    Tensor bias;   // scalar

    static ScorerHead init(std::size_t d_model, std::uint64_t seed);
    std::vector<NamedTensor> parameters() const;
};

// Per-input two-way classifier (the non-siamese baseline).
struct BinaryClassifierHead {
    Tensor weight; // [2 x d_model]
    Tensor bias;   // [2]

    static BinaryClassifierHead init(std::size_t d_model, std::uint64_t seed);
    std::vector<NamedTensor> parameters() const;
};

// Softmax over N logits. `probs` stays on the tape; `values` is a plain copy.
struct CandidateDistribution {
    Tensor logits;
    Tensor probs;
    std::vector<double> values;
    std::size_t predicted_index = 0;

    std::size_t size() const noexcept { return values.size(); }
};

// Index of the largest value; the lowest index wins exact ties.
std::size_t argmax(std::span<const double> values);

CandidateDistribution distribution_from_logits(const Tensor& logits);

// Every candidate goes through the same encoder and head; the logits are
// normalised jointly across candidates.
CandidateDistribution score_candidates(const EncoderWeights& encoder, const ScorerHead& head,
                                       std::span<const TokenizedSequence> candidates, const ForwardContext& ctx = {});

// Class 1 means the input is the answer (against common sense, correct reason,
// or a true claim, depending on how the inputs were built).
CandidateDistribution classify_binary(const EncoderWeights& encoder, const BinaryClassifierHead& head,
                                      const TokenizedSequence& input, const ForwardContext& ctx = {});

inline constexpr double kProbabilityFloor = 1e-12;

// -log(max(probs[gold], 1e-12)).
Tensor siamese_loss(const CandidateDistribution& dist, std::size_t gold);

} // namespace comve
