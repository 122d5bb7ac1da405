#pragma once

#include "comve/tensor.hpp"
#include "comve/tokenizer.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace comve {

enum class Pooling { Cls, Mean };

std::string_view to_string(Pooling pooling);
Pooling parse_pooling(std::string_view text);

struct EncoderConfig {
    std::size_t vocab_size = 1000;
    std::size_t d_model = 64;
    std::size_t n_heads = 2;
    std::size_t n_layers = 2;
    std::size_t d_ff = 128;
    std::size_t max_sequence_length = 64;
    Pooling pooling = Pooling::Mean;
    // Applied to attention and feed-forward outputs during training only.
    double dropout = 0.0;

    // Throws ConfigError.
    void validate() const;
    bool operator==(const EncoderConfig&) const = default;
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

// Pre-norm transformer block parameters. Linear maps are stored [in x out].
struct LayerWeights {
    Tensor query, query_bias;
    Tensor key, key_bias;
    Tensor value, value_bias;
    Tensor output, output_bias;
    Tensor ff_in, ff_in_bias;
    Tensor ff_out, ff_out_bias;
    Tensor attention_norm_gain, attention_norm_bias;
    Tensor ff_norm_gain, ff_norm_bias;
};

// The one parameter store shared by every candidate of an example.
struct EncoderWeights {
    EncoderConfig config;
    Tensor token_embedding;    // [vocab x d_model]
    Tensor position_embedding; // [max_len x d_model]
    std::vector<LayerWeights> layers;

    // Stable names and order; used by the optimizer and checkpoints.
    std::vector<NamedTensor> parameters() const;
};

std::size_t parameter_count(std::span<const NamedTensor> params);

// N(0, 0.02) weights, zero biases, unit layer-norm gains. Deterministic in seed.
EncoderWeights init_weights(const EncoderConfig& config, std::uint64_t seed);

// Training-time randomness. A default-constructed context means inference.
struct ForwardContext {
    double dropout = 0.0;
    std::mt19937_64* rng = nullptr;
};

// Token representations [len x d_model]. Padded key positions are excluded
// from attention, so outputs at real positions do not depend on padding.
Tensor encode(const EncoderWeights& weights, const TokenizedSequence& seq, const ForwardContext& ctx = {});

// CLS -> row 0; MEAN -> mean over rows whose mask is 1.
Tensor pool(const Tensor& reps, std::span<const std::int32_t> mask, Pooling strategy);

// encode + pool on the unpadded prefix of seq (same result, less work).
Tensor encode_pooled(const EncoderWeights& weights, const TokenizedSequence& seq, const ForwardContext& ctx = {});

} // namespace comve
