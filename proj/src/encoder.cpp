#include "comve/encoder.hpp"

#include "comve/errors.hpp"
#include "comve/ops.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace comve {

std::string_view to_string(Pooling pooling) { return pooling == Pooling::Cls ? "cls" : "mean"; }

Pooling parse_pooling(std::string_view text) {
    if (text == "cls" || text == "CLS") return Pooling::Cls;
    if (text == "mean" || text == "MEAN" || text == "avg") return Pooling::Mean;
    throw ConfigError(fmt::format("unknown pooling '{}' (expected cls or mean)", text));
}

void EncoderConfig::validate() const {
    auto positive = [](std::string_view name, std::size_t v) {
        if (v == 0) throw ConfigError(fmt::format("encoder {} must be at least 1", name));
    };
    positive("vocab_size", vocab_size);
    positive("d_model", d_model);
    positive("n_heads", n_heads);
    positive("n_layers", n_layers);
    positive("d_ff", d_ff);
    positive("max_sequence_length", max_sequence_length);
    if (d_model % n_heads != 0) {
        throw ConfigError(fmt::format("d_model {} is not divisible by n_heads {}", d_model, n_heads));
    }
    if (vocab_size < kReservedTokens) {
        throw ConfigError(fmt::format("vocab_size {} is smaller than the reserved token count", vocab_size));
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError(fmt::format("dropout {} outside [0, 1)", dropout));
}

std::vector<NamedTensor> EncoderWeights::parameters() const {
    std::vector<NamedTensor> out{{"encoder.token_embedding", token_embedding},
                                 {"encoder.position_embedding", position_embedding}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& w = layers[l];
        const auto p = fmt::format("encoder.layer{}.", l);
        out.push_back({p + "attention_norm.gain", w.attention_norm_gain});
        out.push_back({p + "attention_norm.bias", w.attention_norm_bias});
        out.push_back({p + "query.weight", w.query});
        out.push_back({p + "query.bias", w.query_bias});
        out.push_back({p + "key.weight", w.key});
        out.push_back({p + "key.bias", w.key_bias});
        out.push_back({p + "value.weight", w.value});
        out.push_back({p + "value.bias", w.value_bias});
        out.push_back({p + "output.weight", w.output});
        out.push_back({p + "output.bias", w.output_bias});
        out.push_back({p + "ff_norm.gain", w.ff_norm_gain});
        out.push_back({p + "ff_norm.bias", w.ff_norm_bias});
        out.push_back({p + "ff_in.weight", w.ff_in});
        out.push_back({p + "ff_in.bias", w.ff_in_bias});
        out.push_back({p + "ff_out.weight", w.ff_out});
        out.push_back({p + "ff_out.bias", w.ff_out_bias});
    }
    return out;
}

std::size_t parameter_count(std::span<const NamedTensor> params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

EncoderWeights init_weights(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    auto gaussian = [&](std::size_t rows, std::size_t cols) {
        std::vector<double> v(rows * cols);
        for (auto& x : v) x = normal(rng);
        return Tensor::matrix(rows, cols, std::move(v), true);
    };
    auto zeros = [](std::size_t n) { return Tensor::zeros({n}, true); };
    auto ones = [](std::size_t n) { return Tensor::filled({n}, 1.0, true); };

    const std::size_t d = config.d_model, ff = config.d_ff;
    EncoderWeights w;
    w.config = config;
    w.token_embedding = gaussian(config.vocab_size, d);
    w.position_embedding = gaussian(config.max_sequence_length, d);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        LayerWeights layer;
        layer.attention_norm_gain = ones(d);
        layer.attention_norm_bias = zeros(d);
        layer.query = gaussian(d, d);
        layer.query_bias = zeros(d);
        layer.key = gaussian(d, d);
        layer.key_bias = zeros(d);
        layer.value = gaussian(d, d);
        layer.value_bias = zeros(d);
        layer.output = gaussian(d, d);
        layer.output_bias = zeros(d);
        layer.ff_norm_gain = ones(d);
        layer.ff_norm_bias = zeros(d);
        layer.ff_in = gaussian(d, ff);
        layer.ff_in_bias = zeros(ff);
        layer.ff_out = gaussian(ff, d);
        layer.ff_out_bias = zeros(d);
        w.layers.push_back(std::move(layer));
    }
    return w;
}

namespace {

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) { return add_row_bias(matmul(x, weight), bias); }

Tensor self_attention(const LayerWeights& w, const Tensor& x, std::span<const std::int32_t> mask, std::size_t n_heads) {
    const std::size_t d = x.cols();
    const std::size_t head_dim = d / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

    const Tensor q = linear(x, w.query, w.query_bias);
    const Tensor k = linear(x, w.key, w.key_bias);
    const Tensor v = linear(x, w.value, w.value_bias);

    std::vector<Tensor> heads;
    heads.reserve(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t start = h * head_dim;
        const Tensor qh = slice_cols(q, start, head_dim);
        const Tensor kh = slice_cols(k, start, head_dim);
        const Tensor vh = slice_cols(v, start, head_dim);
        const Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        heads.push_back(matmul(softmax_rows(scores, mask), vh));
    }
    const Tensor merged = n_heads == 1 ? heads.front() : concat_cols(heads);
    return linear(merged, w.output, w.output_bias);
}

Tensor maybe_dropout(const Tensor& x, const ForwardContext& ctx) {
    if (ctx.rng == nullptr || ctx.dropout == 0.0) return x;
    return dropout(x, ctx.dropout, *ctx.rng);
}

} // namespace

Tensor encode(const EncoderWeights& weights, const TokenizedSequence& seq, const ForwardContext& ctx) {
    const auto& cfg = weights.config;
    const std::size_t len = seq.ids.size();
    if (len == 0) throw InputError("cannot encode an empty token sequence");
    if (len > cfg.max_sequence_length) {
        throw InputError(fmt::format("sequence of length {} exceeds max_sequence_length {}", len,
                                     cfg.max_sequence_length));
    }
    if (seq.attention_mask.size() != len) {
        throw InputError(fmt::format("attention mask length {} differs from sequence length {}",
                                     seq.attention_mask.size(), len));
    }
    Tensor x = add(gather_rows(weights.token_embedding, seq.ids), slice_rows(weights.position_embedding, 0, len));
    for (const auto& layer : weights.layers) {
        const Tensor attn_in = layer_norm(x, layer.attention_norm_gain, layer.attention_norm_bias);
        x = add(x, maybe_dropout(self_attention(layer, attn_in, seq.attention_mask, cfg.n_heads), ctx));

        const Tensor ff_in = layer_norm(x, layer.ff_norm_gain, layer.ff_norm_bias);
        const Tensor hidden = gelu(linear(ff_in, layer.ff_in, layer.ff_in_bias));
        x = add(x, maybe_dropout(linear(hidden, layer.ff_out, layer.ff_out_bias), ctx));
    }
    return x;
}

Tensor pool(const Tensor& reps, std::span<const std::int32_t> mask, Pooling strategy) {
    if (mask.size() != reps.rows()) {
        throw InputError(fmt::format("pooling mask of length {} for {} representations", mask.size(), reps.rows()));
    }
    if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) {
        throw InputError("pooling over a mask with no real positions");
    }
    if (strategy == Pooling::Cls) return row(reps, 0);
    return masked_mean_rows(reps, mask);
}

Tensor encode_pooled(const EncoderWeights& weights, const TokenizedSequence& seq, const ForwardContext& ctx) {
    const auto trimmed = trim_padding(seq);
    return pool(encode(weights, trimmed, ctx), trimmed.attention_mask, weights.config.pooling);
}

} // namespace comve
