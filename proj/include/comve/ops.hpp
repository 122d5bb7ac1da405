#pragma once

#include "comve/tensor.hpp"

#include <cstdint>
#include <random>
#include <span>

namespace comve {

// Differentiable tensor operations. Each op records itself on the active tape
// (see TapeGuard) when any input requires a gradient; otherwise it is a plain
// forward computation.

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor neg(const Tensor& x);

// x[m x n] + bias[n], broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

Tensor matmul(const Tensor& a, const Tensor& b);
// m[r x c] * v[c] -> [r]
Tensor matvec(const Tensor& m, const Tensor& v);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// Embedding lookup: rows of table[V x d] selected by ids -> [ids.size() x d].
Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids);
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor row(const Tensor& x, std::size_t index);
// Scalars -> rank-1 tensor.
Tensor stack(std::span<const Tensor> scalars);
Tensor element(const Tensor& x, std::size_t index);

// Softmax of a rank-1 tensor, max-subtracted. Throws NumericError on NaN.
Tensor softmax(const Tensor& logits);
// Row-wise softmax of x[m x n]. Columns with key_mask[j] == 0 get probability
// exactly 0 (treated as -inf logits). An empty mask means no masking.
Tensor softmax_rows(const Tensor& x, std::span<const std::int32_t> key_mask = {});

inline constexpr double kLayerNormEps = 1e-5;
// Normalises each length-d row by its mean and population variance, then
// applies gain/bias. Works on x[d] or x[m x d].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps);

// tanh-approximation GELU.
Tensor gelu(const Tensor& x);

Tensor log(const Tensor& x);
Tensor clamp_min(const Tensor& x, double floor);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Mean over rows of x[m x d] where mask[i] != 0 -> [d].
Tensor masked_mean_rows(const Tensor& x, std::span<const std::int32_t> mask);

// Inverted dropout. rate == 0 returns x unchanged.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

} // namespace comve
