#include "comve/ops.hpp"

#include "comve/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>

namespace comve {

namespace {

bool tracking(std::initializer_list<const Tensor*> inputs) {
    if (active_tape() == nullptr) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

bool tracking(std::span<const Tensor> inputs) {
    if (active_tape() == nullptr) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

// Handles are shallow, so a by-value copy reaches the shared gradient buffer.
std::span<double> grad_of(Tensor t) { return t.mutable_grad(); }

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(fmt::format("{}: shape mismatch {} vs {}", op, shape_to_string(a.shape()),
                                         shape_to_string(b.shape())));
    }
}

void require_rank(std::string_view op, const Tensor& t, std::size_t rank) {
    if (t.rank() != rank) {
        throw DimensionError(fmt::format("{}: expected rank {}, got shape {}", op, rank, shape_to_string(t.shape())));
    }
}

void require_finite(std::string_view op, std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError(fmt::format("{}: non-finite input value {}", op, v));
    }
}

constexpr double kGeluScale = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.numel());
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    const bool track = tracking({&a, &b});
    Tensor result(a.shape(), std::move(out), track);
    if (track) {
        active_tape()->record("add", {a, b}, result, [a, b, result] {
            auto g = result.grad();
            for (const Tensor* in : {&a, &b}) {
                if (!in->requires_grad()) continue;
                auto gi = grad_of(*in);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
            }
        });
    }
    return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.numel());
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    const bool track = tracking({&a, &b});
    Tensor result(a.shape(), std::move(out), track);
    if (track) {
        active_tape()->record("mul", {a, b}, result, [a, b, result] {
            auto g = result.grad();
            auto x = a.data(), y = b.data();
            if (a.requires_grad()) {
                auto ga = grad_of(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
            }
            if (b.requires_grad()) {
                auto gb = grad_of(b);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
            }
        });
    }
    return result;
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.data().begin(), x.data().end());
    for (auto& v : out) v *= factor;
    const bool track = tracking({&x});
    Tensor result(x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record("scale", {x}, result, [x, result, factor] {
            auto g = result.grad();
            auto gx = grad_of(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
        });
    }
    return result;
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    require_rank("add_row_bias", x, 2);
    require_rank("add_row_bias", bias, 1);
    const std::size_t m = x.rows(), n = x.cols();
    if (bias.numel() != n) {
        throw DimensionError(fmt::format("add_row_bias: bias {} does not fit rows of {}", shape_to_string(bias.shape()),
                                         shape_to_string(x.shape())));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    auto b = bias.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
    const bool track = tracking({&x, &bias});
    Tensor result(x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record("add_row_bias", {x, bias}, result, [x, bias, result, m, n] {
            auto g = result.grad();
            if (x.requires_grad()) {
                auto gx = grad_of(x);
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (bias.requires_grad()) {
                auto gb = grad_of(bias);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
            }
        });
    }
    return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw DimensionError(fmt::format("matmul: cannot multiply {} by {}", shape_to_string(a.shape()),
                                         shape_to_string(b.shape())));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* out_row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = x[i * k + p];
            const double* b_row = y.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) out_row[j] += aip * b_row[j];
        }
    }
    const bool track = tracking({&a, &b});
    Tensor result({m, n}, std::move(out), track);
    if (track) {
        active_tape()->record("matmul", {a, b}, result, [a, b, result, m, k, n] {
            auto g = result.grad();
            auto x = a.data(), y = b.data();
            if (a.requires_grad()) {
                auto ga = grad_of(a);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * y[p * n + j];
                        ga[i * k + p] += acc;
                    }
            }
            if (b.requires_grad()) {
                auto gb = grad_of(b);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = x[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                    }
            }
        });
    }
    return result;
}

Tensor matvec(const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.numel()) {
        throw DimensionError(fmt::format("matvec: cannot multiply {} by {}", shape_to_string(m.shape()),
                                         shape_to_string(v.shape())));
    }
    const std::size_t r = m.rows(), c = m.cols();
    std::vector<double> out(r, 0.0);
    auto w = m.data(), x = v.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i] += w[i * c + j] * x[j];
    const bool track = tracking({&m, &v});
    Tensor result({r}, std::move(out), track);
    if (track) {
        active_tape()->record("matvec", {m, v}, result, [m, v, result, r, c] {
            auto g = result.grad();
            auto w = m.data(), x = v.data();
            if (m.requires_grad()) {
                auto gm = grad_of(m);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gm[i * c + j] += g[i] * x[j];
            }
            if (v.requires_grad()) {
                auto gv = grad_of(v);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gv[j] += g[i] * w[i * c + j];
            }
        });
    }
    return result;
}

Tensor dot(const Tensor& a, const Tensor& b) {
    require_rank("dot", a, 1);
    require_same_shape("dot", a, b);
    auto x = a.data(), y = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    const bool track = tracking({&a, &b});
    Tensor result({}, {acc}, track);
    if (track) {
        active_tape()->record("dot", {a, b}, result, [a, b, result] {
            const double g = result.grad()[0];
            auto x = a.data(), y = b.data();
            if (a.requires_grad()) {
                auto ga = grad_of(a);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * y[i];
            }
            if (b.requires_grad()) {
                auto gb = grad_of(b);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * x[i];
            }
        });
    }
    return result;
}

Tensor transpose(const Tensor& x) {
    require_rank("transpose", x, 2);
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(m * n);
    auto v = x.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
    const bool track = tracking({&x});
    Tensor result({n, m}, std::move(out), track);
    if (track) {
        active_tape()->record("transpose", {x}, result, [x, result, m, n] {
            auto g = result.grad();
            auto gx = grad_of(x);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j * m + i];
        });
    }
    return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError(fmt::format("reshape: cannot view {} as {}", shape_to_string(x.shape()),
                                         shape_to_string(shape)));
    }
    const bool track = tracking({&x});
    Tensor result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), track);
    if (track) {
        active_tape()->record("reshape", {x}, result, [x, result] {
            auto g = result.grad();
            auto gx = grad_of(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    }
    return result;
}

Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids) {
    require_rank("gather_rows", table, 2);
    if (ids.empty()) throw DimensionError("gather_rows: empty id list");
    const std::size_t v = table.rows(), d = table.cols();
    std::vector<double> out(ids.size() * d);
    auto t = table.data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
            throw DimensionError(fmt::format("gather_rows: id {} outside table of {} rows", ids[i], v));
        }
        std::copy_n(t.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    const bool track = tracking({&table});
    Tensor result({ids.size(), d}, std::move(out), track);
    if (track) {
        std::vector<std::int32_t> saved(ids.begin(), ids.end());
        active_tape()->record("gather_rows", {table}, result, [table, result, saved = std::move(saved), d] {
            auto g = result.grad();
            auto gt = grad_of(table);
            for (std::size_t i = 0; i < saved.size(); ++i)
                for (std::size_t j = 0; j < d; ++j) gt[static_cast<std::size_t>(saved[i]) * d + j] += g[i * d + j];
        });
    }
    return result;
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
    require_rank("slice_rows", x, 2);
    const std::size_t n = x.cols();
    if (count == 0 || start + count > x.rows()) {
        throw DimensionError(fmt::format("slice_rows: rows [{}, {}) outside {}", start, start + count,
                                         shape_to_string(x.shape())));
    }
    auto v = x.data();
    std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(start * n),
                            v.begin() + static_cast<std::ptrdiff_t>((start + count) * n));
    const bool track = tracking({&x});
    Tensor result({count, n}, std::move(out), track);
    if (track) {
        active_tape()->record("slice_rows", {x}, result, [x, result, start, n] {
            auto g = result.grad();
            auto gx = grad_of(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[start * n + i] += g[i];
        });
    }
    return result;
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
    require_rank("slice_cols", x, 2);
    const std::size_t m = x.rows(), n = x.cols();
    if (count == 0 || start + count > n) {
        throw DimensionError(fmt::format("slice_cols: cols [{}, {}) outside {}", start, start + count,
                                         shape_to_string(x.shape())));
    }
    auto v = x.data();
    std::vector<double> out(m * count);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) out[i * count + j] = v[i * n + start + j];
    const bool track = tracking({&x});
    Tensor result({m, count}, std::move(out), track);
    if (track) {
        active_tape()->record("slice_cols", {x}, result, [x, result, start, count, m, n] {
            auto g = result.grad();
            auto gx = grad_of(x);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < count; ++j) gx[i * n + start + j] += g[i * count + j];
        });
    }
    return result;
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t m = parts.front().rows();
    std::size_t n = 0;
    for (const auto& p : parts) {
        if (p.rows() != m) {
            throw DimensionError(fmt::format("concat_cols: row mismatch {} vs {}", shape_to_string(parts.front().shape()),
                                             shape_to_string(p.shape())));
        }
        n += p.cols();
    }
    std::vector<double> out(m * n);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        auto v = p.data();
        const std::size_t c = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) out[i * n + offset + j] = v[i * c + j];
        offset += c;
    }
    const bool track = tracking(parts);
    Tensor result({m, n}, std::move(out), track);
    if (track) {
        std::vector<Tensor> inputs(parts.begin(), parts.end());
        active_tape()->record("concat_cols", inputs, result, [inputs, result, m, n] {
            auto g = result.grad();
            std::size_t offset = 0;
            for (const auto& p : inputs) {
                const std::size_t c = p.cols();
                if (p.requires_grad()) {
                    auto gp = grad_of(p);
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * n + offset + j];
                }
                offset += c;
            }
        });
    }
    return result;
}

Tensor row(const Tensor& x, std::size_t index) {
    require_rank("row", x, 2);
    if (index >= x.rows()) {
        throw DimensionError(fmt::format("row: index {} outside {}", index, shape_to_string(x.shape())));
    }
    return reshape(slice_rows(x, index, 1), {x.cols()});
}

Tensor stack(std::span<const Tensor> scalars) {
    if (scalars.empty()) throw DimensionError("stack: no inputs");
    std::vector<double> out;
    out.reserve(scalars.size());
    for (const auto& s : scalars) out.push_back(s.item());
    const bool track = tracking(scalars);
    Tensor result({scalars.size()}, std::move(out), track);
    if (track) {
        std::vector<Tensor> inputs(scalars.begin(), scalars.end());
        active_tape()->record("stack", inputs, result, [inputs, result] {
            auto g = result.grad();
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                if (inputs[i].requires_grad()) grad_of(inputs[i])[0] += g[i];
            }
        });
    }
    return result;
}

Tensor element(const Tensor& x, std::size_t index) {
    if (index >= x.numel()) {
        throw DimensionError(fmt::format("element: index {} outside {}", index, shape_to_string(x.shape())));
    }
    const bool track = tracking({&x});
    Tensor result({}, {x.value(index)}, track);
    if (track) {
        active_tape()->record("element", {x}, result, [x, result, index] { grad_of(x)[index] += result.grad()[0]; });
    }
    return result;
}

namespace {

// y = softmax over each row; masked columns are excluded entirely.
void softmax_rows_forward(std::span<const double> in, std::span<double> out, std::size_t m, std::size_t n,
                          std::span<const std::int32_t> mask) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* x = in.data() + i * n;
        double* y = out.data() + i * n;
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (mask.empty() || mask[j] != 0) hi = std::max(hi, x[j]);
        if (!std::isfinite(hi)) throw NumericError("softmax: every position in a row is masked");
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = (mask.empty() || mask[j] != 0) ? std::exp(x[j] - hi) : 0.0;
            total += y[j];
        }
        for (std::size_t j = 0; j < n; ++j) y[j] /= total;
    }
}

void softmax_rows_backward(std::span<const double> y, std::span<const double> g, std::span<double> gx, std::size_t m,
                           std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < n; ++j) inner += g[i * n + j] * y[i * n + j];
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - inner);
    }
}

} // namespace

Tensor softmax(const Tensor& logits) {
    require_rank("softmax", logits, 1);
    require_finite("softmax", logits.data());
    const std::size_t n = logits.numel();
    std::vector<double> out(n);
    softmax_rows_forward(logits.data(), out, 1, n, {});
    const bool track = tracking({&logits});
    Tensor result({n}, std::move(out), track);
    if (track) {
        active_tape()->record("softmax", {logits}, result, [logits, result, n] {
            softmax_rows_backward(result.data(), result.grad(), grad_of(logits), 1, n);
        });
    }
    return result;
}

Tensor softmax_rows(const Tensor& x, std::span<const std::int32_t> key_mask) {
    require_rank("softmax_rows", x, 2);
    require_finite("softmax_rows", x.data());
    const std::size_t m = x.rows(), n = x.cols();
    if (!key_mask.empty() && key_mask.size() != n) {
        throw DimensionError(fmt::format("softmax_rows: mask of length {} for {}", key_mask.size(),
                                         shape_to_string(x.shape())));
    }
    std::vector<double> out(m * n);
    softmax_rows_forward(x.data(), out, m, n, key_mask);
    const bool track = tracking({&x});
    Tensor result({m, n}, std::move(out), track);
    if (track) {
        active_tape()->record("softmax_rows", {x}, result, [x, result, m, n] {
            softmax_rows_backward(result.data(), result.grad(), grad_of(x), m, n);
        });
    }
    return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_rank("layer_norm", gain, 1);
    require_same_shape("layer_norm", gain, bias);
    const std::size_t d = gain.numel();
    if (x.rank() == 0 || x.shape().back() != d) {
        throw DimensionError(fmt::format("layer_norm: input {} does not end in dimension {}", shape_to_string(x.shape()), d));
    }
    const std::size_t m = x.numel() / d;
    auto in = x.data(), gw = gain.data(), bw = bias.data();
    std::vector<double> out(x.numel()), normed(x.numel()), inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* xr = in.data() + i * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(d);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            normed[i * d + j] = (xr[j] - mu) * inv_std[i];
            out[i * d + j] = normed[i * d + j] * gw[j] + bw[j];
        }
    }
    const bool track = tracking({&x, &gain, &bias});
    Tensor result(x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record(
            "layer_norm", {x, gain, bias}, result,
            [x, gain, bias, result, normed = std::move(normed), inv_std = std::move(inv_std), m, d] {
                auto g = result.grad();
                auto gw = gain.data();
                if (gain.requires_grad()) {
                    auto gg = grad_of(gain);
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * normed[i * d + j];
                }
                if (bias.requires_grad()) {
                    auto gb = grad_of(bias);
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
                }
                if (x.requires_grad()) {
                    auto gx = grad_of(x);
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t i = 0; i < m; ++i) {
                        double mean_g = 0.0, mean_gx = 0.0;
                        for (std::size_t j = 0; j < d; ++j) {
                            const double gn = g[i * d + j] * gw[j];
                            mean_g += gn;
                            mean_gx += gn * normed[i * d + j];
                        }
                        mean_g *= inv_d;
                        mean_gx *= inv_d;
                        for (std::size_t j = 0; j < d; ++j) {
                            const double gn = g[i * d + j] * gw[j];
                            gx[i * d + j] += inv_std[i] * (gn - mean_g - normed[i * d + j] * mean_gx);
                        }
                    }
                }
            });
    }
    return result;
}

Tensor gelu(const Tensor& x) {
    auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double v = in[i];
        out[i] = 0.5 * v * (1.0 + std::tanh(kGeluScale * (v + kGeluCubic * v * v * v)));
    }
    const bool track = tracking({&x});
    Tensor result(x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record("gelu", {x}, result, [x, result] {
            auto g = result.grad();
            auto in = x.data();
            auto gx = grad_of(x);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = in[i];
                const double t = std::tanh(kGeluScale * (v + kGeluCubic * v * v * v));
                const double dt = (1.0 - t * t) * kGeluScale * (1.0 + 3.0 * kGeluCubic * v * v);
                gx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
            }
        });
    }
    return result;
}

Tensor log(const Tensor& x) {
    auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!(in[i] > 0.0)) throw NumericError(fmt::format("log: non-positive input {}", in[i]));
        out[i] = std::log(in[i]);
    }
    const bool track = tracking({&x});
    Tensor result(x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record("log", {x}, result, [x, result] {
            auto g = result.grad();
            auto in = x.data();
            auto gx = grad_of(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / in[i];
        });
    }
    return result;
}

Tensor clamp_min(const Tensor& x, double floor) {
    auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::max(in[i], floor);
    const bool track = tracking({&x});
    Tensor result(x.shape(), std::move(out), track);
    if (track) {
        active_tape()->record("clamp_min", {x}, result, [x, result, floor] {
            auto g = result.grad();
            auto in = x.data();
            auto gx = grad_of(x);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (in[i] >= floor) gx[i] += g[i];
        });
    }
    return result;
}

Tensor sum(const Tensor& x) {
    auto in = x.data();
    const double total = std::accumulate(in.begin(), in.end(), 0.0);
    const bool track = tracking({&x});
    Tensor result({}, {total}, track);
    if (track) {
        active_tape()->record("sum", {x}, result, [x, result] {
            const double g = result.grad()[0];
            for (auto& v : grad_of(x)) v += g;
        });
    }
    return result;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor masked_mean_rows(const Tensor& x, std::span<const std::int32_t> mask) {
    require_rank("masked_mean_rows", x, 2);
    const std::size_t m = x.rows(), d = x.cols();
    if (mask.size() != m) {
        throw DimensionError(fmt::format("masked_mean_rows: mask of length {} for {}", mask.size(),
                                         shape_to_string(x.shape())));
    }
    const auto real = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto v) { return v != 0; }));
    if (real == 0) throw InputError("mean pooling over a mask with no real positions");
    const double inv = 1.0 / static_cast<double>(real);
    auto in = x.data();
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (mask[i] == 0) continue;
        for (std::size_t j = 0; j < d; ++j) out[j] += in[i * d + j];
    }
    for (auto& v : out) v *= inv;
    const bool track = tracking({&x});
    Tensor result({d}, std::move(out), track);
    if (track) {
        std::vector<std::int32_t> saved(mask.begin(), mask.end());
        active_tape()->record("masked_mean_rows", {x}, result, [x, result, saved = std::move(saved), m, d, inv] {
            auto g = result.grad();
            auto gx = grad_of(x);
            for (std::size_t i = 0; i < m; ++i) {
                if (saved[i] == 0) continue;
                for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[j] * inv;
            }
        });
    }
    return result;
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ContractError(fmt::format("dropout rate {} outside [0, 1)", rate));
    if (rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> keep(x.numel());
    for (auto& k : keep) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        k = u < rate ? 0.0 : keep_scale;
    }
    return mul(x, Tensor(x.shape(), std::move(keep)));
}

} // namespace comve
