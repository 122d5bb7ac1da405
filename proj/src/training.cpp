#include "comve/training.hpp"

#include "comve/errors.hpp"
#include "comve/ops.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <ostream>

namespace comve {

void adamw_step(std::span<const NamedTensor> params, AdamWState& state) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.tensor.numel(), 0.0);
            state.v.emplace_back(p.tensor.numel(), 0.0);
        }
    }
    if (state.m.size() != params.size()) {
        throw ContractError(fmt::format("adamw_step: state tracks {} tensors, got {}", state.m.size(), params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.m[i].size() != params[i].tensor.numel()) {
            throw ContractError(fmt::format("adamw_step: moment buffer of {} values for '{}' {}", state.m[i].size(),
                                            params[i].name, shape_to_string(params[i].tensor.shape())));
        }
    }

    ++state.step;
    const auto& h = state.hyper;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(h.beta1, t);
    const double correction2 = 1.0 - std::pow(h.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor theta = params[i].tensor;
        auto values = theta.mutable_data();
        const auto grad = theta.grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double g = grad.empty() ? 0.0 : grad[k];
            m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g;
            v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g * g;
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            values[k] -= h.lr * (m_hat / (std::sqrt(v_hat) + h.eps) + h.weight_decay * values[k]);
        }
    }
}

double clip_grad_norm(std::span<const NamedTensor> params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p.tensor.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
    if (max_norm > 0.0 && norm > max_norm) {
        const double factor = max_norm / norm;
        for (const auto& p : params) {
            Tensor t = p.tensor;
            if (!t.has_grad()) continue;
            for (auto& g : t.mutable_grad()) g *= factor;
        }
    }
    return norm;
}

void zero_grads(std::span<const NamedTensor> params) {
    for (const auto& p : params) {
        Tensor t = p.tensor;
        t.zero_grad();
    }
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(lr >= 0.0)) throw ConfigError(fmt::format("lr must be non-negative, got {}", lr));
    if (!(eps > 0.0)) throw ConfigError(fmt::format("eps must be positive, got {}", eps));
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError(fmt::format("beta1 {} outside [0, 1)", beta1));
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError(fmt::format("beta2 {} outside [0, 1)", beta2));
    if (!(weight_decay >= 0.0)) throw ConfigError(fmt::format("weight_decay must be non-negative, got {}", weight_decay));
    if (!(grad_clip_norm >= 0.0)) throw ConfigError(fmt::format("grad_clip_norm must be non-negative, got {}", grad_clip_norm));
}

Trainer::Trainer(Model& model, TrainConfig config)
    : model_(model), config_(config), state_(config.optimizer()), rng_(config.seed) {
    config_.validate();
}

EpochMetrics Trainer::train_epoch(std::span<const ScoringItem> data) {
    if (data.empty()) throw InputError("train_epoch needs at least one example");
    const auto params = model_.parameters();

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_() % i]);

    const ForwardContext ctx{model_.spec.encoder.dropout, &rng_};
    double loss_total = 0.0;
    std::size_t correct = 0;
    std::size_t step = 0;
    zero_grads(params);
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size, ++step) {
        const std::size_t end = std::min(order.size(), start + config_.batch_size);
        const double inv_batch = 1.0 / static_cast<double>(end - start);
        try {
            for (std::size_t k = start; k < end; ++k) {
                const auto& item = data[order[k]];
                Tape tape;
                ItemResult result;
                Tensor scaled;
                {
                    TapeGuard guard(tape);
                    result = run_item(model_, item, true, ctx);
                    scaled = scale(result.loss, inv_batch);
                }
                const double loss = result.loss.item();
                if (!std::isfinite(loss)) throw NumericError(fmt::format("loss is {} on example '{}'", loss, item.id));
                loss_total += loss;
                if (result.predicted == item.gold) ++correct;
                backward(scaled, tape);
            }
            clip_grad_norm(params, config_.grad_clip_norm);
            adamw_step(params, state_);
            zero_grads(params);
        } catch (const NumericError& e) {
            throw NumericError(fmt::format("epoch {} step {}: {}", epochs_done_ + 1, step, e.what()));
        }
    }
    ++epochs_done_;
    return {loss_total / static_cast<double>(data.size()),
            static_cast<double>(correct) / static_cast<double>(data.size())};
}

double evaluate(const Model& model, std::span<const ScoringItem> data) {
    if (data.empty()) throw InputError("cannot evaluate on an empty dataset");
    std::size_t correct = 0;
    for (const auto& item : data) {
        if (run_item(model, item, false).predicted == item.gold) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<ItemResult> predict(const Model& model, std::span<const ScoringItem> data) {
    std::vector<ItemResult> out;
    out.reserve(data.size());
    for (const auto& item : data) out.push_back(run_item(model, item, false));
    return out;
}

std::string format_accuracy(double accuracy) { return fmt::format("{:.6f}", accuracy); }

std::string format_log_line(const EpochRecord& r) {
    return fmt::format("{}\t{:.6f}\t{}\t{}", r.epoch, r.train_loss, format_accuracy(r.train_accuracy),
                       format_accuracy(r.dev_accuracy));
}

TrainingHistory fit(Model& model, std::span<const ScoringItem> train, std::span<const ScoringItem> dev,
                    const TrainConfig& config, std::ostream* log, std::optional<double> stop_at_dev_accuracy) {
    Trainer trainer(model, config);
    TrainingHistory history;
    std::vector<std::vector<double>> best;
    auto snapshot = [&] {
        best.clear();
        for (const auto& p : model.parameters()) best.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    };
    for (std::size_t e = 1; e <= config.epochs; ++e) {
        const auto metrics = trainer.train_epoch(train);
        const double dev_acc = evaluate(model, dev.empty() ? train : dev);
        EpochRecord record{e, metrics.mean_loss, metrics.train_accuracy, dev_acc};
        history.epochs.push_back(record);
        if (log != nullptr) *log << format_log_line(record) << '\n' << std::flush;
        if (history.best_epoch == 0 || dev_acc > history.best_dev_accuracy) {
            history.best_epoch = e;
            history.best_dev_accuracy = dev_acc;
            snapshot();
        }
        if (stop_at_dev_accuracy && dev_acc >= *stop_at_dev_accuracy) break;
    }
    if (!best.empty()) {
        auto params = model.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            std::copy(best[i].begin(), best[i].end(), params[i].tensor.mutable_data().begin());
        }
    }
    return history;
}

} // namespace comve
