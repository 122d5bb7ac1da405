#pragma once

#include "comve/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace comve {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Per-parameter first/second moment buffers, allocated on the first step.
struct AdamWState {
    AdamWConfig hyper;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::size_t step = 0;

    explicit AdamWState(AdamWConfig config = {}) : hyper(config) {}
};

// One decoupled-weight-decay Adam update using each tensor's accumulated
// gradient (a tensor with no gradient is treated as having zero gradient):
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
void adamw_step(std::span<const NamedTensor> params, AdamWState& state);

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::span<const NamedTensor> params, double max_norm);

void zero_grads(std::span<const NamedTensor> params);

struct TrainConfig {
    std::size_t batch_size = 32;
    // desk-scale default; pretrained-encoder fine-tuning uses 2e-5
    double lr = 1e-3;
    double eps = 1e-8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    std::size_t epochs = 20;
    std::uint64_t seed = 13;
    // 0 disables clipping.
    double grad_clip_norm = 1.0;

    void validate() const;
    AdamWConfig optimizer() const { return {lr, beta1, beta2, eps, weight_decay}; }
};

struct EpochMetrics {
    double mean_loss = 0.0;
    double train_accuracy = 0.0;
};

// Owns the optimizer state and the shuffling/dropout RNG across epochs.
class Trainer {
public:
    Trainer(Model& model, TrainConfig config);

    // Seeded shuffle, then per batch: forward every candidate through the
    // shared encoder, average the loss over the batch, backward, clip,
    // AdamW step, zero grads. NumericError is rethrown with the step index.
    EpochMetrics train_epoch(std::span<const ScoringItem> data);

    const AdamWState& optimizer() const noexcept { return state_; }
    std::size_t epochs_done() const noexcept { return epochs_done_; }

private:
    Model& model_;
    TrainConfig config_;
    AdamWState state_;
    std::mt19937_64 rng_;
    std::size_t epochs_done_ = 0;
};

// Fraction of items whose predicted candidate equals the gold one.
// Does not touch parameters or gradients. Throws InputError on empty data.
double evaluate(const Model& model, std::span<const ScoringItem> data);

std::vector<ItemResult> predict(const Model& model, std::span<const ScoringItem> data);

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double dev_accuracy = 0.0;
};

// "epoch\ttrain_loss\ttrain_acc\tdev_acc"
std::string format_log_line(const EpochRecord& record);
std::string format_accuracy(double accuracy);

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_dev_accuracy = 0.0;
};

// Runs cfg.epochs epochs with a dev evaluation after each; writes one log line
// per epoch to `log` (if given). On return the model holds the parameters of
// the epoch with the highest dev accuracy (earliest on ties). When
// stop_at_dev_accuracy is set, training ends after the first epoch reaching it.
TrainingHistory fit(Model& model, std::span<const ScoringItem> train, std::span<const ScoringItem> dev,
                    const TrainConfig& config, std::ostream* log = nullptr,
                    std::optional<double> stop_at_dev_accuracy = std::nullopt);

} // namespace comve
