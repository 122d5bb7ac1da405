#include "comve/selfcheck.hpp"

#include "comve/checkpoint.hpp"
#include "comve/errors.hpp"
#include "comve/model.hpp"
#include "comve/ops.hpp"
#include "comve/report.hpp"
#include "comve/synthetic.hpp"
#include "comve/training.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>

namespace comve {

namespace {

Model tiny_model(Task task, HeadKind head, std::size_t n_examples, std::uint64_t seed, ExampleSet* examples_out) {
    const auto corpus = generate_synthetic(seed, n_examples);
    auto examples = corpus.task_set(task);
    const auto sentences = examples.sentences();
    ModelSpec spec;
    spec.task = task;
    spec.head = head;
    spec.encoder.d_model = 8;
    spec.encoder.n_heads = 2;
    spec.encoder.n_layers = 1;
    spec.encoder.d_ff = 16;
    spec.encoder.max_sequence_length = task == Task::A ? 12 : 20;
    spec.encoder.pooling = Pooling::Mean;
    auto model = Model::create(spec, build_vocab(sentences, 200), seed);
    if (examples_out != nullptr) *examples_out = std::move(examples);
    return model;
}

// Default init leaves deep gradients near 1e-7, where finite differences are
// mostly roundoff; spreading the parameters makes the comparison meaningful.
void spread_parameters(const Model& model, double stddev, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    for (const auto& p : model.parameters()) {
        Tensor t = p.tensor;
        for (auto& v : t.mutable_data()) v += normal(rng);
    }
}

double item_loss(const Model& model, const ScoringItem& item) { return run_item(model, item, true).loss.item(); }

// Largest per-tensor relative error ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-6).
// The floor covers tensors whose true gradient is exactly zero (biases that
// cancel in the softmax).
double gradient_check(const Model& model, const ScoringItem& item) {
    const auto params = model.parameters();
    zero_grads(params);
    {
        Tape tape;
        Tensor loss;
        {
            TapeGuard guard(tape);
            loss = run_item(model, item, true).loss;
        }
        backward(loss, tape);
    }
    const double h = 1e-5;
    double worst = 0.0;
    for (const auto& p : params) {
        Tensor t = p.tensor;
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        auto values = t.mutable_data();
        double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double saved = values[k];
            values[k] = saved + h;
            const double plus = item_loss(model, item);
            values[k] = saved - h;
            const double minus = item_loss(model, item);
            values[k] = saved;
            const double numeric = (plus - minus) / (2.0 * h);
            const double a = analytic.empty() ? 0.0 : analytic[k];
            diff_sq += (a - numeric) * (a - numeric);
            a_sq += a * a;
            n_sq += numeric * numeric;
        }
        const double denom = std::max({std::sqrt(a_sq), std::sqrt(n_sq), 1e-6});
        worst = std::max(worst, std::sqrt(diff_sq) / denom);
    }
    zero_grads(params);
    return worst;
}

CheckResult check(std::string name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
        auto [ok, detail] = body();
        return {std::move(name), ok, std::move(detail)};
    } catch (const std::exception& e) {
        return {std::move(name), false, fmt::format("threw: {}", e.what())};
    }
}

CheckResult op_gradient_check() {
    return check("op_gradients", [] {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto random = [&](Shape shape) {
            std::vector<double> v(shape_numel(shape));
            for (auto& x : v) x = normal(rng);
            return Tensor(std::move(shape), std::move(v), true);
        };
        Tensor x = random({3, 4});
        Tensor w = random({4, 4});
        Tensor gain = random({4});
        Tensor bias = random({4});
        const std::vector<std::int32_t> key_mask{1, 1, 1, 0};
        const std::vector<std::int32_t> row_mask{1, 1, 0};
        auto forward = [&] {
            auto y = layer_norm(matmul(x, w), gain, bias);
            y = gelu(y);
            y = softmax_rows(y, key_mask);
            auto pooled = masked_mean_rows(y, row_mask);
            return sum(mul(pooled, pooled));
        };
        Tape tape;
        Tensor loss;
        {
            TapeGuard guard(tape);
            loss = forward();
        }
        backward(loss, tape);
        double worst = 0.0;
        for (Tensor t : {x, w, gain, bias}) {
            const std::vector<double> analytic(t.grad().begin(), t.grad().end());
            auto values = t.mutable_data();
            for (std::size_t k = 0; k < values.size(); ++k) {
                const double saved = values[k];
                values[k] = saved + 1e-6;
                const double plus = forward().item();
                values[k] = saved - 1e-6;
                const double minus = forward().item();
                values[k] = saved;
                const double numeric = (plus - minus) / 2e-6;
                worst = std::max(worst, std::abs(numeric - analytic[k]) / std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6}));
            }
        }
        return std::pair{worst <= 1e-4, fmt::format("max rel err {:.2e}", worst)};
    });
}

CheckResult siamese_gradient_check(std::size_t n_candidates) {
    return check(fmt::format("siamese_gradient_n{}", n_candidates), [n_candidates] {
        ExampleSet examples;
        const auto model = tiny_model(n_candidates == 2 ? Task::A : Task::B, HeadKind::Siamese, 4, 3, &examples);
        spread_parameters(model, 0.3, 17);
        const auto item = model.item(examples, 0);
        const double err = gradient_check(model, item);
        return std::pair{err <= 1e-4, fmt::format("max rel err {:.2e}", err)};
    });
}

CheckResult binary_gradient_check() {
    return check("binary_gradient", [] {
        ExampleSet examples;
        const auto model = tiny_model(Task::A, HeadKind::Binary, 4, 4, &examples);
        spread_parameters(model, 0.3, 18);
        const double err = gradient_check(model, model.item(examples, 1));
        return std::pair{err <= 1e-4, fmt::format("max rel err {:.2e}", err)};
    });
}

CheckResult softmax_normalization_check() {
    return check("softmax_normalization", [] {
        ExampleSet examples;
        const auto model = tiny_model(Task::B, HeadKind::Siamese, 20, 6, &examples);
        double worst = 0.0;
        for (const auto& item : model.items(examples)) {
            const auto r = run_item(model, item, false);
            const double total = std::accumulate(r.candidate_scores.begin(), r.candidate_scores.end(), 0.0);
            worst = std::max(worst, std::abs(total - 1.0));
        }
        return std::pair{worst <= 1e-9, fmt::format("max |sum - 1| {:.2e}", worst)};
    });
}

CheckResult identical_candidates_check() {
    return check("identical_candidates_uniform", [] {
        ExampleSet examples;
        const auto model = tiny_model(Task::B, HeadKind::Siamese, 2, 7, &examples);
        auto item = model.item(examples, 0);
        for (auto& input : item.inputs) input = item.inputs.front();
        const auto r = run_item(model, item, false);
        double worst = 0.0;
        for (double p : r.candidate_scores) worst = std::max(worst, std::abs(p - 1.0 / 3.0));
        return std::pair{worst <= 1e-12 && r.predicted == 0, fmt::format("max |p - 1/3| {:.2e}", worst)};
    });
}

CheckResult pair_logistic_check() {
    return check("pair_logistic_of_gap", [] {
        ExampleSet examples;
        const auto model = tiny_model(Task::A, HeadKind::Siamese, 2, 8, &examples);
        const auto item = model.item(examples, 0);
        const auto dist = score_candidates(model.encoder, model.scorer, item.inputs);
        const double gap = dist.logits.value(0) - dist.logits.value(1);
        const double expected = 1.0 / (1.0 + std::exp(-gap));
        const double err = std::abs(dist.values[0] - expected);
        return std::pair{err <= 1e-12, fmt::format("|p0 - sigmoid(gap)| {:.2e}", err)};
    });
}

CheckResult permutation_check() {
    return check("permutation_equivariance", [] {
        ExampleSet examples;
        const auto model = tiny_model(Task::B, HeadKind::Siamese, 20, 9, &examples);
        const std::vector<std::size_t> perm{2, 0, 1};
        double worst = 0.0;
        bool index_ok = true;
        for (const auto& item : model.items(examples)) {
            auto permuted = item;
            for (std::size_t j = 0; j < perm.size(); ++j) permuted.inputs[j] = item.inputs[perm[j]];
            const auto a = run_item(model, item, false);
            const auto b = run_item(model, permuted, false);
            for (std::size_t j = 0; j < perm.size(); ++j) {
                worst = std::max(worst, std::abs(b.candidate_scores[j] - a.candidate_scores[perm[j]]));
            }
            if (perm[b.predicted] != a.predicted) index_ok = false;
        }
        return std::pair{worst <= 1e-9 && index_ok, fmt::format("max prob diff {:.2e}", worst)};
    });
}

CheckResult padding_invariance_check() {
    return check("padding_invariance", [] {
        ExampleSet examples;
        auto model = tiny_model(Task::A, HeadKind::Siamese, 2, 10, &examples);
        const auto& sentence = examples.validation.front().sent0;
        const auto short_seq = encode(model.vocab, sentence, 12);
        const auto long_seq = encode(model.vocab, sentence, 24);
        model.encoder.config.max_sequence_length = 24;
        model.encoder.position_embedding = Tensor::zeros({24, model.encoder.config.d_model});
        std::mt19937_64 rng(1);
        std::normal_distribution<double> normal(0.0, 0.02);
        for (auto& v : model.encoder.position_embedding.mutable_data()) v = normal(rng);
        const auto a = encode(model.encoder, short_seq);
        const auto b = encode(model.encoder, long_seq);
        double worst = 0.0;
        for (std::size_t r = 0; r < short_seq.real_length(); ++r)
            for (std::size_t c = 0; c < a.cols(); ++c) worst = std::max(worst, std::abs(a.at(r, c) - b.at(r, c)));
        return std::pair{worst <= 1e-12, fmt::format("max diff at real positions {:.2e}", worst)};
    });
}

CheckResult siamese_fallacy_check() {
    return check("siamese_fallacy_zero", [] {
        ExampleSet examples;
        const auto model = tiny_model(Task::A, HeadKind::Siamese, 30, 11, &examples);
        std::vector<SentenceLabel> labels;
        for (const auto& item : model.items(examples)) {
            const auto r = run_item(model, item, false);
            for (std::size_t j = 0; j < r.input_labels.size(); ++j) {
                labels.push_back({item.id, item.candidate_of_input[j], r.input_labels[j]});
            }
        }
        const double rate = fallacy_rate(labels);
        return std::pair{rate == 0.0, fmt::format("fallacy rate {}", rate)};
    });
}

CheckResult evaluate_side_effect_check() {
    return check("evaluate_side_effect_free", [] {
        ExampleSet examples;
        const auto model = tiny_model(Task::A, HeadKind::Siamese, 16, 12, &examples);
        const auto before = parameter_checksum(model);
        evaluate(model, model.items(examples));
        const auto after = parameter_checksum(model);
        return std::pair{before == after, fmt::format("checksum {:016x}", after)};
    });
}

CheckResult adamw_oracle_check() {
    return check("adamw_scalar_oracle", [] {
        const AdamWConfig hyper{2e-5, 0.9, 0.999, 1e-8, 0.01};
        Tensor theta = Tensor::vector({0.5}, true);
        const std::vector<NamedTensor> params{{"theta", theta}};
        AdamWState state(hyper);
        const double grads[3] = {0.3, -1.2, 0.05};
        double t_ref = 0.5, m = 0.0, v = 0.0;
        double worst = 0.0;
        for (int s = 0; s < 3; ++s) {
            theta.mutable_grad()[0] = grads[s];
            adamw_step(params, state);
            m = 0.9 * m + 0.1 * grads[s];
            v = 0.999 * v + 0.001 * grads[s] * grads[s];
            const double mh = m / (1.0 - std::pow(0.9, s + 1));
            const double vh = v / (1.0 - std::pow(0.999, s + 1));
            t_ref -= 2e-5 * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * t_ref);
            worst = std::max(worst, std::abs(theta.value(0) - t_ref));
        }
        return std::pair{worst <= 1e-12, fmt::format("max |diff| {:.2e}", worst)};
    });
}

CheckResult adamw_sign_sgd_check() {
    return check("adamw_sign_sgd_reduction", [] {
        const AdamWConfig hyper{0.1, 0.0, 0.0, 1e-8, 0.0};
        Tensor theta = Tensor::vector({1.0, -2.0, 0.25}, true);
        const std::vector<NamedTensor> params{{"theta", theta}};
        AdamWState state(hyper);
        const std::vector<double> g{0.5, -3.0, 1e-3};
        std::copy(g.begin(), g.end(), theta.mutable_grad().begin());
        const std::vector<double> start{1.0, -2.0, 0.25};
        adamw_step(params, state);
        double worst = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double expected = start[i] - 0.1 * g[i] / (std::abs(g[i]) + 1e-8);
            worst = std::max(worst, std::abs(theta.value(i) - expected));
        }
        return std::pair{worst <= 1e-12, fmt::format("max |diff| {:.2e}", worst)};
    });
}

CheckResult weight_sharing_check() {
    return check("weight_sharing", [] {
        ExampleSet examples;
        const auto model = tiny_model(Task::B, HeadKind::Siamese, 2, 13, &examples);
        const auto item = model.item(examples, 0);
        const auto params = model.encoder.parameters();
        auto grads_of = [&](const std::function<Tensor()>& fn) {
            zero_grads(model.parameters());
            Tape tape;
            Tensor loss;
            {
                TapeGuard guard(tape);
                loss = fn();
            }
            backward(loss, tape);
            std::vector<double> flat;
            for (const auto& p : params) {
                if (p.tensor.has_grad()) flat.insert(flat.end(), p.tensor.grad().begin(), p.tensor.grad().end());
                else flat.insert(flat.end(), p.tensor.numel(), 0.0);
            }
            return flat;
        };
        // d(sum of logits)/d(encoder) must equal the sum of per-branch gradients.
        const auto joint = grads_of([&] { return sum(score_candidates(model.encoder, model.scorer, item.inputs).logits); });
        std::vector<double> summed(joint.size(), 0.0);
        for (const auto& input : item.inputs) {
            const auto single = grads_of([&] {
                return add(dot(model.scorer.weight, encode_pooled(model.encoder, input)), model.scorer.bias);
            });
            for (std::size_t k = 0; k < summed.size(); ++k) summed[k] += single[k];
        }
        zero_grads(model.parameters());
        double worst = 0.0;
        for (std::size_t k = 0; k < joint.size(); ++k) worst = std::max(worst, std::abs(joint[k] - summed[k]));
        return std::pair{worst <= 1e-8, fmt::format("max |diff| {:.2e}", worst)};
    });
}

} // namespace

std::vector<CheckResult> run_selfcheck(std::ostream& out) {
    std::vector<std::function<CheckResult()>> checks{
        op_gradient_check,
        [] { return siamese_gradient_check(2); },
        [] { return siamese_gradient_check(3); },
        binary_gradient_check,
        softmax_normalization_check,
        identical_candidates_check,
        pair_logistic_check,
        permutation_check,
        weight_sharing_check,
        padding_invariance_check,
        siamese_fallacy_check,
        evaluate_side_effect_check,
        adamw_oracle_check,
        adamw_sign_sgd_check,
    };
    std::vector<CheckResult> results;
    for (const auto& run : checks) {
        results.push_back(run());
        const auto& r = results.back();
        out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    }
    return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

} // namespace comve
