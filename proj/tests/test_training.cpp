#include "comve/checkpoint.hpp"
#include "comve/errors.hpp"
#include "comve/ops.hpp"
#include "comve/synthetic.hpp"
#include "comve/training.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace comve;

namespace {

struct Fixture {
    ExampleSet examples;
    Model model;
};

Fixture tiny(Task task, HeadKind head, std::size_t n, std::uint64_t seed, std::size_t d_model = 16) {
    Fixture f;
    f.examples = generate_synthetic(seed, n).task_set(task);
    ModelSpec spec;
    spec.task = task;
    spec.head = head;
    spec.encoder.d_model = d_model;
    spec.encoder.n_heads = 2;
    spec.encoder.n_layers = 1;
    spec.encoder.d_ff = 2 * d_model;
    spec.encoder.max_sequence_length = task == Task::A ? 16 : 28;
    spec.encoder.pooling = Pooling::Mean;
    f.model = Model::create(spec, build_vocab(f.examples.sentences(), 500), seed);
    return f;
}

std::vector<std::vector<double>> snapshot(const Model& m) {
    std::vector<std::vector<double>> out;
    for (const auto& p : m.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

TrainConfig quick_config(std::size_t epochs) {
    TrainConfig c;
    c.batch_size = 8;
    c.lr = 3e-3;
    c.epochs = epochs;
    c.seed = 5;
    return c;
}

} // namespace

TEST_CASE("adamw: zero gradient and zero state only decays") {
    Tensor theta = Tensor::vector({2.0, -4.0}, true);
    const std::vector<NamedTensor> params{{"t", theta}};
    AdamWState state(AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.5});
    adamw_step(params, state);
    CHECK(theta.value(0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-15));
    CHECK(theta.value(1) == doctest::Approx(-4.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-15));
}

TEST_CASE("adamw: analytic first step") {
    Tensor theta = Tensor::vector({0.0}, true);
    theta.mutable_grad()[0] = 1.0;
    const std::vector<NamedTensor> params{{"t", theta}};
    AdamWState state(AdamWConfig{2e-5, 0.9, 0.999, 1e-8, 0.0});
    adamw_step(params, state);
    CHECK(std::abs(theta.value(0) - (-2e-5 / (1.0 + 1e-8))) <= 1e-18);
    CHECK(state.step == 1);
}

TEST_CASE("adamw: three steps on a scalar quadratic match the hand-unrolled recurrence") {
    const double lr = 2e-5, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
    Tensor theta = Tensor::vector({1.5}, true);
    const std::vector<NamedTensor> params{{"t", theta}};
    AdamWState state(AdamWConfig{lr, b1, b2, eps, wd});
    double x = 1.5, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
        theta.zero_grad();
        Tape tape;
        Tensor loss;
        {
            TapeGuard guard(tape);
            loss = sum(mul(theta, theta));
        }
        backward(loss, tape);
        adamw_step(params, state);

        const double g = 2.0 * x;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        x = x - lr * (mh / (std::sqrt(vh) + eps) + wd * x);
        CHECK(std::abs(theta.value(0) - x) <= 1e-12);
        CHECK(state.step == static_cast<std::size_t>(t));
    }
}

TEST_CASE("adamw with no momentum and no decay is sign-scaled SGD") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double x0 = normal(rng), g = normal(rng);
        Tensor theta = Tensor::vector({x0}, true);
        theta.mutable_grad()[0] = g;
        const std::vector<NamedTensor> params{{"t", theta}};
        AdamWState state(AdamWConfig{0.01, 0.0, 0.0, 1e-8, 0.0});
        adamw_step(params, state);
        CHECK(std::abs(theta.value(0) - (x0 - 0.01 * g / (std::abs(g) + 1e-8))) <= 1e-15);
    }
}

TEST_CASE("adamw state mirrors parameter shapes") {
    auto f = tiny(Task::A, HeadKind::Siamese, 4, 1);
    const auto params = f.model.parameters();
    AdamWState state;
    adamw_step(params, state);
    REQUIRE(state.m.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        CHECK(state.m[i].size() == params[i].tensor.numel());
        CHECK(state.v[i].size() == params[i].tensor.numel());
    }
    const std::vector<NamedTensor> fewer(params.begin(), params.end() - 1);
    CHECK_THROWS_AS(adamw_step(fewer, state), ContractError);
}

TEST_CASE("gradient clipping rescales to the global norm") {
    Tensor a = Tensor::vector({3.0}, true);
    Tensor b = Tensor::vector({0.0}, true);
    a.mutable_grad()[0] = 3.0;
    b.mutable_grad()[0] = 4.0;
    const std::vector<NamedTensor> params{{"a", a}, {"b", b}};
    CHECK(clip_grad_norm(params, 10.0) == 5.0);
    CHECK(a.grad()[0] == 3.0);
    CHECK(clip_grad_norm(params, 1.0) == 5.0);
    CHECK(a.grad()[0] == doctest::Approx(0.6));
    CHECK(b.grad()[0] == doctest::Approx(0.8));
    a.mutable_grad()[0] = 300.0;
    CHECK(clip_grad_norm(params, 0.0) == doctest::Approx(std::hypot(300.0, 0.8)));
    CHECK(a.grad()[0] == 300.0);
}

TEST_CASE("train config validation") {
    TrainConfig c;
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.beta1 = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.eps = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    CHECK(c.batch_size == 32);
    CHECK(c.eps == 1e-8);
    CHECK(c.grad_clip_norm == 1.0);
}

TEST_CASE("lr = 0 leaves parameters bit-identical") {
    auto f = tiny(Task::B, HeadKind::Siamese, 24, 2);
    const auto before = snapshot(f.model);
    auto cfg = quick_config(1);
    cfg.lr = 0.0;
    Trainer trainer(f.model, cfg);
    const auto items = f.model.items(f.examples);
    trainer.train_epoch(items);
    CHECK(snapshot(f.model) == before);
}

TEST_CASE("fixed seed gives an identical loss trajectory") {
    auto run = [] {
        auto f = tiny(Task::A, HeadKind::Siamese, 32, 3);
        auto cfg = quick_config(3);
        f.model.spec.encoder.dropout = 0.1;
        Trainer trainer(f.model, cfg);
        const auto items = f.model.items(f.examples);
        std::vector<double> losses;
        for (int e = 0; e < 3; ++e) losses.push_back(trainer.train_epoch(items).mean_loss);
        return std::pair{losses, parameter_checksum(f.model)};
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("a tiny model overfits 64 synthetic examples within 50 epochs, loss trending down") {
    auto f = tiny(Task::B, HeadKind::Siamese, 64, 4);
    auto cfg = quick_config(50);
    cfg.lr = 5e-4;
    Trainer trainer(f.model, cfg);
    const auto items = f.model.items(f.examples);
    std::vector<double> losses;
    bool reached = false;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const auto m = trainer.train_epoch(items);
        losses.push_back(m.mean_loss);
        reached = reached || m.train_accuracy == 1.0;
    }
    CHECK(reached);
    CHECK(evaluate(f.model, items) == 1.0);
    // 5-epoch smoothed loss is non-increasing on this seeded run
    std::vector<double> smooth;
    for (std::size_t i = 0; i + 5 <= losses.size(); i += 5) {
        double s = 0.0;
        for (std::size_t k = i; k < i + 5; ++k) s += losses[k];
        smooth.push_back(s / 5.0);
    }
    for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1]);
}

TEST_CASE("evaluate counts matches with the gold index") {
    auto f = tiny(Task::A, HeadKind::Siamese, 8, 5);
    auto items = f.model.items(f.examples);
    for (auto& item : items) item.inputs[1] = item.inputs[0]; // uniform, predicts 0
    for (auto& item : items) item.gold = 0;
    CHECK(evaluate(f.model, items) == 1.0);
    for (std::size_t i = 0; i < items.size(); i += 2) items[i].gold = 1;
    CHECK(evaluate(f.model, items) == 0.5);
    CHECK_THROWS_AS(evaluate(f.model, std::span<const ScoringItem>{}), InputError);
}

TEST_CASE("an untrained model sits at chance on balanced pairs and evaluation has no side effects") {
    auto f = tiny(Task::A, HeadKind::Siamese, 600, 6);
    auto items = f.model.items(f.examples);
    // gold drawn independently of content, balanced over the two positions
    std::vector<std::size_t> golds(items.size());
    for (std::size_t i = 0; i < golds.size(); ++i) golds[i] = i % 2;
    std::mt19937_64 rng(60);
    std::shuffle(golds.begin(), golds.end(), rng);
    for (std::size_t i = 0; i < items.size(); ++i) items[i].gold = golds[i];
    const auto before = parameter_checksum(f.model);
    const double acc = evaluate(f.model, items);
    CHECK(std::abs(acc - 0.5) <= 0.1);
    CHECK(parameter_checksum(f.model) == before);
    for (const auto& p : f.model.parameters()) CHECK_FALSE(p.tensor.has_grad());
}

TEST_CASE("fit logs one line per epoch and keeps the best dev parameters") {
    auto f = tiny(Task::A, HeadKind::Siamese, 48, 7);
    const auto dev_set = generate_synthetic(70, 24).task_set(Task::A);
    const auto train = f.model.items(f.examples);
    const auto dev = f.model.items(dev_set);
    std::ostringstream log;
    const auto history = fit(f.model, train, dev, quick_config(4), &log);
    CHECK(history.epochs.size() == 4);
    std::istringstream lines(log.str());
    std::string line;
    std::size_t n = 0;
    double best = 0.0;
    while (std::getline(lines, line)) {
        ++n;
        CHECK(std::count(line.begin(), line.end(), '\t') == 3);
        best = std::max(best, std::stod(line.substr(line.rfind('\t') + 1)));
    }
    CHECK(n == 4);
    CHECK(history.best_dev_accuracy == best);
    CHECK(format_accuracy(evaluate(f.model, dev)) == format_accuracy(best));
}

TEST_CASE("fit stops early once the target dev accuracy is reached") {
    auto f = tiny(Task::A, HeadKind::Siamese, 64, 8);
    const auto items = f.model.items(f.examples);
    const auto history = fit(f.model, items, items, quick_config(30), nullptr, 0.0);
    CHECK(history.epochs.size() == 1);
}

TEST_CASE("log line format") {
    CHECK(format_log_line({3, 0.5, 0.75, 1.0}) == "3\t0.500000\t0.750000\t1.000000");
}

TEST_CASE("binary head trains too") {
    auto f = tiny(Task::A, HeadKind::Binary, 32, 9);
    const auto items = f.model.items(f.examples);
    Trainer trainer(f.model, quick_config(1));
    const auto m = trainer.train_epoch(items);
    CHECK(std::isfinite(m.mean_loss));
    CHECK(m.mean_loss == doctest::Approx(std::log(2.0)).epsilon(0.05));
}

TEST_CASE("non-finite parameters abort the epoch with the step index") {
    auto f = tiny(Task::A, HeadKind::Siamese, 16, 10);
    Tensor(f.model.scorer.weight).mutable_data()[0] = std::nan("");
    Trainer trainer(f.model, quick_config(1));
    const auto items = f.model.items(f.examples);
    try {
        trainer.train_epoch(items);
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("epoch 1 step 0") != std::string::npos);
    }
}
