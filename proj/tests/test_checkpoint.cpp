#include "comve/checkpoint.hpp"
#include "comve/errors.hpp"
#include "comve/synthetic.hpp"
#include "comve/training.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <fstream>

using namespace comve;

namespace {

Model small_model(Task task, HeadKind head, std::optional<TemplateSpec> templ = std::nullopt) {
    const auto examples = generate_synthetic(1, 16).task_set(task);
    ModelSpec spec;
    spec.task = task;
    spec.head = head;
    spec.templ = std::move(templ);
    spec.encoder.d_model = 8;
    spec.encoder.n_heads = 2;
    spec.encoder.n_layers = 2;
    spec.encoder.d_ff = 12;
    spec.encoder.max_sequence_length = 24;
    spec.encoder.pooling = Pooling::Mean;
    return Model::create(spec, build_vocab(examples.sentences(), 200), 3);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

} // namespace

TEST_CASE("save then load reproduces parameters, spec, vocab and predictions") {
    oracle::TempDir dir("ckpt");
    for (auto head : {HeadKind::Siamese, HeadKind::Binary}) {
        const auto model = small_model(Task::B, head);
        const auto path = dir / "m.ckpt";
        save_checkpoint(model, path);
        CHECK(std::filesystem::exists(vocab_path_for(path)));
        const auto loaded = load_checkpoint(path);
        CHECK(parameter_checksum(loaded) == parameter_checksum(model));
        CHECK(loaded.spec.task == Task::B);
        CHECK(loaded.spec.head == head);
        CHECK(loaded.spec.encoder.n_layers == 2);
        CHECK(loaded.spec.encoder.pooling == Pooling::Mean);
        CHECK(loaded.vocab.size() == model.vocab.size());
        const auto examples = generate_synthetic(2, 10).task_set(Task::B);
        const auto a = predict(model, model.items(examples));
        const auto b = predict(loaded, loaded.items(examples));
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].candidate_scores == b[i].candidate_scores);
    }
}

TEST_CASE("templates survive the round trip") {
    oracle::TempDir dir("ckpt_templ");
    const auto model = small_model(Task::A, HeadKind::Binary, builtin_template("more_sense"));
    save_checkpoint(model, dir / "t.ckpt");
    const auto loaded = load_checkpoint(dir / "t.ckpt");
    REQUIRE(loaded.spec.templ.has_value());
    CHECK(loaded.spec.templ->pattern == model.spec.templ->pattern);
}

TEST_CASE("saving is deterministic") {
    oracle::TempDir dir("ckpt_det");
    const auto model = small_model(Task::A, HeadKind::Siamese);
    save_checkpoint(model, dir / "a.ckpt");
    save_checkpoint(model, dir / "b.ckpt");
    CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
}

TEST_CASE("checksum changes with any parameter bit") {
    auto model = small_model(Task::A, HeadKind::Siamese);
    const auto before = parameter_checksum(model);
    Tensor(model.encoder.layers.back().ff_out_bias).mutable_data()[0] += 1e-300;
    CHECK(parameter_checksum(model) != before);
}

TEST_CASE("malformed checkpoints raise format errors") {
    oracle::TempDir dir("ckpt_bad");
    const auto model = small_model(Task::A, HeadKind::Siamese);
    const auto path = dir / "m.ckpt";
    save_checkpoint(model, path);
    const auto good = slurp(path);

    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), InputError);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    spit(path, bad_magic);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    spit(path, good.substr(0, good.size() - 5));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    spit(path, good.substr(0, 12));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    // header claims a different encoder width than the stored tensors
    auto mismatched = good;
    const auto pos = mismatched.find("\"d_model\":8");
    REQUIRE(pos != std::string::npos);
    mismatched.replace(pos, 11, "\"d_model\":9");
    spit(path, mismatched);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    // vocabulary sidecar of the wrong size
    spit(path, good);
    const std::vector<std::string> tiny_corpus{"a b c d e f"};
    build_vocab(tiny_corpus, 10).save(vocab_path_for(path));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}

TEST_CASE("copy_parameters requires equal structure") {
    const auto a = small_model(Task::A, HeadKind::Siamese);
    auto b = small_model(Task::A, HeadKind::Siamese);
    Tensor(b.scorer.weight).mutable_data()[0] = 42.0;
    copy_parameters(a, b);
    CHECK(parameter_checksum(a) == parameter_checksum(b));
    auto c = small_model(Task::A, HeadKind::Binary);
    CHECK_THROWS_AS(copy_parameters(a, c), ContractError);
}
