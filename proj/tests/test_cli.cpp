#include "comve/checkpoint.hpp"
#include "comve/cli.hpp"
#include "comve/csv.hpp"
#include "comve/report.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <fstream>
#include <iomanip>
#include <sstream>

using namespace comve;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

const char* kTinyConfig = R"(task = A
head = siamese
pooling = mean
d_model = 16
n_heads = 2
n_layers = 1
d_ff = 32
max_len = 20
batch_size = 8
lr = 3e-3
epochs = 3
seed = 11
synthetic_train = 64
synthetic_dev = 32
synthetic_seed = 4
checkpoint = tiny.ckpt
)";

double best_logged_dev_accuracy(const fs::path& log) {
    std::istringstream lines(slurp(log));
    std::string line;
    double best = 0.0;
    while (std::getline(lines, line)) best = std::max(best, std::stod(line.substr(line.rfind('\t') + 1)));
    return best;
}

} // namespace

TEST_CASE("quickstart config trains and writes checkpoint and log") {
    oracle::TempDir dir("cli_quick");
    const auto ckpt = (dir / "q.ckpt").string();
    const auto r = cli({"train", COMVE_CONFIG_DIR "/quickstart.cfg", "--checkpoint", ckpt});
    CHECK(r.code == kExitOk);
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(ckpt + ".log"));
    CHECK(fs::exists(ckpt + ".vocab"));
    CHECK(best_logged_dev_accuracy(ckpt + ".log") >= 0.95);
}

TEST_CASE("same config and seed twice gives identical logs and parameters") {
    oracle::TempDir dir("cli_det");
    write(dir / "run.cfg", kTinyConfig);
    const auto cfg = (dir / "run.cfg").string();
    REQUIRE(cli({"train", cfg, "--checkpoint", (dir / "a.ckpt").string()}).code == 0);
    REQUIRE(cli({"train", cfg, "--checkpoint", (dir / "b.ckpt").string()}).code == 0);
    CHECK(slurp(dir / "a.ckpt.log") == slurp(dir / "b.ckpt.log"));
    CHECK(parameter_checksum(load_checkpoint(dir / "a.ckpt")) == parameter_checksum(load_checkpoint(dir / "b.ckpt")));
    REQUIRE(cli({"train", cfg, "--checkpoint", (dir / "c.ckpt").string(), "--seed", "12"}).code == 0);
    CHECK(parameter_checksum(load_checkpoint(dir / "a.ckpt")) != parameter_checksum(load_checkpoint(dir / "c.ckpt")));
}

TEST_CASE("eval after train agrees with the training log") {
    oracle::TempDir dir("cli_eval");
    write(dir / "run.cfg", kTinyConfig);
    REQUIRE(cli({"train", (dir / "run.cfg").string()}).code == 0);
    REQUIRE(cli({"gen-synthetic", "--seed", "4", "--train", "64", "--dev", "32", "--out-dir", (dir / "data").string()})
                .code == 0);
    const auto ckpt = dir / "tiny.ckpt";
    const auto r = cli({"eval", "--checkpoint", ckpt.string(), "--data", (dir / "data/taskA_dev_data.csv").string(),
                        "--answers", (dir / "data/taskA_dev_answers.csv").string(), "--predictions",
                        (dir / "pred.csv").string(), "--report", (dir / "report.csv").string(), "--reference"});
    REQUIRE(r.code == 0);
    std::ostringstream expected;
    expected << "accuracy " << std::fixed << std::setprecision(6) << best_logged_dev_accuracy(dir / "tiny.ckpt.log");
    CHECK(r.out.find(expected.str()) != std::string::npos);
    CHECK(r.out.find("fallacy_rate 0.000000") != std::string::npos);
    CHECK(r.out.find(kReferenceColumn) != std::string::npos);

    const auto rows = csv::read_file(dir / "pred.csv");
    CHECK(rows.size() == 1 + 32);
    CHECK(rows.front() == csv::Row{"id", "label"});
    CHECK(fs::exists(dir / "report.csv"));

    const auto p = cli({"predict", "--checkpoint", ckpt.string(), "--data",
                        (dir / "data/taskA_dev_data.csv").string(), "--out", (dir / "blind.csv").string()});
    CHECK(p.code == 0);
    CHECK(slurp(dir / "blind.csv") == slurp(dir / "pred.csv"));
}

TEST_CASE("task B eval prints no fallacy rate and uses letter labels") {
    oracle::TempDir dir("cli_b");
    std::string cfg = kTinyConfig;
    cfg.replace(cfg.find("task = A"), 8, "task = B");
    cfg.replace(cfg.find("max_len = 20"), 12, "max_len = 40");
    write(dir / "run.cfg", cfg);
    REQUIRE(cli({"train", (dir / "run.cfg").string()}).code == 0);
    REQUIRE(cli({"gen-synthetic", "--seed", "4", "--train", "64", "--dev", "32", "--out-dir", dir.path().string()})
                .code == 0);
    const auto r = cli({"eval", "--checkpoint", (dir / "tiny.ckpt").string(), "--data",
                        (dir / "taskB_dev_data.csv").string(), "--answers", (dir / "taskB_dev_answers.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("fallacy_rate") == std::string::npos);
    const auto rows = csv::read_file(dir / "tiny.ckpt.predictions.csv");
    REQUIRE(rows.size() == 33);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK((rows[i][1] == "A" || rows[i][1] == "B" || rows[i][1] == "C"));
}

TEST_CASE("missing data file exits 2 naming the path") {
    oracle::TempDir dir("cli_missing");
    std::string cfg = kTinyConfig;
    cfg += "train_data = nowhere/train.csv\ntrain_answers = nowhere/ta.csv\n"
           "dev_data = nowhere/dev.csv\ndev_answers = nowhere/da.csv\n";
    write(dir / "run.cfg", cfg);
    const auto r = cli({"train", (dir / "run.cfg").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("nowhere/train.csv") != std::string::npos);

    const auto e = cli({"eval", "--checkpoint", (dir / "none.ckpt").string(), "--data", "x.csv", "--answers", "y.csv"});
    CHECK(e.code == kExitUsage);
    CHECK(e.err.find("x.csv") != std::string::npos);
}

TEST_CASE("bad configs and usage errors exit 2") {
    oracle::TempDir dir("cli_bad");
    write(dir / "bad.cfg", "task = A\nwidth = 3\n");
    const auto r = cli({"train", (dir / "bad.cfg").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("line 2") != std::string::npos);
    CHECK(cli({"train", (dir / "absent.cfg").string()}).code == kExitUsage);
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"eval", "--data", "x"}).code == kExitUsage);
}

TEST_CASE("checkpoint that does not fit the data exits 2") {
    oracle::TempDir dir("cli_mismatch");
    write(dir / "run.cfg", kTinyConfig);
    REQUIRE(cli({"train", (dir / "run.cfg").string()}).code == 0);
    write(dir / "tiny.ckpt", "garbage");
    REQUIRE(cli({"gen-synthetic", "--train", "4", "--dev", "4", "--out-dir", dir.path().string()}).code == 0);
    const auto r = cli({"eval", "--checkpoint", (dir / "tiny.ckpt").string(), "--data",
                        (dir / "taskA_dev_data.csv").string(), "--answers", (dir / "taskA_dev_answers.csv").string()});
    CHECK(r.code == kExitUsage);
}

TEST_CASE("help exits 0") {
    const auto r = cli({"--help"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("selfcheck") != std::string::npos);
}

TEST_CASE("selfcheck passes and lists the normalization check") {
    const auto r = cli({"selfcheck"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("PASS softmax_normalization") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("gen-synthetic writes both tasks and both splits") {
    oracle::TempDir dir("cli_gen");
    REQUIRE(cli({"gen-synthetic", "--seed", "9", "--train", "10", "--dev", "6", "--out-dir", dir.path().string()})
                .code == 0);
    for (const char* task : {"A", "B"}) {
        CHECK(csv::read_file(dir / (std::string("task") + task + "_train_answers.csv")).size() == 10);
        CHECK(csv::read_file(dir / (std::string("task") + task + "_dev_data.csv")).size() == 7);
    }
    CHECK(cli({"gen-synthetic", "--train", "0", "--out-dir", dir.path().string()}).code == kExitUsage);
}
