#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace comve {

inline constexpr int kExitOk = 0;
inline constexpr int kExitSelfcheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

enum class LogLevel { Quiet, Info, Debug };

// COMVE_LOG_LEVEL = quiet | info | debug (default info).
LogLevel log_level_from_env();

struct TrainOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> log;
};

int cmd_train(const std::filesystem::path& config_path, const TrainOverrides& overrides, std::ostream& out,
              std::ostream& err);

struct EvalOptions {
    std::vector<std::filesystem::path> checkpoints;
    std::filesystem::path data;
    std::filesystem::path answers;
    std::optional<std::filesystem::path> predictions;
    std::optional<std::filesystem::path> report_csv;
    bool reference = false;
};

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);

int cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                const std::filesystem::path& output, std::ostream& out, std::ostream& err);

int cmd_selfcheck(std::ostream& out, std::ostream& err);

int cmd_gen_synthetic(std::uint64_t seed, std::size_t n_train, std::size_t n_dev, const std::filesystem::path& out_dir,
                      std::ostream& out, std::ostream& err);

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace comve
