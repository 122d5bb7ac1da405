#pragma once

#include "comve/model.hpp"
#include "comve/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace comve {

struct DataFiles {
    std::filesystem::path data;
    std::filesystem::path answers;
};

struct SyntheticSource {
    std::size_t n_train = 512;
    std::size_t n_dev = 128;
    std::uint64_t seed = 7;
};

// Everything `comve train` needs. Text format, one `key = value` per line,
// `#` starts a comment, relative paths resolve against the config's directory:
//
//   task            A | B
//   head            siamese | binary
//   template        none | more_sense | less_sense_because | rather_than
//   template_pattern  custom pattern, e.g. "{A} because {B}" (overrides template)
//   pooling         cls | mean
//   vocab_size      upper bound on vocabulary entries, reserved tokens included
//   d_model n_heads n_layers d_ff max_len dropout
//   batch_size lr eps beta1 beta2 weight_decay epochs seed grad_clip_norm
//   train_data train_answers dev_data dev_answers   (CSV files)
//   synthetic_train synthetic_dev synthetic_seed    (used when train_data is unset)
//   checkpoint      output checkpoint path
//   log             training log path (default <checkpoint>.log)
struct RunConfig {
    ModelSpec model;
    std::size_t vocab_size = 5000;
    TrainConfig train;
    std::optional<DataFiles> train_files;
    std::optional<DataFiles> dev_files;
    SyntheticSource synthetic;
    std::filesystem::path checkpoint = "model.ckpt";
    std::filesystem::path log;

    std::filesystem::path log_path() const;
    // Throws ConfigError.
    void validate() const;
};

// Throws ConfigError naming the offending line.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace comve
