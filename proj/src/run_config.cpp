#include "comve/run_config.hpp"

#include "comve/errors.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace comve {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string_view unquote(std::string_view v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value, std::size_t line) {
    T out{};
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError(fmt::format("line {}: '{}' is not a valid number for {}", line, value, key));
    }
    return out;
}

} // namespace

std::filesystem::path RunConfig::log_path() const {
    if (!log.empty()) return log;
    auto p = checkpoint;
    p += ".log";
    return p;
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    if (vocab_size < kReservedTokens + 1) throw ConfigError("vocab_size must leave room for at least one word");
    if (train.epochs == 0) throw ConfigError("epochs must be at least 1");
    if (train_files.has_value() != dev_files.has_value()) {
        throw ConfigError("train_data/train_answers and dev_data/dev_answers must be given together");
    }
    if (!train_files && (synthetic.n_train == 0 || synthetic.n_dev == 0)) {
        throw ConfigError("synthetic_train and synthetic_dev must be at least 1");
    }
    if (checkpoint.empty()) throw ConfigError("checkpoint path is empty");
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    std::optional<std::string> template_name, template_pattern;
    std::filesystem::path train_data, train_answers, dev_data, dev_answers;
    auto resolve = [&](std::string_view v) {
        std::filesystem::path p{std::string(v)};
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };

    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
        const auto key = trim(line.substr(0, eq));
        const auto value = unquote(trim(line.substr(eq + 1)));
        auto size = [&] { return parse_number<std::size_t>(key, value, line_no); };
        auto real = [&] { return parse_number<double>(key, value, line_no); };

        if (key == "task") {
            cfg.model.task = parse_task(value);
        } else if (key == "head") {
            cfg.model.head = parse_head(value);
        } else if (key == "template") {
            template_name = std::string(value);
        } else if (key == "template_pattern") {
            template_pattern = std::string(value);
        } else if (key == "pooling") {
            cfg.model.encoder.pooling = parse_pooling(value);
        } else if (key == "vocab_size") {
            cfg.vocab_size = size();
        } else if (key == "d_model") {
            cfg.model.encoder.d_model = size();
        } else if (key == "n_heads") {
            cfg.model.encoder.n_heads = size();
        } else if (key == "n_layers") {
            cfg.model.encoder.n_layers = size();
        } else if (key == "d_ff") {
            cfg.model.encoder.d_ff = size();
        } else if (key == "max_len") {
            cfg.model.encoder.max_sequence_length = size();
        } else if (key == "dropout") {
            cfg.model.encoder.dropout = real();
        } else if (key == "batch_size") {
            cfg.train.batch_size = size();
        } else if (key == "lr") {
            cfg.train.lr = real();
        } else if (key == "eps") {
            cfg.train.eps = real();
        } else if (key == "beta1") {
            cfg.train.beta1 = real();
        } else if (key == "beta2") {
            cfg.train.beta2 = real();
        } else if (key == "weight_decay") {
            cfg.train.weight_decay = real();
        } else if (key == "epochs") {
            cfg.train.epochs = size();
        } else if (key == "seed") {
            cfg.train.seed = parse_number<std::uint64_t>(key, value, line_no);
        } else if (key == "grad_clip_norm") {
            cfg.train.grad_clip_norm = real();
        } else if (key == "train_data") {
            train_data = resolve(value);
        } else if (key == "train_answers") {
            train_answers = resolve(value);
        } else if (key == "dev_data") {
            dev_data = resolve(value);
        } else if (key == "dev_answers") {
            dev_answers = resolve(value);
        } else if (key == "synthetic_train") {
            cfg.synthetic.n_train = size();
        } else if (key == "synthetic_dev") {
            cfg.synthetic.n_dev = size();
        } else if (key == "synthetic_seed") {
            cfg.synthetic.seed = parse_number<std::uint64_t>(key, value, line_no);
        } else if (key == "checkpoint") {
            cfg.checkpoint = resolve(value);
        } else if (key == "log") {
            cfg.log = resolve(value);
        } else {
            throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
        }
    }

    if (template_pattern) {
        cfg.model.templ = TemplateSpec{"custom", *template_pattern};
    } else if (template_name && *template_name != "none") {
        try {
            cfg.model.templ = builtin_template(*template_name);
        } catch (const TemplateError& e) {
            throw ConfigError(e.what());
        }
    }
    if (!train_data.empty() || !train_answers.empty()) {
        if (train_data.empty() || train_answers.empty()) throw ConfigError("train_data needs train_answers and vice versa");
        cfg.train_files = DataFiles{train_data, train_answers};
    }
    if (!dev_data.empty() || !dev_answers.empty()) {
        if (dev_data.empty() || dev_answers.empty()) throw ConfigError("dev_data needs dev_answers and vice versa");
        cfg.dev_files = DataFiles{dev_data, dev_answers};
    }
    try {
        cfg.validate();
    } catch (const TemplateError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_run_config(buffer.str(), path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

} // namespace comve
