#include "comve/cli.hpp"

#include "comve/checkpoint.hpp"
#include "comve/csv.hpp"
#include "comve/errors.hpp"
#include "comve/report.hpp"
#include "comve/run_config.hpp"
#include "comve/selfcheck.hpp"
#include "comve/synthetic.hpp"
#include "comve/training.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <ostream>
#include <streambuf>

namespace comve {

namespace fs = std::filesystem;

LogLevel log_level_from_env() {
    const char* raw = std::getenv("COMVE_LOG_LEVEL");
    if (raw == nullptr) return LogLevel::Info;
    const std::string_view v{raw};
    if (v == "quiet" || v == "0") return LogLevel::Quiet;
    if (v == "debug" || v == "2") return LogLevel::Debug;
    return LogLevel::Info;
}

namespace {

// Writes to two streambufs at once.
class TeeBuf : public std::streambuf {
public:
    TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

protected:
    int overflow(int c) override {
        if (c == traits_type::eof()) return traits_type::not_eof(c);
        const auto ch = traits_type::to_char_type(c);
        if (a_->sputc(ch) == traits_type::eof()) return traits_type::eof();
        if (b_ != nullptr && b_->sputc(ch) == traits_type::eof()) return traits_type::eof();
        return c;
    }
    int sync() override {
        const int ra = a_->pubsync();
        const int rb = b_ == nullptr ? 0 : b_->pubsync();
        return ra == 0 && rb == 0 ? 0 : -1;
    }

private:
    std::streambuf* a_;
    std::streambuf* b_;
};

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const NumericError& e) {
        err << "error: numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

void require_file(const fs::path& path, std::string_view what) {
    if (!fs::is_regular_file(path)) throw InputError(fmt::format("{} not found: {}", what, path.string()));
}

std::string predicted_label(Task task, std::size_t index) {
    return task == Task::A ? std::to_string(index) : std::string(1, option_letter(index));
}

void write_predictions(const ExampleSet& examples, const std::vector<ItemResult>& results, const fs::path& path) {
    std::vector<csv::Row> rows{{"id", "label"}};
    for (std::size_t i = 0; i < results.size(); ++i) {
        rows.push_back({examples.id(i), predicted_label(examples.task, results[i].predicted)});
    }
    csv::write_file(path, rows);
}

std::vector<SentenceLabel> sentence_labels(const std::vector<ScoringItem>& items, const std::vector<ItemResult>& results) {
    std::vector<SentenceLabel> labels;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = 0; j < results[i].input_labels.size(); ++j) {
            labels.push_back({items[i].id, items[i].candidate_of_input[j], results[i].input_labels[j]});
        }
    }
    return labels;
}

HeadVariant head_variant(const ModelSpec& spec) {
    if (spec.head == HeadKind::Siamese) return HeadVariant::Siamese;
    return spec.templ ? HeadVariant::BinaryPhrase : HeadVariant::Binary;
}

struct TrainData {
    ExampleSet train;
    ExampleSet dev;
};

TrainData load_train_data(const RunConfig& cfg) {
    const Task task = cfg.model.task;
    if (cfg.train_files) {
        for (const auto* files : {&*cfg.train_files, &*cfg.dev_files}) {
            require_file(files->data, "data file");
            require_file(files->answers, "answers file");
        }
        return {load_examples(task, cfg.train_files->data, cfg.train_files->answers),
                load_examples(task, cfg.dev_files->data, cfg.dev_files->answers)};
    }
    const auto corpus = generate_synthetic(cfg.synthetic.seed, cfg.synthetic.n_train + cfg.synthetic.n_dev);
    const auto [train, dev] = split_corpus(corpus, cfg.synthetic.n_train);
    return {train.task_set(task), dev.task_set(task)};
}

} // namespace

int cmd_train(const fs::path& config_path, const TrainOverrides& overrides, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto level = log_level_from_env();
        auto cfg = load_run_config(config_path);
        if (overrides.seed) cfg.train.seed = *overrides.seed;
        if (overrides.checkpoint) cfg.checkpoint = *overrides.checkpoint;
        if (overrides.log) cfg.log = *overrides.log;

        const auto data = load_train_data(cfg);
        if (data.train.empty()) throw InputError("training set is empty");
        if (data.dev.empty()) throw InputError("dev set is empty");

        auto model = Model::create(cfg.model, build_vocab(data.train.sentences(), cfg.vocab_size), cfg.train.seed);
        const auto train_items = model.items(data.train);
        const auto dev_items = model.items(data.dev);
        if (level != LogLevel::Quiet) {
            out << fmt::format("task {} head {} pooling {} template {}: {} train / {} dev examples, vocab {}, {} parameters\n",
                               to_string(cfg.model.task), to_string(cfg.model.head),
                               to_string(cfg.model.encoder.pooling), cfg.model.templ ? cfg.model.templ->name : "none",
                               data.train.size(), data.dev.size(), model.vocab.size(),
                               parameter_count(model.parameters()));
        }

        const auto log_path = cfg.log_path();
        if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
        if (cfg.checkpoint.has_parent_path()) fs::create_directories(cfg.checkpoint.parent_path());
        std::ofstream log_file(log_path, std::ios::binary);
        if (!log_file) throw InputError("cannot write log file " + log_path.string());
        TeeBuf tee(log_file.rdbuf(), level == LogLevel::Quiet ? nullptr : out.rdbuf());
        std::ostream log(&tee);

        const auto started = std::chrono::steady_clock::now();
        const auto history = fit(model, train_items, dev_items, cfg.train, &log);
        log.flush();
        save_checkpoint(model, cfg.checkpoint);

        if (level != LogLevel::Quiet) {
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            out << fmt::format("best epoch {} dev accuracy {}\n", history.best_epoch,
                               format_accuracy(history.best_dev_accuracy));
            out << fmt::format("checkpoint {}\nlog {}\n", cfg.checkpoint.string(), log_path.string());
            if (level == LogLevel::Debug) out << fmt::format("trained in {:.1f}s\n", seconds);
        }
        return kExitOk;
    });
}

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (options.checkpoints.empty()) throw ConfigError("eval needs at least one --checkpoint");
        if (options.predictions && options.checkpoints.size() > 1) {
            throw ConfigError("--predictions takes a single --checkpoint");
        }
        require_file(options.data, "data file");
        require_file(options.answers, "answers file");

        std::vector<AblationRow> rows;
        std::optional<Task> task;
        for (const auto& path : options.checkpoints) {
            require_file(path, "checkpoint");
            const auto model = load_checkpoint(path);
            if (task && *task != model.spec.task) throw ConfigError("checkpoints disagree on the task");
            task = model.spec.task;
            const auto examples = load_examples(model.spec.task, options.data, options.answers);
            if (examples.empty()) throw InputError("no examples in " + options.data.string());
            const auto items = model.items(examples);
            const auto results = predict(model, items);

            std::size_t correct = 0;
            for (std::size_t i = 0; i < items.size(); ++i)
                if (results[i].predicted == items[i].gold) ++correct;
            AblationRow row;
            row.model_name = path.stem().string();
            row.head = head_variant(model.spec);
            row.pooling = model.spec.encoder.pooling;
            row.dev_accuracy = static_cast<double>(correct) / static_cast<double>(items.size());
            if (model.spec.task == Task::A) row.fallacy_rate = fallacy_rate(sentence_labels(items, results));

            out << fmt::format("{}: accuracy {}", path.string(), format_accuracy(row.dev_accuracy));
            if (row.fallacy_rate) out << fmt::format(" fallacy_rate {}", format_accuracy(*row.fallacy_rate));
            out << '\n';

            auto pred_path = options.predictions.value_or(fs::path(path.string() + ".predictions.csv"));
            write_predictions(examples, results, pred_path);
            if (log_level_from_env() != LogLevel::Quiet) out << "predictions " << pred_path.string() << '\n';
            rows.push_back(std::move(row));
        }

        std::optional<std::span<const ReferenceResult>> reference;
        std::vector<ReferenceResult> published;
        if (options.reference) {
            published = published_results(*task);
            reference = std::span<const ReferenceResult>(published);
        }
        const auto report = build_report(rows, reference);
        if (options.checkpoints.size() > 1 || options.reference) out << report.text;
        if (options.report_csv) {
            std::ofstream f(*options.report_csv, std::ios::binary);
            if (!f) throw InputError("cannot write report " + options.report_csv->string());
            f << report.csv;
        }
        return kExitOk;
    });
}

int cmd_predict(const fs::path& checkpoint, const fs::path& data, const fs::path& output, std::ostream& out,
                std::ostream& err) {
    return guarded(err, [&] {
        require_file(checkpoint, "checkpoint");
        require_file(data, "data file");
        const auto model = load_checkpoint(checkpoint);
        const auto examples = load_examples(model.spec.task, data, std::nullopt);
        const auto results = predict(model, model.items(examples));
        write_predictions(examples, results, output);
        if (log_level_from_env() != LogLevel::Quiet) {
            out << fmt::format("wrote {} predictions to {}\n", results.size(), output.string());
        }
        return kExitOk;
    });
}

int cmd_selfcheck(std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto started = std::chrono::steady_clock::now();
        const auto results = run_selfcheck(out);
        const bool ok = all_passed(results);
        const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        out << fmt::format("{} checks, {} failed, {:.1f}s\n", results.size(), failed, seconds);
        return ok ? kExitOk : kExitSelfcheckFailed;
    });
}

int cmd_gen_synthetic(std::uint64_t seed, std::size_t n_train, std::size_t n_dev, const fs::path& out_dir,
                      std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (n_train == 0 || n_dev == 0) throw ConfigError("--train and --dev must be at least 1");
        fs::create_directories(out_dir);
        const auto corpus = generate_synthetic(seed, n_train + n_dev);
        const auto [train, dev] = split_corpus(corpus, n_train);
        for (Task task : {Task::A, Task::B}) {
            const auto name = to_string(task);
            for (const auto& [split, part] : {std::pair{"train", &train}, std::pair{"dev", &dev}}) {
                const auto data = out_dir / fmt::format("task{}_{}_data.csv", name, split);
                const auto answers = out_dir / fmt::format("task{}_{}_answers.csv", name, split);
                save_examples(part->task_set(task), data, answers);
                if (log_level_from_env() != LogLevel::Quiet) out << data.string() << '\n' << answers.string() << '\n';
            }
        }
        return kExitOk;
    });
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Siamese candidate scorer for commonsense validation and explanation"};
    app.name("comve");
    app.require_subcommand(1);

    std::string config;
    TrainOverrides overrides;
    std::uint64_t train_seed = 0;
    std::string train_checkpoint, train_log;
    auto* train = app.add_subcommand("train", "Train a model from a config file");
    train->add_option("config", config, "key = value config file")->required();
    auto* seed_opt = train->add_option("--seed", train_seed, "Override the training seed");
    auto* ckpt_opt = train->add_option("--checkpoint", train_checkpoint, "Override the checkpoint path");
    auto* log_opt = train->add_option("--log", train_log, "Override the training log path");

    EvalOptions eval_options;
    std::vector<std::string> eval_checkpoints;
    std::string eval_data, eval_answers, eval_predictions, eval_report;
    auto* eval = app.add_subcommand("eval", "Accuracy (and fallacy rate for task A) of checkpoints on labelled data");
    eval->add_option("--checkpoint", eval_checkpoints, "Checkpoint file (repeatable)")->required();
    eval->add_option("--data", eval_data, "Data CSV")->required();
    eval->add_option("--answers", eval_answers, "Answers CSV")->required();
    auto* eval_pred_opt = eval->add_option("--predictions", eval_predictions, "Prediction CSV path");
    auto* eval_report_opt = eval->add_option("--report", eval_report, "Write the comparison table as CSV");
    eval->add_flag("--reference", eval_options.reference, "Add the published large-encoder results column");

    std::string predict_checkpoint, predict_data, predict_out;
    auto* pred = app.add_subcommand("predict", "Write predicted labels for unlabelled data");
    pred->add_option("--checkpoint", predict_checkpoint, "Checkpoint file")->required();
    pred->add_option("--data", predict_data, "Data CSV")->required();
    pred->add_option("--out", predict_out, "Output CSV")->required();

    auto* selfcheck = app.add_subcommand("selfcheck", "Gradient, invariant and optimizer checks");

    std::uint64_t gen_seed = 7;
    std::size_t gen_train = 512, gen_dev = 128;
    std::string gen_dir;
    auto* gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic corpus in the CSV formats");
    gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
    gen->add_option("--train", gen_train, "Training examples per task")->capture_default_str();
    gen->add_option("--dev", gen_dev, "Dev examples per task")->capture_default_str();
    gen->add_option("--out-dir", gen_dir, "Output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        for (auto* sub : app.get_subcommands()) {
            err << sub->help();
            return kExitUsage;
        }
        err << app.help();
        return kExitUsage;
    }

    if (train->parsed()) {
        if (seed_opt->count() > 0) overrides.seed = train_seed;
        if (ckpt_opt->count() > 0) overrides.checkpoint = train_checkpoint;
        if (log_opt->count() > 0) overrides.log = train_log;
        return cmd_train(config, overrides, out, err);
    }
    if (eval->parsed()) {
        for (const auto& c : eval_checkpoints) eval_options.checkpoints.emplace_back(c);
        eval_options.data = eval_data;
        eval_options.answers = eval_answers;
        if (eval_pred_opt->count() > 0) eval_options.predictions = eval_predictions;
        if (eval_report_opt->count() > 0) eval_options.report_csv = eval_report;
        return cmd_eval(eval_options, out, err);
    }
    if (pred->parsed()) return cmd_predict(predict_checkpoint, predict_data, predict_out, out, err);
    if (selfcheck->parsed()) return cmd_selfcheck(out, err);
    if (gen->parsed()) return cmd_gen_synthetic(gen_seed, gen_train, gen_dev, gen_dir, out, err);
    err << app.help();
    return kExitUsage;
}

} // namespace comve
