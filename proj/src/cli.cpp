#include "pinnsearch/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "pinnsearch/errors.hpp"
#include "pinnsearch/model_io.hpp"
#include "pinnsearch/rng.hpp"

namespace pinnsearch::cli {

namespace {

double to_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0') {
        throw ConfigError("bad numeric value for '" + key + "': " + value);
    }
    return v;
}

long long to_int(const std::string& key, const std::string& value) {
    char* end = nullptr;
    long long v = std::strtoll(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0') {
        throw ConfigError("bad integer value for '" + key + "': " + value);
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on") return true;
    if (value == "0" || value == "false" || value == "off") return false;
    throw ConfigError("bad boolean value for '" + key + "': " + value);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

search::SearchConfig RunConfig::search_config() const {
    search::SearchConfig s;
    s.P0 = constraint;
    s.alpha = alpha;
    s.beta = beta;
    s.trials = trials;
    s.batch = batch;
    s.controller_lr = controller_lr;
    s.baseline_decay = baseline_decay;
    s.baseline_enabled = baseline_enabled;
    s.seed = seed;
    s.workers = workers > 0 ? workers
                            : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    return s;
}

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else if (key == "out") {
        cfg.out = value;
    } else if (key == "dataset") {
        cfg.dataset = value;
    } else if (key == "epochs") {
        cfg.train.epochs = static_cast<int>(to_int(key, value));
    } else if (key == "adam_lr") {
        cfg.train.adam_lr = to_double(key, value);
    } else if (key == "adam_beta1") {
        cfg.train.adam_beta1 = to_double(key, value);
    } else if (key == "adam_beta2") {
        cfg.train.adam_beta2 = to_double(key, value);
    } else if (key == "adam_eps") {
        cfg.train.adam_eps = to_double(key, value);
    } else if (key == "lbfgs_history") {
        cfg.train.lbfgs_history = static_cast<int>(to_int(key, value));
    } else if (key == "lbfgs_max_iter") {
        cfg.train.lbfgs_max_iter = static_cast<int>(to_int(key, value));
    } else if (key == "lbfgs_grad_tol") {
        cfg.train.lbfgs_grad_tol = to_double(key, value);
    } else if (key == "lbfgs_rel_tol") {
        cfg.train.lbfgs_rel_tol = to_double(key, value);
    } else if (key == "decode_substeps") {
        cfg.train.decode_substeps = static_cast<int>(to_int(key, value));
    } else if (key == "constraint") {
        cfg.constraint = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "trials") {
        cfg.trials = static_cast<int>(to_int(key, value));
    } else if (key == "batch") {
        cfg.batch = static_cast<int>(to_int(key, value));
    } else if (key == "workers") {
        cfg.workers = static_cast<int>(to_int(key, value));
    } else if (key == "alpha") {
        cfg.alpha = to_double(key, value);
    } else if (key == "beta") {
        cfg.beta = to_double(key, value);
    } else if (key == "controller_lr") {
        cfg.controller_lr = to_double(key, value);
    } else if (key == "baseline_decay") {
        cfg.baseline_decay = to_double(key, value);
    } else if (key == "baseline_enabled") {
        cfg.baseline_enabled = to_bool(key, value);
    } else if (key == "random_baselines") {
        cfg.random_baselines = static_cast<int>(to_int(key, value));
    } else if (key == "duty") {
        cfg.duty = to_double(key, value);
    } else if (key == "f_s") {
        cfg.f_s = to_double(key, value);
    } else if (key == "samples_per_op") {
        cfg.samples_per_op = static_cast<int>(to_int(key, value));
    } else if (key == "noise_rel") {
        cfg.noise_rel = to_double(key, value);
    } else if (key == "sim_substeps") {
        cfg.sim_substeps = static_cast<int>(to_int(key, value));
    } else if (key == "holdout") {
        cfg.holdout = to_double(key, value);
    } else if (key == "lambda_ref_offset") {
        cfg.lambda_ref_offset = to_double(key, value);
    } else {
        bool matched = false;
        const auto& names = physics::PhysParams::names();
        for (int j = 0; j < physics::kNumParams; ++j) {
            if (key == names[j]) {
                cfg.nominal[j] = to_double(key, value);
                matched = true;
                break;
            }
        }
        if (!matched) throw ConfigError("unknown config key '" + key + "'");
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config", path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto notspace = line.find_first_not_of(" \t");
        if (notspace == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected 'key = value' in " + path.string(), line_no);
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        apply_key_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

namespace {

std::string config_snapshot(const RunConfig& cfg) {
    std::ostringstream os;
    os << "seed = " << cfg.seed << '\n';
    os << "out = " << cfg.out.string() << '\n';
    os << "dataset = " << cfg.dataset.string() << '\n';
    os << "epochs = " << cfg.train.epochs << '\n';
    os << "adam_lr = " << fmt17(cfg.train.adam_lr) << '\n';
    os << "adam_beta1 = " << fmt17(cfg.train.adam_beta1) << '\n';
    os << "adam_beta2 = " << fmt17(cfg.train.adam_beta2) << '\n';
    os << "adam_eps = " << fmt17(cfg.train.adam_eps) << '\n';
    os << "lbfgs_history = " << cfg.train.lbfgs_history << '\n';
    os << "lbfgs_max_iter = " << cfg.train.lbfgs_max_iter << '\n';
    os << "lbfgs_grad_tol = " << fmt17(cfg.train.lbfgs_grad_tol) << '\n';
    os << "lbfgs_rel_tol = " << fmt17(cfg.train.lbfgs_rel_tol) << '\n';
    os << "decode_substeps = " << cfg.train.decode_substeps << '\n';
    os << "constraint = " << cfg.constraint << '\n';
    os << "trials = " << cfg.trials << '\n';
    os << "batch = " << cfg.batch << '\n';
    os << "workers = " << cfg.workers << '\n';
    os << "alpha = " << fmt17(cfg.alpha) << '\n';
    os << "beta = " << fmt17(cfg.beta) << '\n';
    os << "controller_lr = " << fmt17(cfg.controller_lr) << '\n';
    os << "baseline_decay = " << fmt17(cfg.baseline_decay) << '\n';
    os << "baseline_enabled = " << (cfg.baseline_enabled ? 1 : 0) << '\n';
    os << "random_baselines = " << cfg.random_baselines << '\n';
    os << "duty = " << fmt17(cfg.duty) << '\n';
    os << "f_s = " << fmt17(cfg.f_s) << '\n';
    os << "samples_per_op = " << cfg.samples_per_op << '\n';
    os << "noise_rel = " << fmt17(cfg.noise_rel) << '\n';
    os << "sim_substeps = " << cfg.sim_substeps << '\n';
    os << "holdout = " << fmt17(cfg.holdout) << '\n';
    os << "lambda_ref_offset = " << fmt17(cfg.lambda_ref_offset) << '\n';
    const auto& names = physics::PhysParams::names();
    for (int j = 0; j < physics::kNumParams; ++j) {
        os << names[j] << " = " << fmt17(cfg.nominal[j]) << '\n';
    }
    return os.str();
}

void ensure_out_dir(const RunConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out, ec);
    if (ec) throw IoError("cannot create output directory", cfg.out.string());
}

std::string format_mae(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

int cmd_simulate(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    auto ops = data::default_ops(cfg.duty, cfg.f_s);
    data::Dataset ds = data::generate_synthetic(
        cfg.nominal, ops, static_cast<std::size_t>(cfg.samples_per_op), cfg.noise_rel, cfg.seed,
        static_cast<std::size_t>(cfg.sim_substeps));
    std::filesystem::path csv = cfg.out / "dataset.csv";
    data::save_csv(ds, csv);

    std::ofstream manifest(cfg.out / "manifest.txt");
    if (!manifest) throw IoError("cannot open for writing", (cfg.out / "manifest.txt").string());
    manifest << "tool = pinnsearch " << kToolVersion << '\n';
    manifest << "command = simulate\n";
    manifest << config_snapshot(cfg);

    std::cout << "wrote " << ds.size() << " samples to " << csv.string() << '\n';
    std::cout << "ground truth: " << data::truth_path(csv).string() << '\n';
    return kExitOk;
}

/// Deterministic holdout split: the held-out indices are drawn without
/// replacement from a seed-derived stream.
std::pair<data::Dataset, data::Dataset> split_holdout(const data::Dataset& ds, double fraction,
                                                      std::uint64_t seed) {
    std::size_t n_hold = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ds.size())));
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t k = 0; k < ds.size(); ++k) idx[k] = k;
    Rng rng(stable_hash(seed, 0x686f6c646f7574ULL));
    for (std::size_t k = ds.size(); k > 1; --k) {
        std::size_t j = rng.next_u64() % k;
        std::swap(idx[k - 1], idx[j]);
    }
    data::Dataset train_ds, hold_ds;
    train_ds.ground_truth = hold_ds.ground_truth = ds.ground_truth;
    train_ds.provenance = ds.provenance + " [train split]";
    hold_ds.provenance = ds.provenance + " [holdout split]";
    std::vector<bool> held(ds.size(), false);
    for (std::size_t k = 0; k < n_hold; ++k) held[idx[k]] = true;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        (held[k] ? hold_ds : train_ds).samples.push_back(ds.samples[k]);
    }
    return {std::move(train_ds), std::move(hold_ds)};
}

int cmd_train(const RunConfig& cfg, const std::string& arch_text) {
    net::ArchSpec arch = net::ArchSpec::parse(arch_text);
    data::Dataset full = data::load_csv(cfg.dataset);
    ensure_out_dir(cfg);

    data::Dataset holdout_ds;
    data::Dataset* train_ds = &full;
    data::Dataset split_train;
    if (cfg.holdout > 0.0) {
        auto parts = split_holdout(full, cfg.holdout, cfg.seed);
        split_train = std::move(parts.first);
        holdout_ds = std::move(parts.second);
        train_ds = &split_train;
    }

    physics::PhysParams lambda_ref = train::offset_reference(cfg.nominal, cfg.lambda_ref_offset);
    train::PinnModel model = train::make_model(arch, *train_ds, lambda_ref, cfg.seed);
    train::TrainResult tr = train::train(std::move(model), *train_ds, cfg.train, cfg.seed);

    std::filesystem::path model_path = cfg.out / "model.txt";
    model_io::save_model({arch, tr.model}, model_path);
    train::save_loss_history(tr.loss_history, cfg.out / "loss_history.csv");

    std::cout << "architecture: " << arch.encode() << '\n';
    std::cout << "param_count: " << tr.model.encoder.scalar_count() << '\n';
    std::cout << "final reconstruction MAE: " << fmt17(tr.final_loss) << '\n';
    if (tr.termination == train::TrainTermination::Diverged) {
        std::cout << "training diverged; reporting the last valid model\n";
    }
    if (!holdout_ds.empty()) {
        double hold = train::reconstruction_loss(tr.model, holdout_ds, cfg.train.decode_substeps);
        std::cout << "holdout reconstruction MAE (" << holdout_ds.size()
                  << " samples): " << fmt17(hold) << '\n';
    }

    if (full.ground_truth) {
        train::MaeReport report = train::evaluate_lambda(tr.model, *full.ground_truth);
        std::string header = format_report_header();
        std::string row = format_report_row("trained", report);
        std::cout << header << row;
        std::ofstream md(cfg.out / "report.md");
        if (!md) throw IoError("cannot open for writing", (cfg.out / "report.md").string());
        md << header << row;
        std::ofstream csv(cfg.out / "report.csv");
        if (!csv) throw IoError("cannot open for writing", (cfg.out / "report.csv").string());
        csv << format_report_csv("trained", report);
    } else {
        std::cout << "dataset has no ground truth; skipping the parameter report\n";
    }
    std::cout << "model written to " << model_path.string() << '\n';
    return kExitOk;
}

int cmd_search(const RunConfig& cfg) {
    if (cfg.constraint == 0) {
        throw ConfigError("search requires a parameter budget: pass --constraint");
    }
    data::Dataset ds = data::load_csv(cfg.dataset);
    ensure_out_dir(cfg);

    search::SearchConfig scfg = cfg.search_config();
    if (!scfg.valid()) throw ConfigError("invalid search configuration");
    physics::PhysParams lambda_ref = train::offset_reference(cfg.nominal, cfg.lambda_ref_offset);
    search::TrainerFn trainer = search::make_pinn_trainer(ds, cfg.train, lambda_ref);

    search::SearchResult result = search::run_search(ds, scfg, cfg.train, trainer);

    std::vector<search::TrialResult> in_trial_order = result.ranked;
    std::sort(in_trial_order.begin(), in_trial_order.end(),
              [](const auto& a, const auto& b) { return a.trial_index < b.trial_index; });
    search::save_search_log(in_trial_order, cfg.out / "search_log.csv");

    std::cout << "trials: " << result.ranked.size() << '\n';
    if (!result.best_feasible_model) {
        std::cout << "no feasible model found under constraint " << cfg.constraint << '\n';
        const auto& top = result.ranked.front();
        std::cout << "best trial (infeasible): trial " << top.trial_index << " arch "
                  << top.arch.encode() << " param_count " << top.param_count << '\n';
        return kExitOk;
    }

    const search::TrialResult* best = nullptr;
    for (const auto& t : result.ranked) {
        if (t.trial_index == *result.best_feasible_trial) {
            best = &t;
            break;
        }
    }
    std::filesystem::path best_path = cfg.out / "best_model.txt";
    model_io::save_model({best->arch, *result.best_feasible_model}, best_path);
    std::cout << "best feasible trial " << best->trial_index << ": arch " << best->arch.encode()
              << '\n';
    std::cout << "param_count " << best->param_count << " (constraint " << cfg.constraint
              << "), reconstruction MAE " << fmt17(best->mae) << ", reward " << fmt17(best->reward)
              << '\n';
    std::cout << "best model written to " << best_path.string() << '\n';

    // Random-architecture baselines trained with the identical budget.
    search::SearchConfig rcfg = scfg;
    rcfg.seed = stable_hash(cfg.seed, 0x52504e4eULL);  // independent of the search trials
    std::vector<search::TrialResult> random_trials =
        search::random_search(ds, cfg.random_baselines, rcfg, cfg.train, trainer);

    std::cout << '\n' << "search vs random baselines (same training budget):\n";
    std::cout << "| model | param_count | recon MAE | reward |\n";
    std::cout << "|---|---|---|---|\n";
    auto print_cmp = [&](const std::string& label, const search::TrialResult& t) {
        std::cout << "| " << label << " | " << t.param_count << " | " << fmt17(t.mae) << " | "
                  << fmt17(t.reward) << " |\n";
    };
    print_cmp("searched-best", *best);
    for (std::size_t k = 0; k < random_trials.size(); ++k) {
        print_cmp("random-" + std::to_string(k + 1), random_trials[k]);
    }

    if (ds.ground_truth) {
        train::MaeReport report = train::evaluate_lambda(*result.best_feasible_model,
                                                         *ds.ground_truth);
        std::cout << '\n' << format_report_header() << format_report_row("searched-best", report);
        std::ofstream md(cfg.out / "report.md");
        if (md) {
            md << format_report_header() << format_report_row("searched-best", report);
        }
    }
    return kExitOk;
}

int cmd_evaluate(const std::filesystem::path& model_path,
                 const std::filesystem::path& truth_file) {
    model_io::SavedModel saved = model_io::load_model(model_path);
    physics::PhysParams truth = data::load_truth(truth_file);
    train::MaeReport report = train::evaluate_lambda(saved.model, truth);
    std::cout << format_report_header() << format_report_row(model_path.stem().string(), report);
    std::cout << format_report_csv(model_path.stem().string(), report);
    return kExitOk;
}

int cmd_report(const std::filesystem::path& log_path, int top) {
    std::vector<search::TrialResult> trials = search::load_search_log(log_path);
    if (trials.empty()) {
        std::cout << "empty search log\n";
        return kExitOk;
    }
    std::stable_sort(trials.begin(), trials.end(), [](const auto& a, const auto& b) {
        if (a.feasible != b.feasible) return a.feasible;
        if (a.reward != b.reward) return a.reward > b.reward;
        return a.trial_index < b.trial_index;
    });
    std::cout << "| rank | trial | arch | param_count | recon MAE | reward | feasible |\n";
    std::cout << "|---|---|---|---|---|---|---|\n";
    int shown = 0;
    for (const auto& t : trials) {
        if (shown++ >= top) break;
        std::cout << "| " << shown << " | " << t.trial_index << " | " << t.arch.encode() << " | "
                  << t.param_count << " | " << fmt17(t.mae) << " | " << fmt17(t.reward) << " | "
                  << (t.feasible ? "yes" : "no") << " |\n";
    }
    return kExitOk;
}

}  // namespace

std::string format_report_header() {
    std::ostringstream os;
    os << "| Model | Average MAE | # Param |";
    for (const auto& name : physics::PhysParams::names()) os << ' ' << name << " |";
    os << '\n';
    os << "|---|---|---|";
    for (int j = 0; j < physics::kNumParams; ++j) os << "---|";
    os << '\n';
    return os.str();
}

std::string format_report_row(const std::string& label, const train::MaeReport& report) {
    std::ostringstream os;
    os << "| " << label << " | " << format_mae(report.average) << " | " << report.param_count
       << " |";
    for (int j = 0; j < physics::kNumParams; ++j) os << ' ' << format_mae(report.per_param[j]) << " |";
    os << '\n';
    return os.str();
}

std::string format_report_csv(const std::string& label, const train::MaeReport& report) {
    std::ostringstream os;
    os << "model,average_mae,param_count";
    for (const auto& name : physics::PhysParams::names()) os << ',' << name;
    os << '\n' << label << ',' << fmt17(report.average) << ',' << report.param_count;
    for (int j = 0; j < physics::kNumParams; ++j) os << ',' << fmt17(report.per_param[j]);
    os << '\n';
    return os.str();
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Resource-aware architecture search for Buck-converter PINNs"};
    app.require_subcommand(1);

    std::string config_path;

    // Flag layer: collected as strings and funneled through apply_key_value
    // so the precedence chain (flag > file > default) has one code path.
    struct FlagSpec {
        std::string flag;
        std::string key;
    };
    const std::vector<FlagSpec> common_flags = {
        {"--seed", "seed"},           {"--out", "out"},
        {"--data", "dataset"},        {"--constraint", "constraint"},
        {"--trials", "trials"},       {"--batch", "batch"},
        {"--workers", "workers"},     {"--epochs", "epochs"},
        {"--samples-per-op", "samples_per_op"},
        {"--noise-rel", "noise_rel"}, {"--holdout", "holdout"},
        {"--random-baselines", "random_baselines"},
    };

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic peak dataset");
    auto* train_cmd = app.add_subcommand("train", "train one architecture on a dataset");
    auto* search_cmd = app.add_subcommand("search", "run the architecture search");
    auto* evaluate = app.add_subcommand("evaluate", "report parameter MAE of a saved model");
    auto* report = app.add_subcommand("report", "render a search log as a ranked table");

    std::map<CLI::App*, std::map<std::string, std::string>> flag_values;
    for (auto* sub : {simulate, train_cmd, search_cmd, evaluate, report}) {
        sub->add_option("--config", config_path, "flat key = value configuration file");
        for (const auto& fs : common_flags) {
            sub->add_option_function<std::string>(
                fs.flag,
                [&flag_values, sub, key = fs.key](const std::string& v) {
                    flag_values[sub][key] = v;
                },
                "overrides config key '" + fs.key + "'");
        }
    }

    std::string arch_text;
    train_cmd->add_option("--arch", arch_text,
                          "architecture as 10 tokens: units,act x5, e.g. 40,tanh,...,40,tanh")
        ->required();

    std::string eval_model, eval_truth;
    evaluate->add_option("model", eval_model, "model file")->required();
    evaluate->add_option("truth", eval_truth, "ground-truth parameter file")->required();

    std::string report_log;
    int report_top = 10;
    report->add_option("log", report_log, "search log CSV")->required();
    report->add_option("--top", report_top, "rows to show");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        CLI::App* active = app.get_subcommands().front();
        for (const auto& [key, value] : flag_values[active]) {
            apply_key_value(cfg, key, value);
        }

        if (active == simulate) return cmd_simulate(cfg);
        if (active == train_cmd) return cmd_train(cfg, arch_text);
        if (active == search_cmd) return cmd_search(cfg);
        if (active == evaluate) return cmd_evaluate(eval_model, eval_truth);
        if (active == report) return cmd_report(report_log, report_top);
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const MissingColumnError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace pinnsearch::cli
