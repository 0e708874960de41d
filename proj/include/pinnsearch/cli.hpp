#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pinnsearch/data.hpp"
#include "pinnsearch/physics.hpp"
#include "pinnsearch/search.hpp"
#include "pinnsearch/training.hpp"

namespace pinnsearch::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Exit codes: 0 success, 2 config/parse error, 3 IO error, 4 numerical.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

/// Merged run configuration. Every field has a default; a config file
/// overrides defaults; command-line flags override the file.
struct RunConfig {
    std::uint64_t seed = 42;
    std::filesystem::path out = "out";
    std::filesystem::path dataset = "out/dataset.csv";

    // training
    train::TrainConfig train;

    // search
    std::size_t constraint = 0;  // P0; must be set for `search`
    int trials = 200;
    int batch = 5;
    int workers = 0;  // 0 = hardware concurrency
    double alpha = -0.02;
    double beta = -0.1;
    double controller_lr = 2e-2;
    double baseline_decay = 0.95;
    bool baseline_enabled = true;
    int random_baselines = 3;

    // synthetic data generation
    physics::PhysParams nominal = physics::PhysParams::nominal();
    double duty = 0.5;
    double f_s = 50e3;
    int samples_per_op = 120;
    double noise_rel = 1e-3;
    int sim_substeps = 1000;
    double holdout = 0.0;  // optional reconstruction holdout fraction

    // lambda reference offset used when initializing trainable scales
    double lambda_ref_offset = 0.2;

    search::SearchConfig search_config() const;
};

/// Flat `key = value` config file; '#' starts a comment. Unknown keys are
/// rejected so typos cannot silently vanish. Throws ParseError/ConfigError.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Applies one key=value assignment (the config file grammar and the flag
/// layer share this). Throws ConfigError for unknown keys or bad values.
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Table-shaped markdown report: Average MAE, # Param, then the ten
/// parameters in fixed order.
std::string format_report_header();
std::string format_report_row(const std::string& label, const train::MaeReport& report);
/// Machine-readable one-line CSV of the same values.
std::string format_report_csv(const std::string& label, const train::MaeReport& report);

/// CLI entry point used by main() and by tests.
int run_cli(int argc, const char* const* argv);

}  // namespace pinnsearch::cli
