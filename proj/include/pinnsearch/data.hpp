#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pinnsearch/physics.hpp"

namespace pinnsearch::data {

/// One observable pair: the peak inductor current and peak output voltage,
/// plus the operating metadata it was measured under.
struct Sample {
    double i_peak = 0.0;
    double u_peak = 0.0;
    physics::OperatingPoint op;
};

struct InputStats {
    std::array<double, 2> mean{};    // (i_peak, u_peak)
    std::array<double, 2> stddev{};  // population; zero-variance clamped to 1
};

struct Dataset {
    std::vector<Sample> samples;
    std::string provenance;
    std::optional<physics::PhysParams> ground_truth;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// The three-load operating grid of the default synthetic dataset.
std::vector<physics::OperatingPoint> default_ops(double duty = 0.5, double f_s = 50e3);

/// Simulates each operating point to steady state, extracts the peaks, and
/// emits samples_per_op noisy copies per point (relative Gaussian noise).
/// Stores true_params as ground truth. Defaults give 3 x 120 = 360 samples.
Dataset generate_synthetic(const physics::PhysParams& true_params,
                           const std::vector<physics::OperatingPoint>& ops,
                           std::size_t samples_per_op, double noise_rel, std::uint64_t seed,
                           std::size_t sim_substeps = 1000, std::size_t max_cycles = 4000);

/// CSV with header sample_id,i_peak,u_peak,load_index,duty,f_s at 17
/// significant digits; ground truth goes to a sibling file keyed by the ten
/// parameter names. load(save(d)) round-trips bit-exactly.
void save_csv(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

/// Path of the ground-truth sibling for a dataset path (extension -> .truth).
std::filesystem::path truth_path(const std::filesystem::path& dataset_path);

void save_truth(const physics::PhysParams& params, const std::filesystem::path& path);
physics::PhysParams load_truth(const std::filesystem::path& path);

/// Per-feature mean and population standard deviation of (i_peak, u_peak).
/// Throws TooFewSamplesError below 2 samples; clamps zero stddev to 1 with a
/// warning on stderr.
InputStats input_stats(const Dataset& dataset);

}  // namespace pinnsearch::data
