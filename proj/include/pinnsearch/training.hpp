#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "pinnsearch/data.hpp"
#include "pinnsearch/network.hpp"
#include "pinnsearch/optim.hpp"
#include "pinnsearch/physics.hpp"

namespace pinnsearch::train {

struct TrainConfig {
    double adam_lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 2000;
    int lbfgs_history = 10;
    int lbfgs_max_iter = 500;
    double lbfgs_grad_tol = 1e-8;
    double lbfgs_rel_tol = 1e-10;
    int decode_substeps = 16;

    bool valid() const;
};

/// Encoder weights plus the trainable physics parameters in log-scale form:
/// lambda_j = lambda_ref_j * exp(log_scales[j]), positive by construction.
struct PinnModel {
    net::MlpParams encoder;
    std::array<double, physics::kNumParams> log_scales{};
    physics::PhysParams lambda_ref;
    data::InputStats input_stats;

    physics::PhysParams lambda() const;
};

/// Reference magnitudes offset from `base` by a uniform relative factor, so
/// training never starts at the answer.
physics::PhysParams offset_reference(const physics::PhysParams& base, double rel_offset);

/// Builds a PinnModel for `arch`: encoder from `seed`, log_scales zero,
/// input statistics from the dataset.
PinnModel make_model(const net::ArchSpec& arch, const data::Dataset& dataset,
                     const physics::PhysParams& lambda_ref, std::uint64_t seed);

struct LossGrads {
    net::MlpGrads encoder;
    std::array<double, physics::kNumParams> log_scales{};
};

/// Mean absolute reconstruction error over samples and the two features, in
/// physical units. When `grads` is given, also computes exact reverse-mode
/// gradients w.r.t. every trainable scalar.
double reconstruction_loss(const PinnModel& model, const data::Dataset& dataset,
                           int decode_substeps, LossGrads* grads = nullptr);

/// Flat parameter vector: encoder scalars (layer order, column-major within
/// a matrix, then bias) followed by the 10 log_scales.
Eigen::VectorXd pack(const PinnModel& model);
void unpack(const Eigen::VectorXd& flat, PinnModel& model);
Eigen::VectorXd pack_grads(const PinnModel& model, const LossGrads& grads);

enum class TrainTermination { Completed, Diverged };

struct TrainResult {
    PinnModel model;
    std::vector<double> loss_history;  // adam epochs, then accepted L-BFGS iterates
    double final_loss = 0.0;
    TrainTermination termination = TrainTermination::Completed;
    LbfgsStop lbfgs_reason = LbfgsStop::MaxIter;
    std::uint64_t seed = 0;
};

/// Full-batch Adam for exactly config.epochs steps, then one joint L-BFGS
/// run over encoder weights and log_scales. If decode diverges the step is
/// rejected, +inf is recorded, and the last valid model is returned.
TrainResult train(PinnModel model, const data::Dataset& dataset, const TrainConfig& config,
                  std::uint64_t seed);

/// Per-parameter mean absolute percentage error of the estimated lambda.
struct MaeReport {
    std::array<double, physics::kNumParams> per_param{};  // percent
    double average = 0.0;                                 // percent
    std::size_t param_count = 0;                          // NN scalars only
};

MaeReport evaluate_lambda(const PinnModel& model, const physics::PhysParams& ground_truth);

/// Writes "epoch,loss" rows covering the Adam phase and L-BFGS iterates.
void save_loss_history(const std::vector<double>& history, const std::filesystem::path& path);

}  // namespace pinnsearch::train
