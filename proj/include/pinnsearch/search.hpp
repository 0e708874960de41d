#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pinnsearch/data.hpp"
#include "pinnsearch/network.hpp"
#include "pinnsearch/optim.hpp"
#include "pinnsearch/rng.hpp"
#include "pinnsearch/training.hpp"

namespace pinnsearch::search {

/// Controller dimensions and the decision menus. The defaults match the
/// production search space; tests shrink them to enumerate exhaustively.
struct ControllerConfig {
    int hidden_dim = 64;
    int embed_dim = 32;
    std::vector<int> units_menu{net::kUnitsMenu.begin(), net::kUnitsMenu.end()};
    std::vector<net::Activation> act_menu{net::Activation::Tanh, net::Activation::Relu};
    int num_layers = net::kMaxLayers;

    int tokens() const {
        return static_cast<int>(units_menu.size() + act_menu.size());
    }
    int decisions() const { return 2 * num_layers; }
};

/// Autoregressive RNN controller: a single tanh recurrent cell with two
/// softmax heads, one for the units choice and one for the activation.
struct ControllerParams {
    ControllerConfig cfg;
    Eigen::VectorXd start_embed;  // embed_dim, input of step 1
    Eigen::MatrixXd token_embed;  // tokens x embed_dim, input after a decision
    Eigen::MatrixXd W_xh;         // embed_dim x hidden_dim
    Eigen::MatrixXd W_hh;         // hidden_dim x hidden_dim
    Eigen::VectorXd b_h;          // hidden_dim
    Eigen::MatrixXd W_units;      // hidden_dim x |units_menu|
    Eigen::VectorXd b_units;
    Eigen::MatrixXd W_act;        // hidden_dim x |act_menu|
    Eigen::VectorXd b_act;

    std::size_t scalar_count() const;
};

/// Head weights start at zero so the initial policy is exactly uniform;
/// embeddings and the recurrent cell get small deterministic random values.
ControllerParams init_controller(const ControllerConfig& cfg, std::uint64_t seed);

/// A sampled architecture plus the interleaved decision indices
/// (units_0, act_0, units_1, act_1, ...) and their log-probabilities.
struct ArchSample {
    net::ArchSpec arch;
    std::vector<int> decisions;
    std::vector<double> log_probs;
};

ArchSample sample_arch(const ControllerParams& controller, Rng& rng);
ArchSample sample_arch(const ControllerParams& controller, std::uint64_t seed);

/// Log-probability of each decision along a forced path; summing gives
/// log P(arch | theta).
std::vector<double> arch_log_probs(const ControllerParams& controller,
                                   const std::vector<int>& decisions);

/// Hardware-aware reward: (1/mae) * (param_count/P0)^w with w = alpha on the
/// feasible side and beta above the budget. Non-finite or non-positive mae
/// (the divergence sentinel) maps to reward 0.
double reward_fn(double mae, std::size_t param_count, std::size_t P0, double alpha, double beta);

struct SearchConfig {
    std::size_t P0 = 16000;
    double alpha = -0.02;
    double beta = -0.1;
    int trials = 200;
    int batch = 5;
    /// Adam step for the controller. Sized so the policy moves within a
    /// 50-trial budget (ten batch updates); see the search tests.
    double controller_lr = 2e-2;
    double baseline_decay = 0.95;
    /// Frozen-at-zero baseline recovers the unbaselined REINFORCE rule.
    bool baseline_enabled = true;
    std::uint64_t seed = 0;
    int workers = 1;

    bool valid() const;
};

/// One completed search trial.
struct TrialResult {
    int trial_index = 0;
    net::ArchSpec arch;
    std::vector<int> decisions;
    double mae = 0.0;  // reconstruction MAE, physical units; +inf if diverged
    std::size_t param_count = 0;
    double reward = 0.0;
    bool feasible = false;
    std::uint64_t seed = 0;
    std::string termination;
};

struct BaselineState {
    double value = 0.0;
    bool initialized = false;
};

/// Gradients mirroring ControllerParams, as one flat vector (pack order is
/// fixed by pack_controller below).
Eigen::VectorXd pack_controller(const ControllerParams& c);
void unpack_controller(const Eigen::VectorXd& flat, ControllerParams& c);

/// Flat gradient of sum_t log P(c_t) * weight for one decision sequence.
Eigen::VectorXd logprob_gradient(const ControllerParams& controller,
                                 const std::vector<int>& decisions, double weight);

/// One REINFORCE ascent step on the batch: advantage = R - baseline (EMA),
/// gradient averaged over the batch, applied with Adam. The baseline is
/// updated after the gradient is computed.
void reinforce_update(ControllerParams& controller, train::AdamState& adam_state, long& adam_t,
                      const std::vector<TrialResult>& batch, BaselineState& baseline,
                      const SearchConfig& cfg);

/// What the search loop needs back from one candidate evaluation.
struct TrialOutcome {
    double mae = 0.0;
    std::size_t param_count = 0;
    std::string termination;
    std::optional<train::PinnModel> model;
};

/// Candidate evaluator: trains `arch` with the given per-trial seed.
using TrainerFn = std::function<TrialOutcome(const net::ArchSpec& arch, std::uint64_t seed)>;

/// The production trainer: builds a PinnModel and runs training.train.
TrainerFn make_pinn_trainer(const data::Dataset& dataset, const train::TrainConfig& tcfg,
                            const physics::PhysParams& lambda_ref);

struct SearchResult {
    /// All trials, feasible first, then reward descending.
    std::vector<TrialResult> ranked;
    std::optional<train::PinnModel> best_feasible_model;
    std::optional<int> best_feasible_trial;
};

/// REINFORCE search loop: ceil(trials/batch) rounds of sample / train /
/// reward / update. Per-trial seed is stable_hash(cfg.seed, trial_index), so
/// the ranked output is independent of the worker schedule.
SearchResult run_search(const data::Dataset& dataset, const SearchConfig& cfg,
                        const train::TrainConfig& tcfg, TrainerFn trainer = {});

/// Uniform-random architecture baseline with the same per-trial seeding
/// scheme, for search-vs-random comparisons.
std::vector<TrialResult> random_search(const data::Dataset& dataset, int trials,
                                       const SearchConfig& cfg, const train::TrainConfig& tcfg,
                                       TrainerFn trainer = {});

/// Writes the per-trial CSV log (one row per trial, in trial order).
void save_search_log(const std::vector<TrialResult>& trials, const std::filesystem::path& path);
std::vector<TrialResult> load_search_log(const std::filesystem::path& path);

}  // namespace pinnsearch::search
