#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string_view>

namespace pinnsearch::train {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;

    void init(Eigen::Index n) {
        m = Eigen::VectorXd::Zero(n);
        v = Eigen::VectorXd::Zero(n);
    }
    bool empty() const { return m.size() == 0; }
};

/// One bias-corrected Adam update, t is the 1-based step index:
/// params <- params - lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               const AdamConfig& cfg, long t);

/// Objective callback: returns f(x) and fills grad (same size as x).
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

enum class LbfgsStop { GradTol, RelTol, MaxIter, LineSearchFailure };

std::string_view to_string(LbfgsStop reason);

struct LbfgsConfig {
    int history = 10;
    int max_iter = 500;
    double grad_tol = 1e-8;
    double rel_tol = 1e-10;
    double armijo_c1 = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 25;
};

struct LbfgsResult {
    Eigen::VectorXd x;  // best-seen iterate
    double fx = 0.0;    // objective at x
    int iterations = 0;
    LbfgsStop reason = LbfgsStop::MaxIter;
};

/// Limited-memory BFGS with two-loop recursion and Armijo backtracking.
/// Curvature pairs with y's <= 1e-10 are skipped. Always returns the best
/// iterate seen; a failed line search is reported via `reason`, not thrown.
LbfgsResult lbfgs_minimize(const ObjectiveFn& fg, Eigen::VectorXd x0, const LbfgsConfig& cfg);

}  // namespace pinnsearch::train
