#include "pinnsearch/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace pinnsearch::train {

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               const AdamConfig& cfg, long t) {
    if (state.empty()) state.init(params.size());
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    Eigen::ArrayXd m_hat = state.m.array() / bc1;
    Eigen::ArrayXd v_hat = state.v.array() / bc2;
    params.array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
}

std::string_view to_string(LbfgsStop reason) {
    switch (reason) {
        case LbfgsStop::GradTol: return "grad_tol";
        case LbfgsStop::RelTol: return "rel_tol";
        case LbfgsStop::MaxIter: return "max_iter";
        case LbfgsStop::LineSearchFailure: return "line_search_failure";
    }
    return "unknown";
}

LbfgsResult lbfgs_minimize(const ObjectiveFn& fg, Eigen::VectorXd x0, const LbfgsConfig& cfg) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd g(n);
    double fx = fg(x, g);

    LbfgsResult best;
    best.x = x;
    best.fx = fx;
    best.iterations = 0;

    if (!std::isfinite(fx)) {
        best.reason = LbfgsStop::LineSearchFailure;
        return best;
    }
    if (g.norm() < cfg.grad_tol) {
        best.reason = LbfgsStop::GradTol;
        return best;
    }

    struct Pair {
        Eigen::VectorXd s, y;
        double rho;
    };
    std::deque<Pair> mem;

    Eigen::VectorXd g_new(n);
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        // Two-loop recursion for d = -H*g.
        Eigen::VectorXd q = g;
        std::vector<double> alpha(mem.size());
        for (int k = static_cast<int>(mem.size()) - 1; k >= 0; --k) {
            alpha[k] = mem[k].rho * mem[k].s.dot(q);
            q -= alpha[k] * mem[k].y;
        }
        if (!mem.empty()) {
            const Pair& last = mem.back();
            q *= last.s.dot(last.y) / last.y.dot(last.y);
        }
        for (std::size_t k = 0; k < mem.size(); ++k) {
            double beta = mem[k].rho * mem[k].y.dot(q);
            q += (alpha[k] - beta) * mem[k].s;
        }
        Eigen::VectorXd d = -q;

        double gd = g.dot(d);
        if (!(gd < 0.0)) {  // not a descent direction; fall back to steepest descent
            d = -g;
            gd = -g.squaredNorm();
        }

        // Armijo backtracking.
        double step = mem.empty() ? 1.0 / std::max(1.0, g.norm()) : 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        bool accepted = false;
        for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
            x_new = x + step * d;
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= fx + cfg.armijo_c1 * step * gd) {
                accepted = true;
                break;
            }
            step *= cfg.backtrack;
        }
        if (!accepted) {
            best.reason = LbfgsStop::LineSearchFailure;
            best.iterations = iter;
            return best;
        }

        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd y = g_new - g;
        double ys = y.dot(s);
        if (ys > 1e-10) {
            mem.push_back({std::move(s), std::move(y), 1.0 / ys});
            if (static_cast<int>(mem.size()) > cfg.history) mem.pop_front();
        }

        double f_prev = fx;
        x = std::move(x_new);
        fx = f_new;
        g = g_new;

        if (fx < best.fx) {
            best.x = x;
            best.fx = fx;
        }
        best.iterations = iter;

        if (g.norm() < cfg.grad_tol) {
            best.reason = LbfgsStop::GradTol;
            return best;
        }
        if (std::fabs(f_prev - fx) < cfg.rel_tol * std::max(1.0, std::fabs(f_prev))) {
            best.reason = LbfgsStop::RelTol;
            return best;
        }
    }
    best.reason = LbfgsStop::MaxIter;
    return best;
}

}  // namespace pinnsearch::train
