#include "pinnsearch/training.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "pinnsearch/errors.hpp"

namespace pinnsearch::train {

bool TrainConfig::valid() const {
    return adam_lr > 0 && adam_beta1 > 0 && adam_beta1 < 1 && adam_beta2 > 0 && adam_beta2 < 1 &&
           adam_eps > 0 && epochs >= 0 && lbfgs_history > 0 && lbfgs_max_iter >= 0 &&
           lbfgs_grad_tol > 0 && lbfgs_rel_tol > 0 && decode_substeps >= 1;
}

physics::PhysParams PinnModel::lambda() const {
    physics::PhysParams p;
    for (int j = 0; j < physics::kNumParams; ++j) {
        p[j] = lambda_ref[j] * std::exp(log_scales[j]);
    }
    return p;
}

physics::PhysParams offset_reference(const physics::PhysParams& base, double rel_offset) {
    physics::PhysParams p;
    for (int j = 0; j < physics::kNumParams; ++j) p[j] = base[j] * (1.0 + rel_offset);
    return p;
}

PinnModel make_model(const net::ArchSpec& arch, const data::Dataset& dataset,
                     const physics::PhysParams& lambda_ref, std::uint64_t seed) {
    PinnModel model;
    model.encoder = net::build(arch, 2, 2, seed);
    model.lambda_ref = lambda_ref;
    model.input_stats = data::input_stats(dataset);
    return model;
}

double reconstruction_loss(const PinnModel& model, const data::Dataset& dataset,
                           int decode_substeps, LossGrads* grads) {
    const std::size_t n = dataset.size();
    if (n == 0) throw TooFewSamplesError("reconstruction loss needs a non-empty dataset");

    const auto& st = model.input_stats;
    Eigen::MatrixXd X(n, 2);
    for (std::size_t k = 0; k < n; ++k) {
        X(static_cast<Eigen::Index>(k), 0) = (dataset.samples[k].i_peak - st.mean[0]) / st.stddev[0];
        X(static_cast<Eigen::Index>(k), 1) = (dataset.samples[k].u_peak - st.mean[1]) / st.stddev[1];
    }

    net::ForwardCache cache;
    Eigen::MatrixXd H = net::forward(model.encoder, X, grads ? &cache : nullptr);

    const physics::PhysParams lambda = model.lambda();
    const double inv = 1.0 / (2.0 * static_cast<double>(n));

    double loss = 0.0;
    Eigen::MatrixXd dH;
    std::array<double, physics::kNumParams> d_lambda{};
    if (grads) dH = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2);

    for (std::size_t k = 0; k < n; ++k) {
        const data::Sample& s = dataset.samples[k];
        const Eigen::Index r = static_cast<Eigen::Index>(k);
        // Fixed affine map from latent units back to physical units; with an
        // all-zero encoder the decoder starts from the mean operating point.
        physics::ConverterState latent{st.mean[0] + st.stddev[0] * H(r, 0),
                                       st.mean[1] + st.stddev[1] * H(r, 1)};
        physics::Peaks pred = physics::decode(latent, lambda, s.op, decode_substeps);
        double res_i = pred.i_peak - s.i_peak;
        double res_u = pred.u_peak - s.u_peak;
        loss += inv * (std::fabs(res_i) + std::fabs(res_u));
        if (grads) {
            auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
            physics::DecodeGrads dg = physics::decode_gradients(
                latent, lambda, s.op, decode_substeps, inv * sign(res_i), inv * sign(res_u));
            dH(r, 0) = dg.d_i0 * st.stddev[0];
            dH(r, 1) = dg.d_u0 * st.stddev[1];
            for (int j = 0; j < physics::kNumParams; ++j) d_lambda[j] += dg.d_params[j];
        }
    }

    if (grads) {
        grads->encoder.init_like(model.encoder);
        net::backward(model.encoder, cache, dH, grads->encoder);
        // d loss / d s_j = d loss / d lambda_j * lambda_j  (log-scale chain)
        for (int j = 0; j < physics::kNumParams; ++j) {
            grads->log_scales[j] = d_lambda[j] * lambda[j];
        }
    }
    return loss;
}

Eigen::VectorXd pack(const PinnModel& model) {
    Eigen::VectorXd flat(model.encoder.scalar_count() + physics::kNumParams);
    Eigen::Index at = 0;
    for (const auto& l : model.encoder.layers) {
        flat.segment(at, l.W.size()) = Eigen::Map<const Eigen::VectorXd>(l.W.data(), l.W.size());
        at += l.W.size();
        flat.segment(at, l.b.size()) = l.b;
        at += l.b.size();
    }
    for (int j = 0; j < physics::kNumParams; ++j) flat[at++] = model.log_scales[j];
    return flat;
}

void unpack(const Eigen::VectorXd& flat, PinnModel& model) {
    Eigen::Index at = 0;
    for (auto& l : model.encoder.layers) {
        Eigen::Map<Eigen::VectorXd>(l.W.data(), l.W.size()) = flat.segment(at, l.W.size());
        at += l.W.size();
        l.b = flat.segment(at, l.b.size());
        at += l.b.size();
    }
    for (int j = 0; j < physics::kNumParams; ++j) model.log_scales[j] = flat[at++];
}

Eigen::VectorXd pack_grads(const PinnModel& model, const LossGrads& grads) {
    Eigen::VectorXd flat(model.encoder.scalar_count() + physics::kNumParams);
    Eigen::Index at = 0;
    for (std::size_t li = 0; li < model.encoder.layers.size(); ++li) {
        const auto& dW = grads.encoder.dW[li];
        const auto& db = grads.encoder.db[li];
        flat.segment(at, dW.size()) = Eigen::Map<const Eigen::VectorXd>(dW.data(), dW.size());
        at += dW.size();
        flat.segment(at, db.size()) = db;
        at += db.size();
    }
    for (int j = 0; j < physics::kNumParams; ++j) flat[at++] = grads.log_scales[j];
    return flat;
}

TrainResult train(PinnModel model, const data::Dataset& dataset, const TrainConfig& config,
                  std::uint64_t seed) {
    TrainResult result;
    result.seed = seed;

    Eigen::VectorXd params = pack(model);
    const double inf = std::numeric_limits<double>::infinity();

    // Evaluates loss+grad at `x`; returns +inf (zero grad) on divergence so
    // both optimizers treat the step as unacceptable instead of dying.
    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) -> double {
        unpack(x, model);
        LossGrads lg;
        try {
            double loss = reconstruction_loss(model, dataset, config.decode_substeps, &lg);
            grad = pack_grads(model, lg);
            return loss;
        } catch (const DivergenceError&) {
            grad = Eigen::VectorXd::Zero(x.size());
            return inf;
        }
    };

    AdamConfig adam_cfg{config.adam_lr, config.adam_beta1, config.adam_beta2, config.adam_eps};
    AdamState adam;
    Eigen::VectorXd grad(params.size());
    result.loss_history.reserve(static_cast<std::size_t>(config.epochs) + 64);

    Eigen::VectorXd last_valid = params;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double loss = objective(params, grad);
        if (!std::isfinite(loss)) {
            // reject the offending step: return the last parameters that
            // still evaluated to a finite loss
            result.loss_history.push_back(inf);
            unpack(last_valid, model);
            result.model = model;
            result.final_loss =
                result.loss_history.size() > 1
                    ? result.loss_history[result.loss_history.size() - 2]
                    : inf;
            result.termination = TrainTermination::Diverged;
            return result;
        }
        last_valid = params;
        result.loss_history.push_back(loss);
        adam_step(adam, params, grad, adam_cfg, epoch);
    }

    LbfgsConfig lcfg;
    lcfg.history = config.lbfgs_history;
    lcfg.max_iter = config.lbfgs_max_iter;
    lcfg.grad_tol = config.lbfgs_grad_tol;
    lcfg.rel_tol = config.lbfgs_rel_tol;

    double adam_final = objective(params, grad);
    if (!std::isfinite(adam_final)) {
        result.loss_history.push_back(inf);
        unpack(last_valid, model);
        result.model = model;
        result.final_loss =
            result.loss_history.size() > 1 ? result.loss_history[result.loss_history.size() - 2]
                                           : inf;
        result.termination = TrainTermination::Diverged;
        return result;
    }

    double best_so_far = adam_final;
    auto tracked = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        double f = objective(x, g);
        if (std::isfinite(f) && f < best_so_far) {
            best_so_far = f;
            result.loss_history.push_back(f);
        }
        return f;
    };

    LbfgsResult lres = lbfgs_minimize(tracked, params, lcfg);
    result.lbfgs_reason = lres.reason;

    unpack(lres.x, model);
    result.model = model;
    result.final_loss = lres.fx;
    result.termination = TrainTermination::Completed;
    if (result.loss_history.empty() || result.loss_history.back() != lres.fx) {
        result.loss_history.push_back(lres.fx);
    }
    return result;
}

MaeReport evaluate_lambda(const PinnModel& model, const physics::PhysParams& ground_truth) {
    MaeReport report;
    physics::PhysParams estimate = model.lambda();
    double sum = 0.0;
    for (int j = 0; j < physics::kNumParams; ++j) {
        report.per_param[j] = 100.0 * std::fabs(estimate[j] - ground_truth[j]) / ground_truth[j];
        sum += report.per_param[j];
    }
    report.average = sum / physics::kNumParams;
    report.param_count = model.encoder.scalar_count();
    return report;
}

void save_loss_history(const std::vector<double>& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing", path.string());
    out << "epoch,loss\n";
    for (std::size_t k = 0; k < history.size(); ++k) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", history[k]);
        out << (k + 1) << ',' << buf << '\n';
    }
    if (!out) throw IoError("write failed", path.string());
}

}  // namespace pinnsearch::train
