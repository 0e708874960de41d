#include "pinnsearch/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "pinnsearch/errors.hpp"

namespace pinnsearch::search {

namespace {

// Stream tags for deriving independent seed streams from the global seed.
constexpr std::uint64_t kControllerInitStream = 0x636f6e74726c3031ULL;
constexpr std::uint64_t kControllerSampleStream = 0x73616d706c653031ULL;
constexpr std::uint64_t kRandomArchStream = 0x72616e6461726368ULL;

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
    Eigen::ArrayXd e = shifted.exp();
    return (e / e.sum()).matrix();
}

}  // namespace

std::size_t ControllerParams::scalar_count() const {
    return static_cast<std::size_t>(start_embed.size() + token_embed.size() + W_xh.size() +
                                    W_hh.size() + b_h.size() + W_units.size() + b_units.size() +
                                    W_act.size() + b_act.size());
}

ControllerParams init_controller(const ControllerConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    ControllerParams c;
    c.cfg = cfg;
    const int H = cfg.hidden_dim;
    const int E = cfg.embed_dim;
    auto fill = [&rng](Eigen::MatrixXd& m, double bound) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index col = 0; col < m.cols(); ++col) {
                m(r, col) = rng.uniform(-bound, bound);
            }
        }
    };
    c.start_embed.resize(E);
    for (int k = 0; k < E; ++k) c.start_embed[k] = rng.uniform(-0.1, 0.1);
    c.token_embed.resize(cfg.tokens(), E);
    fill(c.token_embed, 0.1);
    c.W_xh.resize(E, H);
    fill(c.W_xh, std::sqrt(6.0 / (E + H)));
    c.W_hh.resize(H, H);
    fill(c.W_hh, std::sqrt(6.0 / (H + H)));
    c.b_h = Eigen::VectorXd::Zero(H);
    // Zero heads make the initial policy exactly uniform over both menus.
    c.W_units = Eigen::MatrixXd::Zero(H, static_cast<Eigen::Index>(cfg.units_menu.size()));
    c.b_units = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.units_menu.size()));
    c.W_act = Eigen::MatrixXd::Zero(H, static_cast<Eigen::Index>(cfg.act_menu.size()));
    c.b_act = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.act_menu.size()));
    return c;
}

namespace {

struct StepTape {
    Eigen::VectorXd x;      // input embedding
    Eigen::VectorXd h;      // hidden state after the cell
    Eigen::VectorXd probs;  // softmax of the active head
    int choice = 0;
    bool units_head = true;
    int token = 0;  // token id of the decision, feeds the next step
};

/// Runs the controller over all decision steps. `decide` receives the step
/// probabilities and returns the chosen index (sampling or a forced path).
std::vector<StepTape> run_controller(const ControllerParams& c,
                                     const std::function<int(int, const Eigen::VectorXd&)>& decide) {
    const auto& cfg = c.cfg;
    std::vector<StepTape> tape;
    tape.reserve(static_cast<std::size_t>(cfg.decisions()));
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg.hidden_dim);
    Eigen::VectorXd x = c.start_embed;
    for (int step = 0; step < cfg.decisions(); ++step) {
        StepTape st;
        st.x = x;
        st.units_head = (step % 2 == 0);
        h = (c.W_xh.transpose() * x + c.W_hh.transpose() * h + c.b_h).array().tanh().matrix();
        st.h = h;
        Eigen::VectorXd logits =
            st.units_head ? (c.W_units.transpose() * h + c.b_units).eval()
                          : (c.W_act.transpose() * h + c.b_act).eval();
        st.probs = softmax(logits);
        st.choice = decide(step, st.probs);
        st.token = st.units_head ? st.choice
                                 : static_cast<int>(cfg.units_menu.size()) + st.choice;
        x = c.token_embed.row(st.token).transpose();
        tape.push_back(std::move(st));
    }
    return tape;
}

ArchSample tape_to_sample(const ControllerParams& c, const std::vector<StepTape>& tape) {
    ArchSample out;
    out.decisions.reserve(tape.size());
    out.log_probs.reserve(tape.size());
    for (const auto& st : tape) {
        out.decisions.push_back(st.choice);
        out.log_probs.push_back(std::log(st.probs[st.choice]));
    }
    for (int layer = 0; layer < c.cfg.num_layers; ++layer) {
        out.arch.layers[layer].units = c.cfg.units_menu[static_cast<std::size_t>(
            out.decisions[static_cast<std::size_t>(2 * layer)])];
        out.arch.layers[layer].act =
            c.cfg.act_menu[static_cast<std::size_t>(out.decisions[static_cast<std::size_t>(2 * layer + 1)])];
    }
    return out;
}

}  // namespace

ArchSample sample_arch(const ControllerParams& controller, Rng& rng) {
    auto tape = run_controller(controller, [&rng](int, const Eigen::VectorXd& probs) {
        return rng.categorical(probs.data(), static_cast<int>(probs.size()));
    });
    return tape_to_sample(controller, tape);
}

ArchSample sample_arch(const ControllerParams& controller, std::uint64_t seed) {
    Rng rng(seed);
    return sample_arch(controller, rng);
}

std::vector<double> arch_log_probs(const ControllerParams& controller,
                                   const std::vector<int>& decisions) {
    auto tape = run_controller(controller, [&decisions](int step, const Eigen::VectorXd&) {
        return decisions[static_cast<std::size_t>(step)];
    });
    std::vector<double> out;
    out.reserve(tape.size());
    for (const auto& st : tape) out.push_back(std::log(st.probs[st.choice]));
    return out;
}

double reward_fn(double mae, std::size_t param_count, std::size_t P0, double alpha, double beta) {
    if (!std::isfinite(mae) || mae <= 0.0) return 0.0;
    double ratio = static_cast<double>(param_count) / static_cast<double>(P0);
    double w = param_count <= P0 ? alpha : beta;
    return (1.0 / mae) * std::pow(ratio, w);
}

bool SearchConfig::valid() const {
    return alpha <= 0.0 && beta <= 0.0 && trials >= batch && batch >= 1 && P0 >= 6 &&
           controller_lr > 0.0 && baseline_decay > 0.0 && baseline_decay < 1.0 && workers >= 1;
}

Eigen::VectorXd pack_controller(const ControllerParams& c) {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(c.scalar_count()));
    Eigen::Index at = 0;
    auto put = [&](const auto& m) {
        flat.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        at += m.size();
    };
    put(c.start_embed);
    put(c.token_embed);
    put(c.W_xh);
    put(c.W_hh);
    put(c.b_h);
    put(c.W_units);
    put(c.b_units);
    put(c.W_act);
    put(c.b_act);
    return flat;
}

void unpack_controller(const Eigen::VectorXd& flat, ControllerParams& c) {
    Eigen::Index at = 0;
    auto get = [&](Eigen::MatrixXd& m) {
        Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(at, m.size());
        at += m.size();
    };
    auto getv = [&](Eigen::VectorXd& v) {
        v = flat.segment(at, v.size());
        at += v.size();
    };
    getv(c.start_embed);
    get(c.token_embed);
    get(c.W_xh);
    get(c.W_hh);
    getv(c.b_h);
    get(c.W_units);
    getv(c.b_units);
    get(c.W_act);
    getv(c.b_act);
}

Eigen::VectorXd logprob_gradient(const ControllerParams& c, const std::vector<int>& decisions,
                                 double weight) {
    auto tape = run_controller(c, [&decisions](int step, const Eigen::VectorXd&) {
        return decisions[static_cast<std::size_t>(step)];
    });

    ControllerParams g;  // gradient accumulator shaped like the parameters
    g.cfg = c.cfg;
    g.start_embed = Eigen::VectorXd::Zero(c.start_embed.size());
    g.token_embed = Eigen::MatrixXd::Zero(c.token_embed.rows(), c.token_embed.cols());
    g.W_xh = Eigen::MatrixXd::Zero(c.W_xh.rows(), c.W_xh.cols());
    g.W_hh = Eigen::MatrixXd::Zero(c.W_hh.rows(), c.W_hh.cols());
    g.b_h = Eigen::VectorXd::Zero(c.b_h.size());
    g.W_units = Eigen::MatrixXd::Zero(c.W_units.rows(), c.W_units.cols());
    g.b_units = Eigen::VectorXd::Zero(c.b_units.size());
    g.W_act = Eigen::MatrixXd::Zero(c.W_act.rows(), c.W_act.cols());
    g.b_act = Eigen::VectorXd::Zero(c.b_act.size());

    const int steps = static_cast<int>(tape.size());
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(c.cfg.hidden_dim);
    for (int s = steps - 1; s >= 0; --s) {
        const StepTape& st = tape[static_cast<std::size_t>(s)];
        // d/dlogits of weight * log softmax[choice] = weight * (onehot - probs)
        Eigen::VectorXd dlogits = -st.probs * weight;
        dlogits[st.choice] += weight;

        Eigen::VectorXd dh = dh_next;
        if (st.units_head) {
            g.W_units += st.h * dlogits.transpose();
            g.b_units += dlogits;
            dh += c.W_units * dlogits;
        } else {
            g.W_act += st.h * dlogits.transpose();
            g.b_act += dlogits;
            dh += c.W_act * dlogits;
        }

        // through h = tanh(W_xh'x + W_hh'h_prev + b_h)
        Eigen::VectorXd dpre = dh.cwiseProduct((1.0 - st.h.array().square()).matrix());
        g.W_xh += st.x * dpre.transpose();
        g.b_h += dpre;
        if (s > 0) {
            const StepTape& prev = tape[static_cast<std::size_t>(s - 1)];
            g.W_hh += prev.h * dpre.transpose();
            dh_next = c.W_hh * dpre;
            // input embedding of this step is the previous decision's token
            g.token_embed.row(prev.token) += (c.W_xh * dpre).transpose();
        } else {
            // h_prev is the zero vector; W_hh gets no contribution here
            dh_next.setZero();
            g.start_embed += c.W_xh * dpre;
        }
    }
    return pack_controller(g);
}

void reinforce_update(ControllerParams& controller, train::AdamState& adam_state, long& adam_t,
                      const std::vector<TrialResult>& batch, BaselineState& baseline,
                      const SearchConfig& cfg) {
    if (batch.empty()) return;
    double mean_reward = 0.0;
    for (const auto& t : batch) mean_reward += t.reward;
    mean_reward /= static_cast<double>(batch.size());

    if (cfg.baseline_enabled && !baseline.initialized) {
        baseline.value = mean_reward;
        baseline.initialized = true;
    }
    const double b = cfg.baseline_enabled ? baseline.value : 0.0;

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(pack_controller(controller).size());
    for (const auto& t : batch) {
        double advantage = t.reward - b;
        if (advantage != 0.0) {
            grad += logprob_gradient(controller, t.decisions, advantage);
        }
    }
    grad /= static_cast<double>(batch.size());

    // ascend the expected reward: Adam descends, so feed the negated gradient
    Eigen::VectorXd params = pack_controller(controller);
    train::AdamConfig acfg;
    acfg.lr = cfg.controller_lr;
    ++adam_t;
    train::adam_step(adam_state, params, (-grad).eval(), acfg, adam_t);
    unpack_controller(params, controller);

    if (cfg.baseline_enabled) {
        baseline.value = cfg.baseline_decay * baseline.value +
                         (1.0 - cfg.baseline_decay) * mean_reward;
    }
}

TrainerFn make_pinn_trainer(const data::Dataset& dataset, const train::TrainConfig& tcfg,
                            const physics::PhysParams& lambda_ref) {
    return [&dataset, tcfg, lambda_ref](const net::ArchSpec& arch,
                                        std::uint64_t seed) -> TrialOutcome {
        train::PinnModel model = train::make_model(arch, dataset, lambda_ref, seed);
        train::TrainResult tr = train::train(std::move(model), dataset, tcfg, seed);
        TrialOutcome out;
        out.param_count = tr.model.encoder.scalar_count();
        out.model = std::move(tr.model);
        if (tr.termination == train::TrainTermination::Diverged) {
            out.mae = std::numeric_limits<double>::infinity();
            out.termination = "diverged";
        } else {
            out.mae = tr.final_loss;
            out.termination = std::string(train::to_string(tr.lbfgs_reason));
        }
        return out;
    };
}

namespace {

/// Evaluates a batch of sampled architectures, optionally across threads.
/// Outcomes land in a vector indexed by position, so the schedule cannot
/// change the result.
std::vector<TrialOutcome> evaluate_batch(const std::vector<ArchSample>& samples,
                                         const std::vector<std::uint64_t>& seeds,
                                         const TrainerFn& trainer, int workers) {
    const std::size_t n = samples.size();
    std::vector<TrialOutcome> outcomes(n);
    if (workers <= 1 || n <= 1) {
        for (std::size_t k = 0; k < n; ++k) outcomes[k] = trainer(samples[k].arch, seeds[k]);
        return outcomes;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto work = [&] {
        while (true) {
            std::size_t k = next.fetch_add(1);
            if (k >= n) return;
            try {
                outcomes[k] = trainer(samples[k].arch, seeds[k]);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    int nthreads = std::min<int>(workers, static_cast<int>(n));
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return outcomes;
}

void rank_trials(std::vector<TrialResult>& trials) {
    std::stable_sort(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
        if (a.feasible != b.feasible) return a.feasible;
        if (a.reward != b.reward) return a.reward > b.reward;
        return a.trial_index < b.trial_index;
    });
}

}  // namespace

SearchResult run_search(const data::Dataset& dataset, const SearchConfig& cfg,
                        const train::TrainConfig& tcfg, TrainerFn trainer) {
    if (!trainer) {
        trainer = make_pinn_trainer(
            dataset, tcfg, train::offset_reference(physics::PhysParams::nominal(), 0.2));
    }

    ControllerParams controller =
        init_controller(ControllerConfig{}, stable_hash(cfg.seed, kControllerInitStream));
    Rng sample_rng(stable_hash(cfg.seed, kControllerSampleStream));
    train::AdamState adam_state;
    long adam_t = 0;
    BaselineState baseline;

    SearchResult result;
    double best_feasible_reward = -1.0;

    int done = 0;
    while (done < cfg.trials) {
        const int batch_n = std::min(cfg.batch, cfg.trials - done);
        std::vector<ArchSample> samples;
        std::vector<std::uint64_t> seeds;
        samples.reserve(static_cast<std::size_t>(batch_n));
        seeds.reserve(static_cast<std::size_t>(batch_n));
        for (int k = 0; k < batch_n; ++k) {
            samples.push_back(sample_arch(controller, sample_rng));
            seeds.push_back(stable_hash(cfg.seed, static_cast<std::uint64_t>(done + k)));
        }

        std::vector<TrialOutcome> outcomes = evaluate_batch(samples, seeds, trainer, cfg.workers);

        std::vector<TrialResult> batch;
        batch.reserve(static_cast<std::size_t>(batch_n));
        for (int k = 0; k < batch_n; ++k) {
            TrialResult t;
            t.trial_index = done + k;
            t.arch = samples[static_cast<std::size_t>(k)].arch;
            t.decisions = samples[static_cast<std::size_t>(k)].decisions;
            t.mae = outcomes[static_cast<std::size_t>(k)].mae;
            t.param_count = outcomes[static_cast<std::size_t>(k)].param_count;
            t.reward = reward_fn(t.mae, t.param_count, cfg.P0, cfg.alpha, cfg.beta);
            t.feasible = t.param_count <= cfg.P0;
            t.seed = seeds[static_cast<std::size_t>(k)];
            t.termination = outcomes[static_cast<std::size_t>(k)].termination;
            if (t.feasible && t.reward > best_feasible_reward &&
                outcomes[static_cast<std::size_t>(k)].model) {
                best_feasible_reward = t.reward;
                result.best_feasible_model = outcomes[static_cast<std::size_t>(k)].model;
                result.best_feasible_trial = t.trial_index;
            }
            batch.push_back(std::move(t));
        }

        reinforce_update(controller, adam_state, adam_t, batch, baseline, cfg);
        for (auto& t : batch) result.ranked.push_back(std::move(t));
        done += batch_n;
    }

    rank_trials(result.ranked);
    return result;
}

std::vector<TrialResult> random_search(const data::Dataset& dataset, int trials,
                                       const SearchConfig& cfg, const train::TrainConfig& tcfg,
                                       TrainerFn trainer) {
    if (!trainer) {
        trainer = make_pinn_trainer(
            dataset, tcfg, train::offset_reference(physics::PhysParams::nominal(), 0.2));
    }
    ControllerConfig ccfg;
    Rng arch_rng(stable_hash(cfg.seed, kRandomArchStream));

    std::vector<ArchSample> samples;
    std::vector<std::uint64_t> seeds;
    samples.reserve(static_cast<std::size_t>(trials));
    seeds.reserve(static_cast<std::size_t>(trials));
    for (int k = 0; k < trials; ++k) {
        ArchSample s;
        for (int layer = 0; layer < ccfg.num_layers; ++layer) {
            int u = static_cast<int>(arch_rng.next_u64() % ccfg.units_menu.size());
            int a = static_cast<int>(arch_rng.next_u64() % ccfg.act_menu.size());
            s.decisions.push_back(u);
            s.decisions.push_back(a);
            s.arch.layers[layer].units = ccfg.units_menu[static_cast<std::size_t>(u)];
            s.arch.layers[layer].act = ccfg.act_menu[static_cast<std::size_t>(a)];
        }
        samples.push_back(std::move(s));
        seeds.push_back(stable_hash(cfg.seed, static_cast<std::uint64_t>(k)));
    }

    std::vector<TrialOutcome> outcomes = evaluate_batch(samples, seeds, trainer, cfg.workers);

    std::vector<TrialResult> result;
    result.reserve(static_cast<std::size_t>(trials));
    for (int k = 0; k < trials; ++k) {
        TrialResult t;
        t.trial_index = k;
        t.arch = samples[static_cast<std::size_t>(k)].arch;
        t.decisions = samples[static_cast<std::size_t>(k)].decisions;
        t.mae = outcomes[static_cast<std::size_t>(k)].mae;
        t.param_count = outcomes[static_cast<std::size_t>(k)].param_count;
        t.reward = reward_fn(t.mae, t.param_count, cfg.P0, cfg.alpha, cfg.beta);
        t.feasible = t.param_count <= cfg.P0;
        t.seed = seeds[static_cast<std::size_t>(k)];
        t.termination = outcomes[static_cast<std::size_t>(k)].termination;
        result.push_back(std::move(t));
    }
    return result;
}

void save_search_log(const std::vector<TrialResult>& trials, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing", path.string());
    out << "trial,u1,a1,u2,a2,u3,a3,u4,a4,u5,a5,recon_mae,param_count,reward,feasible,"
           "termination\n";
    for (const auto& t : trials) {
        out << t.trial_index;
        for (int layer = 0; layer < net::kMaxLayers; ++layer) {
            out << ',' << t.arch.layers[layer].units << ','
                << (t.arch.layers[layer].act == net::Activation::Tanh ? 0 : 1);
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", t.mae);
        out << ',' << buf << ',' << t.param_count;
        std::snprintf(buf, sizeof(buf), "%.17g", t.reward);
        out << ',' << buf << ',' << (t.feasible ? 1 : 0) << ',' << t.termination << '\n';
    }
    if (!out) throw IoError("write failed", path.string());
}

std::vector<TrialResult> load_search_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open", path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty search log", 1);
    std::vector<TrialResult> trials;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string token;
        auto next = [&]() {
            if (!std::getline(is, token, ',')) {
                throw ParseError("truncated search-log row", line_no);
            }
            return token;
        };
        TrialResult t;
        t.trial_index = std::stoi(next());
        for (int layer = 0; layer < net::kMaxLayers; ++layer) {
            t.arch.layers[layer].units = std::stoi(next());
            t.arch.layers[layer].act =
                std::stoi(next()) == 0 ? net::Activation::Tanh : net::Activation::Relu;
        }
        t.mae = std::stod(next());
        t.param_count = static_cast<std::size_t>(std::stoull(next()));
        t.reward = std::stod(next());
        t.feasible = std::stoi(next()) != 0;
        t.termination = next();
        trials.push_back(std::move(t));
    }
    return trials;
}

}  // namespace pinnsearch::search
