#include "pinnsearch/physics.hpp"

#include <cmath>
#include <cstdlib>

#include "pinnsearch/errors.hpp"

namespace pinnsearch::physics {

const std::array<std::string_view, kNumParams>& PhysParams::names() {
    static const std::array<std::string_view, kNumParams> kNames = {
        "L", "R_L", "C", "R_C", "R_dson", "R_1", "R_2", "R_3", "V_in", "V_F"};
    return kNames;
}

double PhysParams::operator[](int idx) const {
    switch (idx) {
        case 0: return L;
        case 1: return R_L;
        case 2: return C;
        case 3: return R_C;
        case 4: return R_dson;
        case 5: return R_1;
        case 6: return R_2;
        case 7: return R_3;
        case 8: return V_in;
        case 9: return V_F;
        default: std::abort();
    }
}

double& PhysParams::operator[](int idx) {
    switch (idx) {
        case 0: return L;
        case 1: return R_L;
        case 2: return C;
        case 3: return R_C;
        case 4: return R_dson;
        case 5: return R_1;
        case 6: return R_2;
        case 7: return R_3;
        case 8: return V_in;
        case 9: return V_F;
        default: std::abort();
    }
}

std::array<double, kNumParams> PhysParams::to_array() const {
    std::array<double, kNumParams> a;
    for (int j = 0; j < kNumParams; ++j) a[j] = (*this)[j];
    return a;
}

PhysParams PhysParams::from_array(const std::array<double, kNumParams>& a) {
    PhysParams p;
    for (int j = 0; j < kNumParams; ++j) p[j] = a[j];
    return p;
}

bool PhysParams::valid() const {
    for (int j = 0; j < kNumParams; ++j) {
        double v = (*this)[j];
        if (!(v > 0.0) || !std::isfinite(v)) return false;
    }
    return true;
}

PhysParams PhysParams::nominal() {
    PhysParams p;
    p.L = 100e-6;
    p.R_L = 0.2;
    p.C = 220e-6;
    p.R_C = 0.1;
    p.R_dson = 0.05;
    p.R_1 = 10.0;
    p.R_2 = 20.0;
    p.R_3 = 30.0;
    p.V_in = 12.0;
    p.V_F = 0.7;
    return p;
}

bool OperatingPoint::valid() const {
    return duty > 0.0 && duty < 1.0 && f_s > 0.0 && load_index >= 1 && load_index <= 3;
}

double load_resistance(const PhysParams& params, const OperatingPoint& op) {
    switch (op.load_index) {
        case 1: return params.R_1;
        case 2: return params.R_2;
        default: return params.R_3;
    }
}

double output_voltage(const ConverterState& state, const PhysParams& params,
                      const OperatingPoint& op) {
    double r_load = load_resistance(params, op);
    return (state.u_c + params.R_C * state.i) / (1.0 + params.R_C / r_load);
}

ConverterState state_derivative(const ConverterState& state, const PhysParams& params,
                                const OperatingPoint& op, bool switch_on) {
    double r_load = load_resistance(params, op);
    double u_out = output_voltage(state, params, op);
    ConverterState d;
    if (switch_on) {
        d.i = (params.V_in - state.i * (params.R_dson + params.R_L) - u_out) / params.L;
    } else {
        d.i = (-params.V_F - state.i * params.R_L - u_out) / params.L;
    }
    d.u_c = (state.i - u_out / r_load) / params.C;
    return d;
}

namespace {

void check_guard(const ConverterState& s) {
    if (!(std::fabs(s.i) <= kDivergenceGuard) || !(std::fabs(s.u_c) <= kDivergenceGuard)) {
        throw DivergenceError("converter state exceeded 1e9; non-physical parameters");
    }
}

}  // namespace

Trajectory simulate_cycles(const PhysParams& params, const OperatingPoint& op,
                           ConverterState initial, std::size_t cycles,
                           std::size_t substeps_per_interval) {
    const std::size_t n = substeps_per_interval;
    const double period = 1.0 / op.f_s;
    const double dt_on = op.duty * period / static_cast<double>(n);
    const double dt_off = (1.0 - op.duty) * period / static_cast<double>(n);

    Trajectory traj;
    traj.points_per_cycle = 2 * n;
    traj.cycles = cycles;
    traj.time.reserve(cycles * 2 * n + 1);
    traj.state.reserve(cycles * 2 * n + 1);
    traj.u_out.reserve(cycles * 2 * n + 1);

    double t = 0.0;
    ConverterState s = initial;
    check_guard(s);
    traj.time.push_back(t);
    traj.state.push_back(s);
    traj.u_out.push_back(output_voltage(s, params, op));

    ConverterState prev_endpoint = initial;
    for (std::size_t c = 0; c < cycles; ++c) {
        for (int phase = 0; phase < 2; ++phase) {
            const bool on = (phase == 0);
            const double dt = on ? dt_on : dt_off;
            for (std::size_t k = 0; k < n; ++k) {
                ConverterState d = state_derivative(s, params, op, on);
                s.i += dt * d.i;
                s.u_c += dt * d.u_c;
                t += dt;
                check_guard(s);
                traj.time.push_back(t);
                traj.state.push_back(s);
                traj.u_out.push_back(output_voltage(s, params, op));
            }
        }
        if (!traj.steady_cycle) {
            double rel_i = std::fabs(s.i - prev_endpoint.i) / std::max(std::fabs(s.i), 1e-12);
            double rel_u =
                std::fabs(s.u_c - prev_endpoint.u_c) / std::max(std::fabs(s.u_c), 1e-12);
            if (rel_i < 1e-9 && rel_u < 1e-9) traj.steady_cycle = c + 1;
        }
        prev_endpoint = s;
    }
    return traj;
}

Peaks extract_peaks(const Trajectory& traj) {
    if (traj.size() < 2) throw EmptyTrajectoryError("trajectory has fewer than 2 points");
    std::size_t span = traj.points_per_cycle + 1;
    std::size_t start = traj.size() > span ? traj.size() - span : 0;
    Peaks p{traj.state[start].i, traj.u_out[start]};
    for (std::size_t k = start + 1; k < traj.size(); ++k) {
        p.i_peak = std::max(p.i_peak, traj.state[k].i);
        p.u_peak = std::max(p.u_peak, traj.u_out[k]);
    }
    return p;
}

SteadyState run_to_steady_state(const PhysParams& params, const OperatingPoint& op,
                                std::size_t substeps_per_interval, std::size_t max_cycles) {
    // Chunked simulation: endpoint of one chunk seeds the next, so the
    // steady detector sees the same consecutive-endpoint sequence as one
    // long run without holding the whole trajectory in memory.
    const std::size_t chunk = 64;
    ConverterState start{0.0, 0.0};
    ConverterState prev_endpoint = start;
    std::size_t done = 0;
    bool have_prev = false;
    while (done < max_cycles) {
        std::size_t todo = std::min(chunk, max_cycles - done);
        Trajectory traj = simulate_cycles(params, op, start, todo, substeps_per_interval);
        for (std::size_t c = 1; c <= todo; ++c) {
            const ConverterState& endpoint = traj.state[c * traj.points_per_cycle];
            if (have_prev) {
                double rel_i =
                    std::fabs(endpoint.i - prev_endpoint.i) / std::max(std::fabs(endpoint.i), 1e-12);
                double rel_u = std::fabs(endpoint.u_c - prev_endpoint.u_c) /
                               std::max(std::fabs(endpoint.u_c), 1e-12);
                if (rel_i < 1e-9 && rel_u < 1e-9) {
                    std::size_t begin = (c - 1) * traj.points_per_cycle;
                    SteadyState out;
                    out.valley = traj.state[begin];
                    Trajectory last;
                    last.points_per_cycle = traj.points_per_cycle;
                    last.cycles = 1;
                    last.time.assign(traj.time.begin() + begin,
                                     traj.time.begin() + begin + traj.points_per_cycle + 1);
                    last.state.assign(traj.state.begin() + begin,
                                      traj.state.begin() + begin + traj.points_per_cycle + 1);
                    last.u_out.assign(traj.u_out.begin() + begin,
                                      traj.u_out.begin() + begin + traj.points_per_cycle + 1);
                    out.peaks = extract_peaks(last);
                    out.cycles_run = done + c;
                    return out;
                }
            }
            prev_endpoint = endpoint;
            have_prev = true;
        }
        start = traj.state.back();
        done += todo;
        if (done >= max_cycles) {
            // Not converged to the detector tolerance; report the final cycle.
            SteadyState out;
            std::size_t begin = (todo - 1) * traj.points_per_cycle;
            out.valley = traj.state[begin];
            out.peaks = extract_peaks(traj);
            out.cycles_run = done;
            return out;
        }
    }
    throw DivergenceError("unreachable");
}

Peaks decode(const ConverterState& latent, const PhysParams& params, const OperatingPoint& op,
             int n_sub) {
    const double dt = op.duty / (op.f_s * static_cast<double>(n_sub));
    ConverterState s = latent;
    check_guard(s);
    for (int k = 0; k < n_sub; ++k) {
        ConverterState d = state_derivative(s, params, op, /*switch_on=*/true);
        s.i += dt * d.i;
        s.u_c += dt * d.u_c;
        check_guard(s);
    }
    return Peaks{s.i, output_voltage(s, params, op)};
}

DecodeGrads decode_gradients(const ConverterState& latent, const PhysParams& params,
                             const OperatingPoint& op, int n_sub, double up_i, double up_u) {
    const double dt = op.duty / (op.f_s * static_cast<double>(n_sub));
    const double R = load_resistance(params, op);
    const double D = 1.0 + params.R_C / R;
    const double Rs = params.R_dson + params.R_L;

    // Forward tape of the ON-interval Euler states.
    std::vector<ConverterState> tape(static_cast<std::size_t>(n_sub) + 1);
    tape[0] = latent;
    check_guard(latent);
    for (int k = 0; k < n_sub; ++k) {
        ConverterState d = state_derivative(tape[k], params, op, /*switch_on=*/true);
        tape[k + 1].i = tape[k].i + dt * d.i;
        tape[k + 1].u_c = tape[k].u_c + dt * d.u_c;
        check_guard(tape[k + 1]);
    }

    DecodeGrads g;
    const int load_slot = 5 + (op.load_index - 1);  // index of the active load in PhysParams

    // Seed adjoints from the outputs: i_peak = s_n.i, u_peak = u_out(s_n).
    const ConverterState& sn = tape[n_sub];
    double u_out_n = (sn.u_c + params.R_C * sn.i) / D;
    double a_i = up_i + up_u * (params.R_C / D);
    double a_u = up_u * (1.0 / D);
    // u_out algebra touches R_C and the active load directly.
    g.d_params[3] += up_u * (sn.i - u_out_n / R) / D;
    g.d_params[load_slot] += up_u * (u_out_n * params.R_C / (R * R)) / D;

    // Walk the tape backwards through every Euler substep.
    for (int k = n_sub - 1; k >= 0; --k) {
        const ConverterState& s = tape[k];
        double u_out = (s.u_c + params.R_C * s.i) / D;
        double du_di = params.R_C / D;
        double du_du = 1.0 / D;
        double f_i = (params.V_in - s.i * Rs - u_out) / params.L;
        double f_u = (s.i - u_out / R) / params.C;

        // lambda partials of the two derivative components at this substep
        double du_dRC = (s.i - u_out / R) / D;                 // d u_out / d R_C
        double du_dR = (u_out * params.R_C / (R * R)) / D;     // d u_out / d R_load

        double w_i = dt * a_i;  // adjoint weight on f_i at this substep
        double w_u = dt * a_u;

        g.d_params[0] += w_i * (-f_i / params.L);                         // L
        g.d_params[1] += w_i * (-s.i / params.L);                         // R_L
        g.d_params[2] += w_u * (-f_u / params.C);                         // C
        g.d_params[3] += w_i * (-du_dRC / params.L)                       // R_C
                         + w_u * (-du_dRC / (R * params.C));
        g.d_params[4] += w_i * (-s.i / params.L);                         // R_dson
        g.d_params[load_slot] += w_i * (-du_dR / params.L)                // active load
                                 + w_u * ((u_out / (R * R) - du_dR / R) / params.C);
        g.d_params[8] += w_i * (1.0 / params.L);                          // V_in
        // V_F does not enter the ON interval; its partial stays zero.

        // State adjoint through s_{k+1} = s_k + dt * f(s_k).
        double dfi_di = (-Rs - du_di) / params.L;
        double dfi_du = (-du_du) / params.L;
        double dfu_di = (1.0 - du_di / R) / params.C;
        double dfu_du = (-du_du / R) / params.C;

        double new_a_i = a_i * (1.0 + dt * dfi_di) + a_u * (dt * dfu_di);
        double new_a_u = a_i * (dt * dfi_du) + a_u * (1.0 + dt * dfu_du);
        a_i = new_a_i;
        a_u = new_a_u;
    }

    g.d_i0 = a_i;
    g.d_u0 = a_u;
    return g;
}

}  // namespace pinnsearch::physics
