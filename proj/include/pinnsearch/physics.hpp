#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace pinnsearch::physics {

inline constexpr int kNumParams = 10;

/// State magnitudes beyond this are treated as divergence.
inline constexpr double kDivergenceGuard = 1e9;

/// The ten internal Buck-converter parameters being estimated.
/// Field order is fixed; operator[] indexes them 0..9 in this order.
struct PhysParams {
    double L = 0.0;       // inductance (H)
    double R_L = 0.0;     // inductor series resistance (ohm)
    double C = 0.0;       // output capacitance (F)
    double R_C = 0.0;     // capacitor ESR (ohm)
    double R_dson = 0.0;  // switch on-state resistance (ohm)
    double R_1 = 0.0;     // load 1 (ohm)
    double R_2 = 0.0;     // load 2 (ohm)
    double R_3 = 0.0;     // load 3 (ohm)
    double V_in = 0.0;    // input voltage (V)
    double V_F = 0.0;     // diode forward drop (V)

    static const std::array<std::string_view, kNumParams>& names();

    double operator[](int idx) const;
    double& operator[](int idx);

    std::array<double, kNumParams> to_array() const;
    static PhysParams from_array(const std::array<double, kNumParams>& a);

    /// All ten fields strictly positive and finite.
    bool valid() const;

    /// Typical bench converter used for synthetic data generation.
    static PhysParams nominal();
};

/// Which load is connected and how the switch is driven for one sample.
struct OperatingPoint {
    double duty = 0.5;   // in (0, 1)
    double f_s = 50e3;   // switching frequency (Hz)
    int load_index = 1;  // 1..3 selects R_1/R_2/R_3

    bool valid() const;
};

double load_resistance(const PhysParams& params, const OperatingPoint& op);

/// Converter state: inductor current and capacitor voltage.
struct ConverterState {
    double i = 0.0;
    double u_c = 0.0;
};

/// Output-node voltage through the ESR divider:
/// u_out = (u_c + R_C*i) / (1 + R_C/R_load).
double output_voltage(const ConverterState& state, const PhysParams& params,
                      const OperatingPoint& op);

/// Right-hand side of the converter ODE for the ON or OFF interval.
ConverterState state_derivative(const ConverterState& state, const PhysParams& params,
                                const OperatingPoint& op, bool switch_on);

struct Trajectory {
    std::vector<double> time;
    std::vector<ConverterState> state;
    std::vector<double> u_out;
    std::size_t points_per_cycle = 0;  // 2 * substeps_per_interval
    std::size_t cycles = 0;
    /// First cycle (1-based) whose endpoint matches the previous cycle's
    /// endpoint within 1e-9 relative, if any.
    std::optional<std::size_t> steady_cycle;

    std::size_t size() const { return state.size(); }
};

/// Forward-Euler switching-cycle simulation: ON for duty/f_s, then OFF for
/// (1-duty)/f_s, each interval split into substeps_per_interval equal steps.
/// Throws DivergenceError when any state magnitude exceeds the guard.
Trajectory simulate_cycles(const PhysParams& params, const OperatingPoint& op,
                           ConverterState initial, std::size_t cycles,
                           std::size_t substeps_per_interval);

struct Peaks {
    double i_peak = 0.0;
    double u_peak = 0.0;
};

/// Maximum inductor current and output voltage over the final full cycle.
/// Throws EmptyTrajectoryError on fewer than two points.
Peaks extract_peaks(const Trajectory& traj);

/// Steady-state summary used by data generation and test oracles.
struct SteadyState {
    ConverterState valley;  // state at the start of the ON interval
    Peaks peaks;            // over the final (steady) cycle
    std::size_t cycles_run = 0;
};

/// Simulates from zero state until the steady-state detector fires (or
/// max_cycles), returning the valley state and peaks of the final cycle.
SteadyState run_to_steady_state(const PhysParams& params, const OperatingPoint& op,
                                std::size_t substeps_per_interval, std::size_t max_cycles);

/// Physics decoder: interprets `latent` as the valley state at the start of the
/// ON interval, integrates the ON interval with n_sub forward-Euler substeps,
/// and returns the endpoint (i, u_out) as the predicted peaks.
Peaks decode(const ConverterState& latent, const PhysParams& params,
             const OperatingPoint& op, int n_sub);

struct DecodeGrads {
    double d_i0 = 0.0;  // d(loss)/d latent.i
    double d_u0 = 0.0;  // d(loss)/d latent.u_c
    std::array<double, kNumParams> d_params{};
};

/// Exact reverse-mode derivatives of decode() contracted with the upstream
/// sensitivities d(loss)/d(i_peak), d(loss)/d(u_peak).
DecodeGrads decode_gradients(const ConverterState& latent, const PhysParams& params,
                             const OperatingPoint& op, int n_sub, double up_i, double up_u);

}  // namespace pinnsearch::physics
