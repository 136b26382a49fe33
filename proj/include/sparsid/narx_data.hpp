// SPDX-License-Identifier: Apache-2.0
//
// Input/output series handling: CSV ingest, the cascaded-tanks simulator,
// lagged regressor construction, ratio subsetting and z-score normalization.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparsid/core.hpp"

namespace sparsid {

/// Raw input/output time series: u is the exogenous input (e.g. pump volts),
/// y the measured output (e.g. liquid level).
struct SignalPair {
    Vec u;
    Vec y;
    double dt = 1.0;
    std::string name;

    std::size_t length() const { return u.size(); }
};

/// Two-tank system constants plus process/measurement noise levels.
struct TankParams {
    double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0;
    double noise_std_w1 = 0.0, noise_std_w2 = 0.0, noise_std_e = 0.0;
    double x1_0 = 0.0, x2_0 = 0.0;
    std::optional<double> overflow_cap;
};

/// Simulation output: the (u, y) signal plus the state trajectories, so the
/// CSV writer can emit t,u,y,x1,x2.
struct TankTrace {
    SignalPair signal;
    Vec x1;
    Vec x2;
};

/// Per-channel z-score parameters. u lags share the u stats, y lags and
/// targets share the y stats.
struct NormStats {
    double mean_u = 0.0, std_u = 1.0;
    double mean_y = 0.0, std_y = 1.0;
};

/// Rows of lagged regressors [u(t), u(t-1), ..., u(t-n_a), y(t-1), ..., y(t-n_b)]
/// paired with targets y(t+1).
struct RegressorDataset {
    Mat rows;
    Vec targets;
    int n_a = 0;
    int n_b = 0;
    std::optional<NormStats> norm;  // set once normalized

    std::size_t size() const { return targets.size(); }
    std::size_t width() const { return rows.cols(); }
};

enum class SubsetMode { Prefix, Random };

// --- ingest / synth ----------------------------------------------------------

/// Reads a two-column (u, y) CSV, optional header, '.' decimal separator.
/// dt defaults to 1.0. Errors name the offending line/column.
SignalPair load_benchmark_csv(const std::string& path);

void write_signal_csv(const std::string& path, const TankTrace& trace);

/// Forward-Euler integration of
///   x1' = -k1*sqrt(x1) + k4*u + w1,  x2' = k2*sqrt(x1) - k3*sqrt(x2) + w2,
///   y = x2 + e,
/// with states clamped to [0, cap] before each sqrt. y(t) is measured at the
/// state reached before applying u(t). Deterministic for a given seed.
TankTrace simulate_tank(const TankParams& params, const Vec& u, double dt, std::uint64_t seed);

/// Deterministic multisine excitation in [lo, hi]; same for every seed.
Vec multisine_input(std::size_t steps, double lo, double hi);

/// Piecewise-constant random steps, held `hold` samples, uniform in [lo, hi].
Vec step_input(std::size_t steps, std::size_t hold, double lo, double hi, std::uint64_t seed);

// --- regressors --------------------------------------------------------------

/// Builds the lag matrix. Row for time t is
///   [u(t), ..., u(t-n_a), y(t-1), ..., y(t-n_b)]  ->  target y(t+1),
/// for t = max(n_a, n_b) .. len-2, so N = len - 1 - max(n_a, n_b).
RegressorDataset build_regressors(const SignalPair& signal, int n_a, int n_b);

/// Keeps ceil(ratio*N) rows; Prefix preserves temporal order, Random draws a
/// duplicate-free index subset (seed-deterministic), kept in time order.
RegressorDataset subset_ratio(const RegressorDataset& ds, double ratio, SubsetMode mode,
                              std::uint64_t seed);

// --- normalization -----------------------------------------------------------

NormStats compute_norm_stats(const RegressorDataset& ds);
RegressorDataset apply_norm(const RegressorDataset& ds, const NormStats& st);
RegressorDataset invert_norm(const RegressorDataset& ds, const NormStats& st);
std::pair<RegressorDataset, NormStats> normalize(const RegressorDataset& ds);

inline double norm_y(double y_raw, const NormStats& st) { return (y_raw - st.mean_y) / st.std_y; }
inline double denorm_y(double y_norm, const NormStats& st) { return y_norm * st.std_y + st.mean_y; }
Vec denorm_y(const Vec& y_norm, const NormStats& st);

}  // namespace sparsid
