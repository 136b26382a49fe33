// SPDX-License-Identifier: Apache-2.0

#include "sparsid/narx_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sparsid {

namespace {

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

bool parse_double(std::string s, double& out) {
    // trim
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return false;
    const auto e = s.find_last_not_of(" \t\r");
    s = s.substr(b, e - b + 1);
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last && std::isfinite(out);
}

}  // namespace

SignalPair load_benchmark_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);

    SignalPair sig;
    sig.name = path;
    std::string line;
    std::size_t lineno = 0;
    bool saw_data = false;
    // default: first two columns are u, y; a header row may name them
    // explicitly (e.g. the simulator's t,u,y,x1,x2 layout)
    std::size_t col_u = 0, col_y = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line)) {
            // a trailing newline is fine; a blank line before more data is not
            std::string rest;
            if (std::getline(in, rest)) {
                throw DataError(path + ": blank line at line " + std::to_string(lineno));
            }
            break;
        }
        auto cells = split_cells(line);
        if (cells.size() < 2) {
            throw DataError(path + ": line " + std::to_string(lineno) +
                            " has fewer than 2 columns");
        }
        if (!saw_data && lineno == 1) {
            double probe;
            if (!parse_double(cells[0], probe) || !parse_double(cells[1], probe)) {
                for (std::size_t i = 0; i < cells.size(); ++i) {
                    const auto b = cells[i].find_first_not_of(" \t");
                    const auto e = cells[i].find_last_not_of(" \t\r");
                    const std::string name =
                        b == std::string::npos ? "" : cells[i].substr(b, e - b + 1);
                    if (name == "u") col_u = i;
                    if (name == "y") col_y = i;
                }
                continue;  // header row
            }
        }
        if (cells.size() <= std::max(col_u, col_y)) {
            throw DataError(path + ": line " + std::to_string(lineno) + " has fewer than " +
                            std::to_string(std::max(col_u, col_y) + 1) + " columns");
        }
        double u, y;
        const bool ok_u = parse_double(cells[col_u], u);
        const bool ok_y = parse_double(cells[col_y], y);
        if (!ok_u || !ok_y) {
            const std::size_t col = (ok_u ? col_y : col_u) + 1;
            throw DataError(path + ": non-numeric cell at line " + std::to_string(lineno) +
                            ", column " + std::to_string(col));
        }
        sig.u.push_back(u);
        sig.y.push_back(y);
        saw_data = true;
    }
    if (sig.u.empty()) throw DataError(path + ": no data rows");
    return sig;
}

void write_signal_csv(const std::string& path, const TankTrace& trace) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "t,u,y,x1,x2\n";
    char buf[160];
    for (std::size_t t = 0; t < trace.signal.length(); ++t) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", t, trace.signal.u[t],
                      trace.signal.y[t], trace.x1[t], trace.x2[t]);
        out << buf;
    }
}

TankTrace simulate_tank(const TankParams& p, const Vec& u, double dt, std::uint64_t seed) {
    if (!(dt > 0.0)) throw ConfigError("simulate_tank: dt must be > 0");
    for (double v : u) {
        if (!std::isfinite(v)) throw ConfigError("simulate_tank: non-finite input sample");
    }
    RngStream noise(seed, "sim");

    const double cap = p.overflow_cap.value_or(std::numeric_limits<double>::infinity());
    auto clamp_state = [cap](double x) { return std::min(std::max(x, 0.0), cap); };

    TankTrace tr;
    tr.signal.u = u;
    tr.signal.dt = dt;
    tr.signal.name = "tank";
    tr.signal.y.resize(u.size());
    tr.x1.resize(u.size());
    tr.x2.resize(u.size());

    double x1 = clamp_state(p.x1_0);
    double x2 = clamp_state(p.x2_0);
    for (std::size_t t = 0; t < u.size(); ++t) {
        const double e = p.noise_std_e > 0.0 ? p.noise_std_e * noise.gaussian() : 0.0;
        tr.x1[t] = x1;
        tr.x2[t] = x2;
        tr.signal.y[t] = x2 + e;

        const double w1 = p.noise_std_w1 > 0.0 ? p.noise_std_w1 * noise.gaussian() : 0.0;
        const double w2 = p.noise_std_w2 > 0.0 ? p.noise_std_w2 * noise.gaussian() : 0.0;
        const double s1 = std::sqrt(x1);
        const double s2 = std::sqrt(x2);
        const double nx1 = x1 + dt * (-p.k1 * s1 + p.k4 * u[t] + w1);
        const double nx2 = x2 + dt * (p.k2 * s1 - p.k3 * s2 + w2);
        x1 = clamp_state(nx1);
        x2 = clamp_state(nx2);
    }
    return tr;
}

Vec multisine_input(std::size_t steps, double lo, double hi) {
    // fixed frequency/phase table; the signal is identical on every run
    static constexpr double comps[][3] = {
        // weight, cycles-per-sample, phase
        {0.40, 0.0035, 0.00}, {0.25, 0.0081, 1.30}, {0.18, 0.0173, 2.10},
        {0.10, 0.0317, 0.70}, {0.07, 0.0579, 2.90},
    };
    const double two_pi = 2.0 * 3.14159265358979323846;
    Vec u(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        double s = 0.0;
        for (const auto& c : comps) s += c[0] * std::sin(two_pi * c[1] * double(t) + c[2]);
        // s is in roughly [-1, 1]; map to [lo, hi]
        u[t] = lo + (hi - lo) * 0.5 * (1.0 + s);
        u[t] = std::min(std::max(u[t], lo), hi);
    }
    return u;
}

Vec step_input(std::size_t steps, std::size_t hold, double lo, double hi, std::uint64_t seed) {
    if (hold == 0) hold = 1;
    RngStream rng(seed, "input");
    Vec u(steps);
    double level = rng.uniform(lo, hi);
    for (std::size_t t = 0; t < steps; ++t) {
        if (t > 0 && t % hold == 0) level = rng.uniform(lo, hi);
        u[t] = level;
    }
    return u;
}

RegressorDataset build_regressors(const SignalPair& signal, int n_a, int n_b) {
    if (n_a < 0 || n_b < 0) throw ConfigError("build_regressors: lags must be >= 0");
    if (signal.u.size() != signal.y.size()) {
        throw DataError("build_regressors: u and y lengths differ");
    }
    const std::size_t len = signal.length();
    const std::size_t lag = static_cast<std::size_t>(std::max(n_a, n_b));
    // the target y(t+1) costs one extra sample beyond the lag window
    if (len < lag + 2) throw DataError("build_regressors: series shorter than lags");

    const std::size_t n_rows = len - 1 - lag;
    const std::size_t width = static_cast<std::size_t>(n_a + n_b + 1);
    RegressorDataset ds;
    ds.n_a = n_a;
    ds.n_b = n_b;
    ds.rows = Mat(n_rows, width);
    ds.targets.resize(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t t = lag + r;
        double* row = ds.rows.row(r);
        std::size_t c = 0;
        for (int k = 0; k <= n_a; ++k) row[c++] = signal.u[t - static_cast<std::size_t>(k)];
        for (int k = 1; k <= n_b; ++k) row[c++] = signal.y[t - static_cast<std::size_t>(k)];
        ds.targets[r] = signal.y[t + 1];
    }
    return ds;
}

RegressorDataset subset_ratio(const RegressorDataset& ds, double ratio, SubsetMode mode,
                              std::uint64_t seed) {
    if (!(ratio > 0.0) || ratio > 1.0) {
        throw ConfigError("subset_ratio: ratio must be in (0, 1]");
    }
    const std::size_t n = ds.size();
    const std::size_t keep = static_cast<std::size_t>(std::ceil(ratio * double(n)));
    if (keep < 1) throw ConfigError("subset_ratio: resulting count is 0");
    if (keep >= n) return ds;

    std::vector<std::size_t> idx;
    if (mode == SubsetMode::Prefix) {
        idx.resize(keep);
        for (std::size_t i = 0; i < keep; ++i) idx[i] = i;
    } else {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        RngStream rng(seed, "subset");
        rng.shuffle(all);
        idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep));
        std::sort(idx.begin(), idx.end());
    }

    RegressorDataset out;
    out.n_a = ds.n_a;
    out.n_b = ds.n_b;
    out.norm = ds.norm;
    out.rows = Mat(keep, ds.width());
    out.targets.resize(keep);
    for (std::size_t r = 0; r < keep; ++r) {
        const double* src = ds.rows.row(idx[r]);
        std::copy(src, src + ds.width(), out.rows.row(r));
        out.targets[r] = ds.targets[idx[r]];
    }
    return out;
}

NormStats compute_norm_stats(const RegressorDataset& ds) {
    const std::size_t n = ds.size();
    if (n == 0) throw DataError("compute_norm_stats: empty dataset");
    const std::size_t u_cols = static_cast<std::size_t>(ds.n_a + 1);
    const std::size_t y_cols = static_cast<std::size_t>(ds.n_b);

    double su = 0.0, suu = 0.0, sy = 0.0, syy = 0.0;
    std::size_t cu = 0, cy = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = ds.rows.row(r);
        for (std::size_t c = 0; c < u_cols; ++c, ++cu) {
            su += row[c];
            suu += row[c] * row[c];
        }
        for (std::size_t c = 0; c < y_cols; ++c, ++cy) {
            const double v = row[u_cols + c];
            sy += v;
            syy += v * v;
        }
    }
    // targets belong to the y channel; with n_b = 0 they are its only source
    for (double v : ds.targets) {
        sy += v;
        syy += v * v;
        ++cy;
    }

    NormStats st;
    st.mean_u = su / double(cu);
    st.mean_y = sy / double(cy);
    const double var_u = std::max(0.0, suu / double(cu) - st.mean_u * st.mean_u);
    const double var_y = std::max(0.0, syy / double(cy) - st.mean_y * st.mean_y);
    st.std_u = std::sqrt(var_u);
    st.std_y = std::sqrt(var_y);
    if (!(st.std_u > 0.0)) throw DataError("normalize: zero-variance u channel");
    if (!(st.std_y > 0.0)) throw DataError("normalize: zero-variance y channel");
    return st;
}

namespace {

RegressorDataset affine_transform(const RegressorDataset& ds, const NormStats& st, bool forward) {
    RegressorDataset out = ds;
    const std::size_t u_cols = static_cast<std::size_t>(ds.n_a + 1);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        double* row = out.rows.row(r);
        for (std::size_t c = 0; c < ds.width(); ++c) {
            const bool is_u = c < u_cols;
            const double mean = is_u ? st.mean_u : st.mean_y;
            const double sd = is_u ? st.std_u : st.std_y;
            row[c] = forward ? (row[c] - mean) / sd : row[c] * sd + mean;
        }
        out.targets[r] = forward ? (ds.targets[r] - st.mean_y) / st.std_y
                                 : ds.targets[r] * st.std_y + st.mean_y;
    }
    out.norm = forward ? std::optional<NormStats>(st) : std::nullopt;
    return out;
}

}  // namespace

RegressorDataset apply_norm(const RegressorDataset& ds, const NormStats& st) {
    return affine_transform(ds, st, true);
}

RegressorDataset invert_norm(const RegressorDataset& ds, const NormStats& st) {
    return affine_transform(ds, st, false);
}

std::pair<RegressorDataset, NormStats> normalize(const RegressorDataset& ds) {
    const NormStats st = compute_norm_stats(ds);
    return {apply_norm(ds, st), st};
}

Vec denorm_y(const Vec& y_norm, const NormStats& st) {
    Vec out(y_norm.size());
    for (std::size_t i = 0; i < y_norm.size(); ++i) out[i] = denorm_y(y_norm[i], st);
    return out;
}

}  // namespace sparsid
