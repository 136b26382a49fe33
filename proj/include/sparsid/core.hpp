// SPDX-License-Identifier: Apache-2.0
//
// Shared building blocks: dense row-major matrix storage, error types,
// seeded random streams, hashing and logging.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sparsid {

using Vec = std::vector<double>;

/// Input that could not be parsed or is otherwise unusable (exit code 3).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical breakdown during computation (exit code 4).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad configuration or arguments (exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dense row-major matrix of doubles.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), d_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return d_.size(); }
    bool empty() const { return d_.empty(); }

    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }
    double* row(std::size_t i) { return d_.data() + i * cols_; }
    const double* row(std::size_t i) const { return d_.data() + i * cols_; }

    double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }
    double& operator[](std::size_t k) { return d_[k]; }
    double operator[](std::size_t k) const { return d_[k]; }

    void fill(double v) { std::fill(d_.begin(), d_.end(), v); }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Mat& a, const Mat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.d_ == b.d_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> d_;
};

/// Boolean mask stored alongside a weight matrix; 1 = active, 0 = pruned.
using Mask = std::vector<std::uint8_t>;

// --- hashing ---------------------------------------------------------------

/// FNV-1a 64-bit over raw bytes; stable across platforms.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// --- random streams --------------------------------------------------------

/// A named, seed-derived random stream. All randomness in the project flows
/// from one user seed through streams like ("init"), ("batch"), ("sim"); sweep
/// cells derive theirs from (ratio, repeat) so any cell is reproducible alone.
///
/// Gaussians use one-sample Box-Muller so the engine state is the whole state
/// (nothing cached), which keeps checkpoints trivially resumable.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view name)
        : eng_(splitmix64(seed ^ fnv1a64(name))) {}

    explicit RngStream(std::uint64_t raw_seed) : eng_(raw_seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1).
    double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Uniform index in [0, n). Modulo bias is negligible for our n.
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }

    /// Fisher-Yates; self-contained so shuffles are identical on every platform.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    std::string save_state() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (is.fail()) throw DataError("invalid RNG state string");
    }

private:
    std::mt19937_64 eng_;
};

// --- logging ---------------------------------------------------------------

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Level parsed once from SPARSID_LOG={error|info|debug}; default error.
LogLevel log_level();
void log_msg(LogLevel lvl, const std::string& msg);

inline void log_error(const std::string& m) { log_msg(LogLevel::Error, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::Debug, m); }

}  // namespace sparsid
