#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgalm {

// All probability arithmetic floors at this value before taking logs.
inline constexpr double kProbFloor = 1e-12;

inline double safe_log(double p) { return std::log(p < kProbFloor ? kProbFloor : p); }

// Error with a machine-readable kind, surfaced as JSON by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

using Rng = std::mt19937_64;

// Single uniform draw mapped onto a categorical table. `probs` need not be
// normalized; the caller guarantees a positive total.
inline int draw_categorical(const std::vector<double>& probs, Rng& rng) {
    double total = 0.0;
    for (double p : probs) total += p;
    std::uniform_real_distribution<double> unif(0.0, total);
    double u = unif(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

inline double log_sum_exp(const std::vector<double>& xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population std
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(var / static_cast<double>(xs.size()));
    return r;
}

}  // namespace sgalm
