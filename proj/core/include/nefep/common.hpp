#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nefep {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Compensated (Kahan) accumulator. Summation order is fixed by the caller,
// which keeps ensemble reductions independent of the worker-thread count.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

  private:
    double s_ = 0.0;
    double c_ = 0.0;
};

// Max-shifted accumulator for sums of exp(x_i); immune to overflow when
// individual exponents are large. log_sum() returns log(sum_i exp(x_i)).
class LogSumExp {
  public:
    void add(double x) {
        if (n_ == 0 || x <= max_) {
            sum_.add(std::exp(x - (n_ == 0 ? (max_ = x) : max_)));
        } else {
            // rescale the running sum to the new maximum
            const double scale = std::exp(max_ - x);
            KahanSum rescaled;
            rescaled.add(sum_.value() * scale);
            rescaled.add(1.0);
            sum_ = rescaled;
            max_ = x;
        }
        ++n_;
    }
    std::size_t count() const { return n_; }
    double log_sum() const {
        if (n_ == 0) throw NumericsError("LogSumExp: empty sum");
        return max_ + std::log(sum_.value());
    }
    double log_mean() const { return log_sum() - std::log(static_cast<double>(n_)); }

  private:
    double max_ = 0.0;
    KahanSum sum_;
    std::size_t n_ = 0;
};

inline double mean_of(const std::vector<double>& v) {
    KahanSum s;
    for (double x : v) s.add(x);
    return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

// Unbiased (n-1) sample standard deviation; NaN for fewer than two values.
inline double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean_of(v);
    KahanSum s;
    for (double x : v) s.add((x - m) * (x - m));
    return std::sqrt(s.value() / static_cast<double>(v.size() - 1));
}

}  // namespace nefep
