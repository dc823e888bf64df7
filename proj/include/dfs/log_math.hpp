#pragma once

#include <cmath>
#include <limits>

namespace dfs::logmath {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline double log_binomial(int n, int k) {
    if (k < 0 || k > n) return kNegInf;
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// exponent * log|base| with the convention 0^0 = 1.
inline double log_pow(double base, int exponent) {
    if (exponent == 0) return 0.0;
    if (base == 0.0) return kNegInf;
    return exponent * std::log(std::fabs(base));
}

/// Streaming log-sum-exp over nonnegative terms given by their logarithms.
class LogSum {
public:
    void add(double log_term) {
        if (log_term == kNegInf) return;
        if (log_term <= max_) {
            scaled_ += std::exp(log_term - max_);
        } else {
            scaled_ = scaled_ * std::exp(max_ - log_term) + 1.0;
            max_ = log_term;
        }
    }

    double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(scaled_); }

private:
    double max_ = kNegInf;
    double scaled_ = 0.0;
};

}  // namespace dfs::logmath
