#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dfs {

/// Raised when a drive ratio sits on a point where the construction breaks
/// down (the Schwinger transform is not invertible at mu = 0).
class SingularParameter : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised by the integrator when the trace drifts beyond tolerance.
class IntegrationDiverged : public std::runtime_error {
public:
    IntegrationDiverged(const std::string& what, std::size_t step, double time)
        : std::runtime_error(what), step_(step), time_(time) {}

    std::size_t step() const noexcept { return step_; }
    double time() const noexcept { return time_; }

private:
    std::size_t step_;
    double time_;
};

}  // namespace dfs
