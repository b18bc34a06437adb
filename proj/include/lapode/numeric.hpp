#ifndef LAPODE_NUMERIC_HPP
#define LAPODE_NUMERIC_HPP

#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lapode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Non-finite value produced while evaluating a vector field or stepping a
// trajectory. Carries the time and state where it happened.
class EvalError : public std::runtime_error {
public:
    EvalError(const std::string& what, double time, Vector state, int interval = -1);

    double time() const { return time_; }
    const Vector& state() const { return state_; }
    // Observation interval index (1-based end point) or -1 when unknown.
    int interval() const { return interval_; }

    EvalError with_interval(int interval) const;

private:
    double time_;
    Vector state_;
    int interval_;
};

// Inputs violate a documented precondition (dimensions, ordering, ranges).
class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not produce a usable answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// log(sum(exp(v))) with max shifting; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values);

// exp(v - log_sum_exp(v)), entries with v = -inf get exactly zero.
std::vector<double> normalize_log_weights(std::span<const double> log_weights,
                                          double* log_norm = nullptr);

// Quantile by linear interpolation between order statistics:
// position (N-1)p on the sorted sample, 0-based.
double quantile_linear(std::span<const double> sorted, double prob);

// Nearest-rank percentile: the ceil(N p)-th order statistic (1-based).
double quantile_nearest_rank(std::span<const double> sorted, double prob);

struct ParameterSummary {
    double mean = 0.0;
    double median = 0.0;  // nearest rank
    double q05 = 0.0;     // linear interpolation
    double q95 = 0.0;     // linear interpolation
};

ParameterSummary summarize_draws(std::span<const double> draws);

}  // namespace lapode

#endif  // LAPODE_NUMERIC_HPP
