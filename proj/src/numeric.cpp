#include "lapode/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lapode {

EvalError::EvalError(const std::string& what, double time, Vector state, int interval)
    : std::runtime_error(what), time_(time), state_(std::move(state)), interval_(interval) {}

EvalError EvalError::with_interval(int interval) const
{
    return EvalError(std::string(what()) + " (observation interval " + std::to_string(interval) + ")",
                     time_, state_, interval);
}

double log_sum_exp(std::span<const double> values)
{
    if (values.empty()) {
        return kNegInf;
    }
    const double max_value = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(max_value)) {
        return max_value;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += std::exp(v - max_value);
    }
    return max_value + std::log(sum);
}

std::vector<double> normalize_log_weights(std::span<const double> log_weights, double* log_norm)
{
    const double lse = log_sum_exp(log_weights);
    if (log_norm) {
        *log_norm = lse;
    }
    std::vector<double> out(log_weights.size(), 0.0);
    if (!std::isfinite(lse)) {
        return out;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::isfinite(log_weights[i]) ? std::exp(log_weights[i] - lse) : 0.0;
    }
    return out;
}

double quantile_linear(std::span<const double> sorted, double prob)
{
    if (sorted.empty()) {
        throw SpecError("quantile of an empty sample");
    }
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile_nearest_rank(std::span<const double> sorted, double prob)
{
    if (sorted.empty()) {
        throw SpecError("quantile of an empty sample");
    }
    auto rank = static_cast<std::size_t>(std::ceil(prob * static_cast<double>(sorted.size())));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

ParameterSummary summarize_draws(std::span<const double> draws)
{
    std::vector<double> sorted(draws.begin(), draws.end());
    std::sort(sorted.begin(), sorted.end());
    ParameterSummary s;
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    s.median = quantile_nearest_rank(sorted, 0.5);
    s.q05 = quantile_linear(sorted, 0.05);
    s.q95 = quantile_linear(sorted, 0.95);
    return s;
}

}  // namespace lapode
