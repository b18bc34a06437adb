#ifndef LAPODE_LAPLACE_HPP
#define LAPODE_LAPLACE_HPP

#include <functional>
#include <memory>
#include <random>
#include <string>

#include "lapode/sensitivity.hpp"

namespace lapode {

// tau^2 ~ Gamma(a, b) (shape, rate); x1 | tau^2 ~ N(mu_x1, c / tau^2 I);
// theta uniform on theta_box unless log_prior is given (still truncated to the box).
struct PriorSpec {
    double a = 0.1;
    double b = 0.01;
    double c = 100.0;
    Vector mu_x1;
    Box theta_box;
    std::function<double(const Vector&)> log_prior;

    void validate(int p, int q) const;
    double log_prior_at(const Vector& theta) const;
};

struct OptimizerOptions {
    int max_newton = 100;
    int max_gradient = 200;
    int max_halvings = 30;
    double rel_tol = 1e-8;  // ||grad F|| <= rel_tol * max(1, F)
};

struct X1Optimum {
    Vector x1_hat;
    double objective = 0.0;  // F(x1_hat) = n g_n + ||x1_hat - mu||^2 / c
    FitStats stats;          // at x1_hat
    bool converged = false;
    int iterations = 0;      // Newton iterations
    int gradient_steps = 0;
};

// Minimizes F(x1) = n g_n(x1, theta) + ||x1 - mu_x1||^2 / c by Newton's
// method with step halving, falling back to gradient descent when the Newton
// direction is unusable.
X1Optimum optimize_x1(const TrajectoryModel& model, const Vector& theta, const Dataset& data,
                      const PriorSpec& prior, const OptimizerOptions& opts = {},
                      const Vector* start = nullptr);

struct LaplaceEval {
    Vector theta;
    Vector x1_hat;
    double u = 0.0;          // F at the minimizer
    double v = 0.0;          // log det(n g''_n + (2/c) I)
    double log_post = kNegInf;
    Matrix curvature;        // n g''_n(x1_hat) + (2/c) I
    int newton_iters = 0;
    bool converged = false;
    std::string diagnostic;  // empty on success

    bool finite() const;
};

LaplaceEval laplace_eval(const TrajectoryModel& model, const Vector& theta, const Dataset& data,
                         const PriorSpec& prior, const OptimizerOptions& opts = {},
                         const Vector* start = nullptr);

LaplaceEval laplace_eval(const OdeSystem& sys, const Vector& theta, const Dataset& data,
                         const PriorSpec& prior, const TimeGrid& grid, Method method);

struct GammaParams {
    double shape = 1.0;
    double rate = 1.0;

    double mean() const { return shape / rate; }
};

GammaParams tau2_conditional(const LaplaceEval& eval, int n, int p, const PriorSpec& prior);

struct GaussianParams {
    Vector mean;
    Matrix cov;
};

GaussianParams x1_conditional(const LaplaceEval& eval, double tau2);

double sample_gamma(const GammaParams& params, std::mt19937_64& rng);
Vector sample_gaussian(const GaussianParams& params, std::mt19937_64& rng);

// Bundles model, data, prior and optimizer settings into the marginal
// posterior of theta.
class LaplacePosterior {
public:
    LaplacePosterior(std::shared_ptr<const TrajectoryModel> model, Dataset data, PriorSpec prior,
                     OptimizerOptions opts = {});

    LaplaceEval evaluate(const Vector& theta, const Vector* start = nullptr) const;
    GammaParams tau2_params(const LaplaceEval& eval) const;

    const TrajectoryModel& model() const { return *model_; }
    const Dataset& data() const { return data_; }
    const PriorSpec& prior() const { return prior_; }
    int n() const { return data_.n(); }
    int p() const { return data_.p(); }
    int q() const { return model_->param_dim(); }

private:
    std::shared_ptr<const TrajectoryModel> model_;
    Dataset data_;
    PriorSpec prior_;
    OptimizerOptions opts_;
};

struct MultiStartReport {
    int starts = 0;
    int failed = 0;
    double max_disagreement = 0.0;  // max ||x1_hat(start) - x1_hat(default)||
};

// Re-optimizes from `extra_starts` draws of N(mu_x1, c I) to probe for
// multiple minimizers. Diagnostic only.
MultiStartReport multistart_check(const LaplacePosterior& post, const Vector& theta, int extra_starts,
                                  std::uint64_t seed);

}  // namespace lapode

#endif  // LAPODE_LAPLACE_HPP
