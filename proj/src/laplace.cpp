#include "lapode/laplace.hpp"

#include <cmath>
#include <limits>

namespace lapode {

void PriorSpec::validate(int p, int q) const
{
    if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0)) {
        throw SpecError("prior hyperparameters a, b, c must be positive");
    }
    if (mu_x1.size() != p) {
        throw SpecError("mu_x1 length does not match the state dimension");
    }
    if (theta_box.size() != q) {
        throw SpecError("theta box dimension does not match the parameter dimension");
    }
    theta_box.validate();
}

double PriorSpec::log_prior_at(const Vector& theta) const
{
    if (!theta_box.contains(theta)) {
        return kNegInf;
    }
    return log_prior ? log_prior(theta) : 0.0;
}

bool LaplaceEval::finite() const
{
    return std::isfinite(log_post);
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Objective {
    const TrajectoryModel& model;
    const Vector& theta;
    const Dataset& data;
    const PriorSpec& prior;

    double penalty(const Vector& x) const { return (x - prior.mu_x1).squaredNorm() / prior.c; }

    // +inf when the trajectory cannot be computed.
    double value(const Vector& x) const
    {
        try {
            return sum_squared_residuals(model.states(x, theta), data) + penalty(x);
        } catch (const EvalError&) {
            return std::numeric_limits<double>::infinity();
        }
    }
};

}  // namespace

X1Optimum optimize_x1(const TrajectoryModel& model, const Vector& theta, const Dataset& data,
                      const PriorSpec& prior, const OptimizerOptions& opts, const Vector* start)
{
    const int p = model.state_dim();
    if (data.p() != p || model.times() != data.times) {
        throw SpecError("data must have the model's state dimension and observation times");
    }
    const double n = static_cast<double>(data.n());
    const Objective obj{model, theta, data, prior};
    const Matrix prior_curv = (2.0 / prior.c) * Matrix::Identity(p, p);

    X1Optimum out;
    Vector x = (start && start->size() == p && start->allFinite()) ? *start : prior.mu_x1;
    SensitivityBundle bundle = model.sensitivities(x, theta);

    bool force_gradient = false;
    Eigen::LLT<Matrix> llt(p);
    while (true) {
        const FitStats stats = fit_stats(bundle, data);
        const double F = n * stats.g + obj.penalty(x);
        const Vector G = n * stats.grad + (2.0 / prior.c) * (x - prior.mu_x1);
        if (G.norm() <= opts.rel_tol * std::max(1.0, F)) {
            out.converged = true;
            out.x1_hat = x;
            out.objective = F;
            out.stats = stats;
            return out;
        }

        bool newton = !force_gradient && out.iterations < opts.max_newton;
        Vector d;
        if (newton) {
            llt.compute(n * stats.hess + prior_curv);
            if (llt.info() == Eigen::Success) {
                d = -llt.solve(G);
                newton = d.allFinite() && G.dot(d) < 0.0;
            } else {
                newton = false;
            }
        }
        if (!newton) {
            if (out.gradient_steps >= opts.max_gradient) {
                break;
            }
            const double curv = std::max((n * stats.hess).diagonal().cwiseAbs().maxCoeff(), 2.0 / prior.c);
            d = -G / curv;
        }

        const double slope = G.dot(d);
        double step = 1.0;
        bool accepted = false;
        Vector trial(p);
        for (int h = 0; h <= opts.max_halvings; ++h) {
            trial = x + step * d;
            const double Ft = obj.value(trial);
            if (Ft <= F + 1e-4 * step * slope + 16.0 * kEps * std::abs(F)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }

        if (newton) {
            ++out.iterations;
        } else {
            ++out.gradient_steps;
        }
        if (!accepted) {
            if (newton) {
                force_gradient = true;
                continue;
            }
            break;
        }
        force_gradient = false;
        x = trial;
        try {
            bundle = model.sensitivities(x, theta);
        } catch (const EvalError&) {
            break;
        }
        if (out.iterations >= opts.max_newton && out.gradient_steps >= opts.max_gradient) {
            break;
        }
    }
    out.x1_hat = x;
    out.converged = false;
    try {
        out.stats = fit_stats(model.sensitivities(x, theta), data);
        out.objective = n * out.stats.g + obj.penalty(x);
    } catch (const EvalError&) {
        out.objective = std::numeric_limits<double>::infinity();
    }
    return out;
}

LaplaceEval laplace_eval(const TrajectoryModel& model, const Vector& theta, const Dataset& data,
                         const PriorSpec& prior, const OptimizerOptions& opts, const Vector* start)
{
    LaplaceEval ev;
    ev.theta = theta;
    const double log_prior = prior.log_prior_at(theta);
    if (!std::isfinite(log_prior)) {
        ev.diagnostic = "outside prior support";
        return ev;
    }

    X1Optimum opt;
    try {
        opt = optimize_x1(model, theta, data, prior, opts, start);
    } catch (const EvalError& e) {
        ev.diagnostic = std::string("trajectory evaluation failed: ") + e.what();
        return ev;
    }
    ev.x1_hat = opt.x1_hat;
    ev.newton_iters = opt.iterations;
    ev.converged = opt.converged;
    if (!opt.converged) {
        ev.diagnostic = "x1 optimizer did not converge";
        return ev;
    }

    const int p = data.p();
    const double n = static_cast<double>(data.n());
    ev.u = opt.objective;
    ev.curvature = n * opt.stats.hess + (2.0 / prior.c) * Matrix::Identity(p, p);
    Eigen::LLT<Matrix> llt(ev.curvature);
    if (llt.info() != Eigen::Success) {
        ev.curvature += (1e-10 * ev.curvature.trace() / p) * Matrix::Identity(p, p);
        llt.compute(ev.curvature);
        if (llt.info() != Eigen::Success) {
            ev.diagnostic = "curvature not positive definite";
            return ev;
        }
    }
    const Matrix& L = llt.matrixLLT();
    ev.v = 2.0 * L.diagonal().array().log().sum();

    const double shape = n * p / 2.0 + prior.a;
    ev.log_post = log_prior - shape * std::log(ev.u / 2.0 + prior.b) - 0.5 * ev.v;
    if (!std::isfinite(ev.log_post)) {
        ev.log_post = kNegInf;
        ev.diagnostic = "non-finite log posterior";
    }
    return ev;
}

LaplaceEval laplace_eval(const OdeSystem& sys, const Vector& theta, const Dataset& data,
                         const PriorSpec& prior, const TimeGrid& grid, Method method)
{
    const NumericalTrajectory model(sys, grid, method);
    return laplace_eval(model, theta, data, prior);
}

GammaParams tau2_conditional(const LaplaceEval& eval, int n, int p, const PriorSpec& prior)
{
    if (!eval.finite()) {
        throw SpecError("tau2 conditional needs a finite Laplace evaluation");
    }
    return GammaParams{n * p / 2.0 + prior.a, eval.u / 2.0 + prior.b};
}

GaussianParams x1_conditional(const LaplaceEval& eval, double tau2)
{
    if (!(tau2 > 0.0)) {
        throw SpecError("tau2 must be positive");
    }
    Eigen::LLT<Matrix> llt(eval.curvature);
    if (eval.curvature.size() == 0 || llt.info() != Eigen::Success) {
        throw NumericalError(
            "x1 conditional: curvature is not positive definite; try a larger m or inspect theta");
    }
    const auto p = eval.curvature.rows();
    GaussianParams g;
    g.mean = eval.x1_hat;
    g.cov = (2.0 / tau2) * llt.solve(Matrix::Identity(p, p));
    g.cov = 0.5 * (g.cov + g.cov.transpose()).eval();
    return g;
}

double sample_gamma(const GammaParams& params, std::mt19937_64& rng)
{
    std::gamma_distribution<double> dist(params.shape, 1.0 / params.rate);
    return dist(rng);
}

Vector sample_gaussian(const GaussianParams& params, std::mt19937_64& rng)
{
    Eigen::LLT<Matrix> llt(params.cov);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("covariance is not positive definite");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(params.mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z[i] = normal(rng);
    }
    return params.mean + llt.matrixL() * z;
}

LaplacePosterior::LaplacePosterior(std::shared_ptr<const TrajectoryModel> model, Dataset data,
                                   PriorSpec prior, OptimizerOptions opts)
    : model_(std::move(model)), data_(std::move(data)), prior_(std::move(prior)), opts_(opts)
{
    if (!model_) {
        throw SpecError("posterior needs a trajectory model");
    }
    data_.validate();
    if (model_->times() != data_.times) {
        throw SpecError("model times must equal the data times");
    }
    if (data_.p() != model_->state_dim()) {
        throw SpecError("data columns do not match the state dimension");
    }
    prior_.validate(model_->state_dim(), model_->param_dim());
}

LaplaceEval LaplacePosterior::evaluate(const Vector& theta, const Vector* start) const
{
    if (theta.size() != q()) {
        throw SpecError("theta dimension mismatch");
    }
    return laplace_eval(*model_, theta, data_, prior_, opts_, start);
}

GammaParams LaplacePosterior::tau2_params(const LaplaceEval& eval) const
{
    return tau2_conditional(eval, n(), p(), prior_);
}

MultiStartReport multistart_check(const LaplacePosterior& post, const Vector& theta, int extra_starts,
                                  std::uint64_t seed)
{
    MultiStartReport report;
    const LaplaceEval base = post.evaluate(theta);
    if (!base.finite()) {
        throw NumericalError("multi-start check: base evaluation failed (" + base.diagnostic + ")");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = std::sqrt(post.prior().c);
    for (int s = 0; s < extra_starts; ++s) {
        Vector start = post.prior().mu_x1;
        for (Eigen::Index i = 0; i < start.size(); ++i) {
            start[i] += scale * normal(rng);
        }
        ++report.starts;
        X1Optimum opt;
        try {
            opt = optimize_x1(post.model(), theta, post.data(), post.prior(), {}, &start);
        } catch (const EvalError&) {
            ++report.failed;
            continue;
        }
        if (!opt.converged) {
            ++report.failed;
            continue;
        }
        report.max_disagreement = std::max(report.max_disagreement, (opt.x1_hat - base.x1_hat).norm());
    }
    return report;
}

}  // namespace lapode
