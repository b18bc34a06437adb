#include "lapode/inference.hpp"

#include <chrono>

namespace lapode {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::shared_ptr<const TrajectoryModel> make_trajectory_model(const ModelCatalogEntry& entry,
                                                             const std::vector<double>& times, int m,
                                                             const PipelineOptions& opts)
{
    if (opts.closed_form) {
        if (!entry.closed_form) {
            throw SpecError("model '" + entry.name + "' has no closed-form solution");
        }
        return std::make_shared<ClosedFormTrajectory>(entry.system.p, entry.system.q, times, entry.closed_form);
    }
    return std::make_shared<NumericalTrajectory>(entry.system, TimeGrid(times, m), opts.method, opts.sensitivity);
}

PosteriorRun run_posterior(const ModelCatalogEntry& entry, const Dataset& data, const PriorSpec& prior, int m,
                           const Vector& theta_start, const PipelineOptions& opts)
{
    const auto t_start = std::chrono::steady_clock::now();
    const LaplacePosterior posterior(make_trajectory_model(entry, data.times, m, opts), data, prior);
    const Target target = make_target(posterior);
    const LogDensity density = [&posterior](const Vector& theta) { return posterior.evaluate(theta).log_post; };

    PosteriorRun run;
    run.m = m;
    run.theta_start = theta_start;
    run.theta0 = theta_start;
    if (theta_start.size() != posterior.q()) {
        throw SpecError("theta0 has " + std::to_string(theta_start.size()) + " components, model needs " +
                        std::to_string(posterior.q()));
    }
    if (opts.find_mode) {
        try {
            run.theta0 = find_mode(density, theta_start).theta;
        } catch (const NumericalError& e) {
            run.warnings.push_back(std::string("mode search skipped: ") + e.what());
        }
    }
    run.sigma_hat = hessian_center(density, run.theta0);
    const LaplaceEval center = posterior.evaluate(run.theta0);
    if (!center.finite()) {
        throw NumericalError("laplace: posterior at the center is not finite (" + center.diagnostic + ")");
    }
    run.multistart = multistart_check(posterior, run.theta0, 2, opts.seed);
    if (run.multistart.failed > 0 ||
        run.multistart.max_disagreement > 1e-4 * std::max(1.0, center.x1_hat.norm())) {
        run.warnings.push_back("x1 minimizer at the center depends on the starting point");
    }
    run.seconds["center"] = seconds_since(t_start);

    const int q = posterior.q();
    run.sampler = opts.sampler == "auto" ? (q <= 4 ? "grid" : "griddy") : opts.sampler;
    run.spec = make_grid_spec(run.theta0, run.sigma_hat);

    auto t_phase = std::chrono::steady_clock::now();
    if (run.sampler == "grid") {
        const RangeSearch rs = find_ranges(target, run.spec, opts.M1, opts.eta, opts.threads, &center.x1_hat);
        run.grid = build_grid(target, run.spec, opts.M2, opts.threads, &center.x1_hat);
        run.spec.M2 = opts.M2;
        run.evaluations = static_cast<std::size_t>(rs.evaluations) + run.grid.size();
        run.diverged = run.grid.diverged;
        run.mean = grid_mean(run.grid);
        run.seconds["grid"] = seconds_since(t_phase);
        t_phase = std::chrono::steady_clock::now();
        run.samples = grid_sample(run.grid, opts.N, opts.seed);
    } else if (run.sampler == "griddy") {
        const bool in_z = opts.gibbs_space == "z";
        if (!in_z && opts.gibbs_space != "theta") {
            throw SpecError("unknown griddy Gibbs space '" + opts.gibbs_space + "'");
        }
        // In z the centre is the origin and every axis has unit scale.
        const auto axes = in_z ? gibbs_axes(Vector::Zero(q), Matrix::Identity(q, q), Box{}, opts.gibbs_points)
                               : gibbs_axes(run.theta0, run.sigma_hat, prior.theta_box, opts.gibbs_points);
        const Vector origin = in_z ? Vector::Zero(q) : run.theta0;
        std::vector<std::size_t> init(axes.size());
        for (std::size_t j = 0; j < axes.size(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < axes[j].size(); ++k) {
                const double d = std::abs(axes[j][k] - origin[static_cast<Eigen::Index>(j)]);
                if (d < best) {
                    best = d;
                    init[j] = k;
                }
            }
        }
        GibbsOptions go;
        go.N = opts.N;
        go.thin = opts.thin;
        go.seed = opts.seed;
        const GridSpec& spec = run.spec;
        const Target z_target = [&target, &spec](const Vector& z, const Vector* warm) {
            return target(spec.theta_of(z), warm);
        };
        GibbsResult gr = griddy_gibbs(in_z ? z_target : target, axes, go, init);
        if (in_z) {
            for (Eigen::Index d = 0; d < gr.samples.theta.rows(); ++d) {
                gr.samples.theta.row(d) = spec.theta_of(gr.samples.theta.row(d).transpose()).transpose();
            }
        }
        run.samples = std::move(gr.samples);
        run.evaluations = gr.evaluations;
        run.mean = run.samples.theta.colwise().mean().transpose();
    } else {
        throw SpecError("unknown sampler '" + opts.sampler + "'");
    }
    run.seconds["sampling"] = seconds_since(t_phase);
    run.samples.m = m;
    run.warnings.insert(run.warnings.end(), run.spec.warnings.begin(), run.spec.warnings.end());
    run.seconds["total"] = seconds_since(t_start);
    return run;
}

InferenceResult infer(const ModelCatalogEntry& entry, const Dataset& data, const PriorSpec& prior,
                      const std::vector<int>& m_sequence, double rel_tol, const Vector& theta_start,
                      const PipelineOptions& opts)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::map<int, PosteriorRun> runs;
    Vector start = theta_start;
    InferenceResult res;
    res.refine = refine_m(
        [&](int m) {
            PosteriorRun run = run_posterior(entry, data, prior, m, start, opts);
            start = run.theta0;
            Vector mean = run.mean;
            runs.emplace(m, std::move(run));
            return mean;
        },
        m_sequence, rel_tol);
    if (m_sequence.size() == 1) {
        res.refine.chosen_m = m_sequence.front();
    }
    res.run = std::move(runs.at(res.refine.chosen_m));
    res.seconds = seconds_since(t0);
    return res;
}

}  // namespace lapode
