#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>

#include "lapode/inference.hpp"
#include "support.hpp"

using namespace lapode;
using namespace lapode::testing;

namespace {

// Fixed seeds of the regenerated datasets and samplers.
constexpr std::uint64_t kCoolingSeed = 20240601;
constexpr std::uint64_t kFhnSeed = 11;
constexpr std::uint64_t kPredatorPreySeed = 5;
constexpr std::uint64_t kSamplerSeed = 1;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail)
{
    std::printf("%s  %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Summary {
    double mean = 0.0, median = 0.0, q05 = 0.0, q95 = 0.0;
};

// Mean and quantiles of one coordinate under discrete masses; quantiles
// interpolate the cumulative mass between neighbouring support points.
Summary weighted_summary(const std::vector<double>& values, const std::vector<double>& mass)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    Summary s;
    double total = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        s.mean += mass[k] * values[k];
        total += mass[k];
    }
    s.mean /= total;
    auto quantile = [&](double p) {
        double cum = 0.0;
        double prev_mid = 0.0, prev_value = values[order.front()];
        for (std::size_t k : order) {
            const double mid = cum + 0.5 * mass[k] / total;
            if (mid >= p) {
                if (mid == prev_mid) {
                    return values[k];
                }
                const double w = std::clamp((p - prev_mid) / (mid - prev_mid), 0.0, 1.0);
                return prev_value + w * (values[k] - prev_value);
            }
            cum += mass[k] / total;
            prev_mid = mid;
            prev_value = values[k];
        }
        return values[order.back()];
    };
    s.median = quantile(0.5);
    s.q05 = quantile(0.05);
    s.q95 = quantile(0.95);
    return s;
}

std::vector<double> coordinate(const PosteriorGrid& g, int j)
{
    std::vector<double> v(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        v[k] = g.theta[k][j];
    }
    return v;
}

// Exact cooling posterior normalized over the same grid points.
std::vector<double> oracle_masses(const PosteriorGrid& g, const Dataset& data, const PriorSpec& pr)
{
    std::vector<double> lp(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        lp[k] = pr.theta_box.contains(g.theta[k])
                    ? cooling_marginal_quadrature(g.theta[k], data.times, data.y, pr.a, pr.b, pr.c, pr.mu_x1[0], 2000)
                    : kNegInf;
    }
    return normalize_log_weights(lp);
}

PipelineOptions options(Method method, int M2)
{
    PipelineOptions o;
    o.method = method;
    o.M2 = M2;
    o.N = 10000;
    o.seed = kSamplerSeed;
    return o;
}

void cooling_checks()
{
    const ModelCatalogEntry e = newton_cooling(20);
    const Dataset data = simulate_data(e, kCoolingSeed);
    const PriorSpec pr = e.prior_for(data);

    auto t0 = std::chrono::steady_clock::now();
    const PosteriorRun rk4 = run_posterior(e, data, pr, 1, e.theta_center, options(Method::Rk4, e.default_M2));
    const double rk4_seconds = seconds_since(t0);
    const std::vector<double> exact_mass = oracle_masses(rk4.grid, data, pr);
    const Summary exact = weighted_summary(coordinate(rk4.grid, 0), exact_mass);
    const Summary lap = weighted_summary(coordinate(rk4.grid, 0), rk4.grid.mass);
    const double mean_gap = std::abs(lap.mean - exact.mean);
    const double ci_gap = std::max(std::abs(lap.q05 - exact.q05), std::abs(lap.q95 - exact.q95));
    report(mean_gap <= 0.02 && ci_gap <= 0.03 && rk4_seconds <= 10.0, "1 cooling exact-posterior match",
           fmt("seed %llu; theta1 mean LAP %.4f vs exact %.4f (gap %.4f <= 0.02); 90%% CI LAP (%.4f, %.4f) vs "
               "exact (%.4f, %.4f) (max gap %.4f <= 0.03); %.2f s (<= 10 s)",
               static_cast<unsigned long long>(kCoolingSeed), lap.mean, exact.mean, mean_gap, lap.q05, lap.q95,
               exact.q05, exact.q95, ci_gap, rk4_seconds));

    const PosteriorRun euler1 = run_posterior(e, data, pr, 1, e.theta_center, options(Method::Euler, e.default_M2));
    const PosteriorRun euler50 = run_posterior(e, data, pr, 50, e.theta_center, options(Method::Euler, e.default_M2));
    const double gap1 = std::abs(euler1.mean[0] - exact.mean);
    const double gap50 = std::abs(euler50.mean[0] - exact.mean);
    report(gap1 >= 0.05 && gap50 <= 0.02, "2 Euler bias pattern",
           fmt("theta1 mean Euler m=1 %.4f (gap %.4f >= 0.05), Euler m=50 %.4f (gap %.4f <= 0.02), exact %.4f",
               euler1.mean[0], gap1, euler50.mean[0], gap50, exact.mean));

    PipelineOptions cf_opts = options(Method::Rk4, e.default_M2);
    cf_opts.closed_form = true;
    const PosteriorRun cf = run_posterior(e, data, pr, 1, e.theta_center, cf_opts);
    const Summary cf_lap = weighted_summary(coordinate(cf.grid, 0), cf.grid.mass);
    const Summary cf_exact = weighted_summary(coordinate(cf.grid, 0), oracle_masses(cf.grid, data, pr));
    const double cf_gap = std::max({std::abs(cf_lap.mean - cf_exact.mean), std::abs(cf_lap.median - cf_exact.median),
                                    std::abs(cf_lap.q05 - cf_exact.q05), std::abs(cf_lap.q95 - cf_exact.q95)});
    report(cf_gap <= 1e-3, "3 Laplace-only fidelity",
           fmt("closed-form LAP theta1 mean %.5f median %.5f CI (%.5f, %.5f); exact mean %.5f median %.5f CI "
               "(%.5f, %.5f); max gap %.2e (<= 1e-3)",
               cf_lap.mean, cf_lap.median, cf_lap.q05, cf_lap.q95, cf_exact.mean, cf_exact.median, cf_exact.q05,
               cf_exact.q95, cf_gap));
}

void order_checks()
{
    const auto t0 = std::chrono::steady_clock::now();
    const ModelCatalogEntry e = newton_cooling(20);
    const auto cf = e.closed_form(e.x1_true, e.theta_true, e.times());
    auto error = [&](Method method, int m) {
        const Matrix x = integrate(e.system, e.x1_true, e.theta_true, e.grid(m), method).states;
        return (x - cf.states).cwiseAbs().maxCoeff();
    };
    std::string detail;
    bool ok = true;
    for (Method method : {Method::Euler, Method::Rk4}) {
        const double lo = method == Method::Euler ? 0.8 : 3.5;
        const double hi = method == Method::Euler ? 1.2 : 4.5;
        detail += std::string(to_string(method)) + " orders";
        for (int m : {1, 2, 4}) {
            const double order = std::log2(error(method, m) / error(method, 2 * m));
            ok = ok && order >= lo && order <= hi;
            detail += fmt(" %.3f", order);
        }
        detail += fmt(" (in [%.1f, %.1f]); ", lo, hi);
    }
    const double secs = seconds_since(t0);
    report(ok && secs < 1.0, "4 order of accuracy", detail + fmt("%.3f s (< 1 s)", secs));
}

void derivative_checks()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    for (const auto& e : {newton_cooling(20), fitzhugh_nagumo(), logistic()}) {
        const Dataset data = simulate_data(e, kCoolingSeed);
        const TimeGrid grid(data.times, 1);
        auto g = [&](const Vector& x) { return fit_stats(e.system, x, e.theta_true, data, grid, Method::Rk4).g; };
        const FitStats s = fit_stats(e.system, e.x1_true, e.theta_true, data, grid, Method::Rk4);
        const double ge = rel_error(s.grad, fd_gradient(g, e.x1_true));
        const double he = rel_error(s.hess, fd_hessian(g, e.x1_true));
        ok = ok && ge <= 1e-5 && he <= 1e-3;
        detail += fmt("%s grad %.1e hess %.1e; ", e.name.c_str(), ge, he);
    }
    const double secs = seconds_since(t0);
    report(ok && secs < 10.0, "5 derivative oracles", detail + fmt("limits 1e-5 / 1e-3; %.3f s (< 10 s)", secs));
}

void fhn_checks()
{
    const auto t0 = std::chrono::steady_clock::now();
    const ModelCatalogEntry e = fitzhugh_nagumo();
    const Dataset data = simulate_data(e, kFhnSeed);
    const PriorSpec pr = e.prior_for(data);
    const PipelineOptions opts = options(Method::Rk4, e.default_M2);
    InferenceResult res = infer(e, data, pr, {1, 2, 4, 8}, 1e-3, e.theta_center, opts);

    std::map<int, Vector> means(res.refine.history.begin(), res.refine.history.end());
    if (!means.count(2)) {
        means[2] = run_posterior(e, data, pr, 2, res.run.theta0, opts).mean;
    }
    if (!means.count(4)) {
        means[4] = run_posterior(e, data, pr, 4, res.run.theta0, opts).mean;
    }
    double change = 0.0;
    for (Eigen::Index i = 0; i < 3; ++i) {
        change = std::max(change, std::abs(means[4][i] - means[2][i]) / std::abs(means[2][i]));
    }
    const Vector th3 = res.run.samples.theta.col(2);
    const ParameterSummary s = summarize_draws(std::span<const double>(th3.data(), th3.size()));
    const double width = s.q95 - s.q05;
    const double secs = seconds_since(t0);
    const bool ok = res.refine.chosen_m <= 4 && change < 1e-3 && width >= 0.05 && width <= 0.5 && s.q05 <= 3.0 &&
                    s.q95 >= 3.0 && secs <= 900.0;
    report(ok, "6 FitzHugh-Nagumo m refinement",
           fmt("seed %llu; chosen m = %d (<= 4); max relative mean change m=2 vs m=4 %.2e (< 1e-3); theta3 90%% CI "
               "(%.3f, %.3f) width %.3f in [0.05, 0.5] contains 3; %.1f s (<= 900 s)",
               static_cast<unsigned long long>(kFhnSeed), res.refine.chosen_m, change, s.q05, s.q95, width, secs));
}

void census_checks()
{
    const auto t0 = std::chrono::steady_clock::now();
    const ModelCatalogEntry e = logistic();
    const Dataset data = load_csv(std::string(LAPODE_DATA_DIR) + "/census.csv");
    const PriorSpec pr = e.prior_for(data);
    const PosteriorRun run = run_posterior(e, data, pr, 1, e.theta_center, options(Method::Rk4, e.default_M2));
    auto median = [&](const Vector& v) {
        return summarize_draws(std::span<const double>(v.data(), v.size())).median;
    };
    const double m1 = median(run.samples.theta.col(0));
    const double m2 = median(run.samples.theta.col(1));
    Vector sigma2(static_cast<Eigen::Index>(run.samples.size()));
    for (std::size_t d = 0; d < run.samples.size(); ++d) {
        sigma2[static_cast<Eigen::Index>(d)] = 1.0 / run.samples.tau2[d];
    }
    const double ms = median(sigma2);
    const double secs = seconds_since(t0);
    report(std::abs(m1 - 0.020) <= 0.001 && std::abs(m2 - 532.125) <= 15.0 && ms > 16.0 && ms < 47.0 &&
               secs <= 60.0,
           "7 census reproduction",
           fmt("medians theta1 %.5f (|.-0.020| <= 0.001: %s), theta2 %.2f (|.-532.125| <= 15: %s), sigma2 %.2f "
               "(in (16, 47): %s); %.2f s (<= 60 s)",
               m1, std::abs(m1 - 0.020) <= 0.001 ? "ok" : "no", m2, std::abs(m2 - 532.125) <= 15.0 ? "ok" : "no", ms,
               ms > 16.0 && ms < 47.0 ? "ok" : "no", secs));
}

void sampler_checks()
{
    std::vector<Vector> pts;
    std::vector<double> lp;
    std::vector<GammaParams> tau;
    for (int k = 0; k < 10; ++k) {
        pts.push_back(vec({static_cast<double>(k)}));
        lp.push_back(-0.5 * (k - 4.0) * (k - 4.0) / 4.0);
        tau.push_back(GammaParams{2.0, 1.0});
    }
    const PosteriorGrid g = make_grid(pts, lp, tau);
    const std::size_t N = 100000;
    const SampleSet s = grid_sample(g, N, kSamplerSeed);
    std::vector<double> freq(10, 0.0);
    for (std::size_t idx : s.index) {
        freq[idx] += 1.0 / N;
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < 10; ++k) {
        const double se = std::sqrt(g.mass[k] * (1.0 - g.mass[k]) / N);
        worst = std::max(worst, std::abs(freq[k] - g.mass[k]) / se);
    }

    std::vector<double> axis;
    for (int k = 0; k < 25; ++k) {
        axis.push_back(-3.0 + 0.25 * k);
    }
    const auto dens = [](const Vector& th) { return -0.5 * (2.0 * th[0] * th[0] - 2.4 * th[0] * th[1] + 2.0 * th[1] * th[1]); };
    std::vector<double> exact;
    for (double a : axis) {
        for (double b : axis) {
            exact.push_back(dens(vec({a, b})));
        }
    }
    exact = normalize_log_weights(exact);
    GibbsOptions go;
    go.N = 100000;
    go.thin = 2;
    go.seed = kSamplerSeed;
    const GibbsResult gr = griddy_gibbs(make_target(dens), {axis, axis}, go, {12, 12});
    std::vector<double> gfreq(exact.size(), 0.0);
    for (Eigen::Index d = 0; d < gr.samples.theta.rows(); ++d) {
        const auto i = static_cast<std::size_t>(std::lround((gr.samples.theta(d, 0) + 3.0) / 0.25));
        const auto j = static_cast<std::size_t>(std::lround((gr.samples.theta(d, 1) + 3.0) / 0.25));
        gfreq[i * axis.size() + j] += 1.0 / go.N;
    }
    double tv = 0.0;
    for (std::size_t k = 0; k < exact.size(); ++k) {
        tv += 0.5 * std::abs(exact[k] - gfreq[k]);
    }
    report(worst <= 3.0 && tv <= 0.05, "8 sampler exactness",
           fmt("grid sampling max |freq - mass| %.2f binomial SE (<= 3) at N = 1e5; griddy Gibbs TV %.4f (<= 0.05) "
               "on %zu states",
               worst, tv, exact.size()));
}

void gamma_checks()
{
    struct Triple {
        int n, p;
        double a, b, u;
    };
    bool symbolic = true;
    for (const Triple& t : {Triple{20, 1, 0.1, 0.01, 37.5}, Triple{100, 2, 1.0, 2.0, 12.25}, Triple{40, 4, 0.5, 0.3, 801.0}}) {
        LaplaceEval ev;
        ev.u = t.u;
        ev.log_post = 0.0;
        PriorSpec pr;
        pr.a = t.a;
        pr.b = t.b;
        const GammaParams g = tau2_conditional(ev, t.n, t.p, pr);
        symbolic = symbolic && g.shape == t.n * t.p / 2.0 + t.a && g.rate == t.u / 2.0 + t.b;
    }
    const GammaParams g{10.1, 0.01 + 37.5 / 2.0};
    std::mt19937_64 rng(kSamplerSeed);
    const int N = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
        const double x = sample_gamma(g, rng);
        s1 += x;
        s2 += x * x;
    }
    const double mean = s1 / N;
    const double var = s2 / N - mean * mean;
    const double true_mean = g.shape / g.rate;
    const double true_var = g.shape / (g.rate * g.rate);
    const double z_mean = std::abs(mean - true_mean) / std::sqrt(true_var / N);
    const double z_var = std::abs(var - true_var) / (true_var * std::sqrt((2.0 + 6.0 / g.shape) / N));
    report(symbolic && z_mean <= 3.0 && z_var <= 3.0, "9 gamma conditional",
           fmt("shape np/2 + a and rate u/2 + b exact on 3 triples: %s; mean off by %.2f SE, variance by %.2f SE "
               "(<= 3) over 1e5 draws",
               symbolic ? "yes" : "no", z_mean, z_var));
}

struct ChainSummary {
    double lo = 0.0, hi = 0.0;
    bool finite = false;
    std::size_t evaluations = 0;
    double seconds = 0.0;
};

ChainSummary predator_prey_chain(const std::string& space)
{
    const auto t0 = std::chrono::steady_clock::now();
    ModelCatalogEntry e = predator_prey();
    e.n = 40;
    const Dataset data = simulate_data(e, kPredatorPreySeed);
    const PriorSpec pr = e.prior_for(data);
    PipelineOptions o = options(Method::Rk4, e.default_M2);
    o.sampler = "griddy";
    o.gibbs_points = 11;
    o.gibbs_space = space;
    o.N = 1000;
    o.thin = 5;
    const PosteriorRun run = run_posterior(e, data, pr, 1, e.theta_center, o);
    const Vector th3 = run.samples.theta.col(2);
    std::vector<double> sorted(th3.data(), th3.data() + th3.size());
    std::sort(sorted.begin(), sorted.end());
    ChainSummary c;
    c.lo = quantile_linear(sorted, 0.005);
    c.hi = quantile_linear(sorted, 0.995);
    c.finite = run.samples.theta.allFinite() && std::all_of(run.samples.tau2.begin(), run.samples.tau2.end(),
                                                            [](double t) { return std::isfinite(t) && t > 0.0; });
    c.evaluations = run.evaluations;
    c.seconds = seconds_since(t0);
    return c;
}

void predator_prey_smoke()
{
    const double truth = predator_prey().theta_true[2];
    // Raw-theta axes cannot follow the strong correlations at 11 points per axis;
    // shown for information only.
    const ChainSummary raw = predator_prey_chain("theta");
    std::printf("INFO  predator-prey raw-theta axes: theta3 99%% interval (%.3f, %.3f), %zu evaluations, %.1f s\n",
                raw.lo, raw.hi, raw.evaluations, raw.seconds);
    const ChainSummary z = predator_prey_chain("z");
    report(z.finite && z.lo <= truth && truth <= z.hi, "predator-prey smoke test",
           fmt("seed %llu, n = 40, 11 points per decorrelated axis, 5000 recorded scans; draws finite: %s; theta3 "
               "99%% interval (%.3f, %.3f) contains %.2f; %zu evaluations; %.1f s",
               static_cast<unsigned long long>(kPredatorPreySeed), z.finite ? "yes" : "no", z.lo, z.hi, truth,
               z.evaluations, z.seconds));
}

}  // namespace

int main()
{
    const auto t0 = std::chrono::steady_clock::now();
    const std::pair<const char*, void (*)()> checks[] = {
        {"1-3 cooling", cooling_checks}, {"4 order", order_checks},    {"5 derivatives", derivative_checks},
        {"6 fhn", fhn_checks},          {"7 census", census_checks}, {"8 samplers", sampler_checks},
        {"9 gamma", gamma_checks},      {"predator-prey", predator_prey_smoke},
    };
    for (const auto& [name, fn] : checks) {
        try {
            fn();
        } catch (const std::exception& ex) {
            report(false, name, std::string("exception: ") + ex.what());
        }
    }
    std::printf("%d failed; total %.1f s\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
