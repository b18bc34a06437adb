#include "lapode/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

namespace lapode {

Target make_target(LogDensity density)
{
    return [density = std::move(density)](const Vector& theta, const Vector*) {
        PointEval pe;
        pe.log_post = density(theta);
        if (!std::isfinite(pe.log_post)) {
            pe.log_post = kNegInf;
        }
        return pe;
    };
}

Target make_target(const LaplacePosterior& posterior)
{
    return [&posterior](const Vector& theta, const Vector* warm) {
        PointEval pe;
        const LaplaceEval ev = posterior.evaluate(theta, warm);
        if (ev.finite()) {
            pe.log_post = ev.log_post;
            pe.tau2 = posterior.tau2_params(ev);
            pe.x1_hat = ev.x1_hat;
        } else {
            pe.diverged = posterior.prior().theta_box.contains(theta);
        }
        return pe;
    };
}

namespace {

struct FdDerivatives {
    double f0 = 0.0;
    Vector grad;
    Matrix neg_hess;
};

FdDerivatives fd_derivatives(const LogDensity& density, const Vector& theta0)
{
    const auto q = theta0.size();
    Vector h(q);
    for (Eigen::Index i = 0; i < q; ++i) {
        h[i] = 1e-4 * std::max(1.0, std::abs(theta0[i]));
    }
    auto f = [&](const Vector& t) {
        const double v = density(t);
        if (!std::isfinite(v)) {
            throw NumericalError(
                "Hessian at the center: log posterior is not finite near theta0; choose a theta0 inside the support");
        }
        return v;
    };
    FdDerivatives d;
    d.f0 = f(theta0);
    d.grad.resize(q);
    d.neg_hess.resize(q, q);
    Matrix& H = d.neg_hess;
    for (Eigen::Index i = 0; i < q; ++i) {
        Vector tp = theta0, tm = theta0;
        tp[i] += h[i];
        tm[i] -= h[i];
        const double fp = f(tp), fm = f(tm);
        d.grad[i] = (fp - fm) / (2.0 * h[i]);
        H(i, i) = -(fp - 2.0 * d.f0 + fm) / (h[i] * h[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            Vector pp = theta0, pm = theta0, mp = theta0, mm = theta0;
            pp[i] += h[i];
            pp[j] += h[j];
            pm[i] += h[i];
            pm[j] -= h[j];
            mp[i] -= h[i];
            mp[j] += h[j];
            mm[i] -= h[i];
            mm[j] -= h[j];
            H(i, j) = H(j, i) = -(f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[i] * h[j]);
        }
    }
    return d;
}

Matrix repaired_inverse(const Matrix& H)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigen-decomposition of the Hessian at the center failed");
    }
    Vector lambda = eig.eigenvalues();
    double min_pos = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda[i] > 0.0) {
            min_pos = std::min(min_pos, lambda[i]);
        }
    }
    if (!std::isfinite(min_pos)) {
        throw NumericalError("no curvature at center; choose a different theta0");
    }
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (!(lambda[i] > 0.0)) {
            lambda[i] = min_pos;
        }
    }
    const Matrix& V = eig.eigenvectors();
    Matrix sigma = V * lambda.cwiseInverse().asDiagonal() * V.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

}  // namespace

Matrix negative_hessian_fd(const LogDensity& density, const Vector& theta0)
{
    return fd_derivatives(density, theta0).neg_hess;
}

Matrix hessian_center(const LogDensity& density, const Vector& theta0)
{
    return repaired_inverse(negative_hessian_fd(density, theta0));
}

ModeSearch find_mode(const LogDensity& density, const Vector& theta0, int max_iter)
{
    ModeSearch ms;
    ms.theta = theta0;
    ms.log_post = density(theta0);
    if (!std::isfinite(ms.log_post)) {
        throw NumericalError("log posterior is not finite at the starting center");
    }
    for (; ms.iterations < max_iter; ++ms.iterations) {
        const FdDerivatives d = fd_derivatives(density, ms.theta);
        const Vector step = repaired_inverse(d.neg_hess) * d.grad;
        bool moved = false;
        double scale = 1.0;
        for (int k = 0; k < 30; ++k, scale *= 0.5) {
            const Vector trial = ms.theta + scale * step;
            const double f = density(trial);
            if (std::isfinite(f) && f > ms.log_post) {
                const double gain = f - ms.log_post;
                ms.theta = trial;
                ms.log_post = f;
                moved = true;
                if (gain < 1e-8) {
                    ms.converged = true;
                }
                break;
            }
        }
        if (!moved) {
            ms.converged = true;
        }
        if (ms.converged) {
            ++ms.iterations;
            break;
        }
    }
    return ms;
}

Vector GridSpec::theta_of(const Vector& z) const
{
    return theta0 + U * (D.cwiseSqrt().cwiseProduct(z));
}

Vector GridSpec::z_of(const Vector& theta) const
{
    return (U.transpose() * (theta - theta0)).cwiseQuotient(D.cwiseSqrt());
}

GridSpec make_grid_spec(const Vector& theta0, const Matrix& sigma_hat)
{
    const auto q = theta0.size();
    if (q == 0 || sigma_hat.rows() != q || sigma_hat.cols() != q) {
        throw SpecError("sigma_hat must be a q x q matrix matching theta0");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (sigma_hat + sigma_hat.transpose()));
    if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
        throw SpecError("sigma_hat must be symmetric positive definite");
    }
    GridSpec spec;
    spec.theta0 = theta0;
    spec.sigma_hat = sigma_hat;
    spec.U = eig.eigenvectors();
    spec.D = eig.eigenvalues();
    spec.ranges.assign(static_cast<std::size_t>(q), AxisRange{});
    return spec;
}

namespace {

std::vector<double> linspace(double lo, double hi, int count)
{
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = 0.5 * (lo + hi);
        return out;
    }
    for (int k = 0; k < count; ++k) {
        out[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (count - 1);
    }
    out.back() = hi;
    return out;
}

struct Lattice {
    std::vector<std::vector<double>> axes;
    std::size_t size() const
    {
        std::size_t s = 1;
        for (const auto& a : axes) {
            s *= a.size();
        }
        return s;
    }
    // Decodes a flat index (last axis fastest).
    std::vector<std::size_t> digits(std::size_t flat) const
    {
        std::vector<std::size_t> d(axes.size());
        for (std::size_t k = axes.size(); k-- > 0;) {
            d[k] = flat % axes[k].size();
            flat /= axes[k].size();
        }
        return d;
    }
    Vector point(std::size_t flat) const
    {
        const auto d = digits(flat);
        Vector z(static_cast<Eigen::Index>(axes.size()));
        for (std::size_t k = 0; k < axes.size(); ++k) {
            z[static_cast<Eigen::Index>(k)] = axes[k][d[k]];
        }
        return z;
    }
};

// Rows along the last axis run in parallel; within a row each point warm-starts
// from its predecessor, and each row starts from `anchor`.
std::vector<PointEval> evaluate_lattice(const Target& target, const GridSpec& spec, const Lattice& lat,
                                        unsigned threads, const Vector* anchor)
{
    const std::size_t total = lat.size();
    const std::size_t row_len = lat.axes.back().size();
    const std::size_t rows = total / row_len;
    std::vector<PointEval> out(total);
    parallel_for(rows, threads, [&](std::size_t r) {
        Vector warm;
        if (anchor) {
            warm = *anchor;
        }
        for (std::size_t k = 0; k < row_len; ++k) {
            const std::size_t flat = r * row_len + k;
            PointEval pe = target(spec.theta_of(lat.point(flat)), warm.size() ? &warm : nullptr);
            if (std::isfinite(pe.log_post) && pe.x1_hat.size()) {
                warm = pe.x1_hat;
            }
            out[flat] = std::move(pe);
        }
    });
    return out;
}

}  // namespace

RangeSearch find_ranges(const Target& target, GridSpec& spec, int M1, double eta, unsigned threads,
                        const Vector* anchor)
{
    if (M1 < 1) {
        throw SpecError("M1 must be at least 1");
    }
    if (!(eta > 0.0 && eta < 1.0)) {
        throw SpecError("eta must lie in (0, 1)");
    }
    const auto q = static_cast<std::size_t>(spec.dim());
    const int per_axis = 2 * M1 + 1;
    std::vector<double> L(q, 4.0);
    RangeSearch rs;
    constexpr int kMaxExpansions = 2;

    for (int round = 0;; ++round) {
        Lattice lat;
        for (std::size_t i = 0; i < q; ++i) {
            lat.axes.push_back(linspace(-L[i], L[i], per_axis));
        }
        const auto evals = evaluate_lattice(target, spec, lat, threads, anchor);
        rs.evaluations += static_cast<int>(evals.size());

        double max_lp = kNegInf;
        std::size_t best = 0;
        for (std::size_t k = 0; k < evals.size(); ++k) {
            if (evals[k].log_post > max_lp) {
                max_lp = evals[k].log_post;
                best = k;
            }
        }
        if (!std::isfinite(max_lp)) {
            throw NumericalError("log posterior is -inf on the whole coarse grid; check theta0 and the prior box");
        }

        std::vector<double> lo(q, std::numeric_limits<double>::infinity());
        std::vector<double> hi(q, -std::numeric_limits<double>::infinity());
        std::vector<double> edge(q, 0.0);
        for (std::size_t k = 0; k < evals.size(); ++k) {
            const double w = std::exp(evals[k].log_post - max_lp);
            const auto d = lat.digits(k);
            for (std::size_t i = 0; i < q; ++i) {
                if (d[i] == 0 || d[i] + 1 == lat.axes[i].size()) {
                    edge[i] = std::max(edge[i], w);
                }
                if (w > eta) {
                    lo[i] = std::min(lo[i], lat.axes[i][d[i]]);
                    hi[i] = std::max(hi[i], lat.axes[i][d[i]]);
                }
            }
        }

        bool expand = false;
        for (std::size_t i = 0; i < q; ++i) {
            expand = expand || edge[i] > kEdgeMassThreshold;
        }
        if (expand && round < kMaxExpansions) {
            for (std::size_t i = 0; i < q; ++i) {
                if (edge[i] > kEdgeMassThreshold) {
                    L[i] *= 2.0;
                    ++rs.expansions;
                }
            }
            continue;
        }
        if (expand) {
            spec.warnings.push_back("posterior mass reaches the edge of the expanded coarse box; ranges may be truncated");
        }

        const auto best_d = lat.digits(best);
        for (std::size_t i = 0; i < q; ++i) {
            if (!(hi[i] > lo[i])) {
                const double cell = 2.0 * L[i] / (per_axis - 1);
                const double centre = lat.axes[i][best_d[i]];
                lo[i] = centre - 0.5 * cell;
                hi[i] = centre + 0.5 * cell;
                spec.warnings.push_back("axis " + std::to_string(i + 1) +
                                        " has a degenerate range; widened to one coarse cell");
            }
            spec.ranges[i] = AxisRange{lo[i], hi[i]};
        }
        spec.M1 = M1;
        spec.eta = eta;
        return rs;
    }
}

PosteriorGrid make_grid(std::vector<Vector> theta, std::vector<double> log_post, std::vector<GammaParams> tau2)
{
    if (theta.size() != log_post.size() || theta.size() != tau2.size()) {
        throw SpecError("grid arrays must have equal length");
    }
    PosteriorGrid g;
    g.theta = std::move(theta);
    g.log_post = std::move(log_post);
    g.tau2 = std::move(tau2);
    g.mass = normalize_log_weights(g.log_post, &g.log_norm);
    return g;
}

PosteriorGrid build_grid(const Target& target, const GridSpec& spec, int M2, unsigned threads,
                         const Vector* anchor)
{
    if (M2 < 0) {
        throw SpecError("M2 must be non-negative");
    }
    const auto q = static_cast<std::size_t>(spec.dim());
    if (spec.ranges.size() != q) {
        throw SpecError("grid spec has no ranges; run find_ranges first");
    }
    const int per_axis = 2 * M2 + 1;
    double count = 1.0;
    for (std::size_t i = 0; i < q; ++i) {
        count *= per_axis;
    }
    if (count > static_cast<double>(kMaxGridPoints)) {
        throw NumericalError("grid of " + std::to_string(static_cast<long long>(count)) +
                             " points is too large; reduce M2 or use griddy Gibbs");
    }
    Lattice lat;
    for (std::size_t i = 0; i < q; ++i) {
        lat.axes.push_back(linspace(spec.ranges[i].lower, spec.ranges[i].upper, per_axis));
    }
    auto evals = evaluate_lattice(target, spec, lat, threads, anchor);

    std::vector<Vector> theta(evals.size());
    std::vector<double> lp(evals.size());
    std::vector<GammaParams> tau2(evals.size());
    std::vector<Vector> z(evals.size());
    int diverged = 0;
    for (std::size_t k = 0; k < evals.size(); ++k) {
        z[k] = lat.point(k);
        theta[k] = spec.theta_of(z[k]);
        lp[k] = evals[k].log_post;
        tau2[k] = evals[k].tau2;
        diverged += evals[k].diverged ? 1 : 0;
    }
    PosteriorGrid g = make_grid(std::move(theta), std::move(lp), std::move(tau2));
    g.z = std::move(z);
    g.diverged = diverged;
    return g;
}

Vector grid_mean(const PosteriorGrid& grid)
{
    if (grid.size() == 0) {
        throw SpecError("empty grid");
    }
    Vector mean = Vector::Zero(grid.theta.front().size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid.mass[k] > 0.0) {
            mean += grid.mass[k] * grid.theta[k];
        }
    }
    return mean;
}

SampleSet grid_sample(const PosteriorGrid& grid, std::size_t N, std::uint64_t seed)
{
    if (N == 0) {
        throw SpecError("number of draws must be at least 1");
    }
    if (grid.size() == 0) {
        throw SpecError("empty grid");
    }
    std::vector<double> cum(grid.size());
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        acc += grid.mass[k];
        cum[k] = acc;
        if (grid.mass[k] > 0.0) {
            last_positive = k;
        }
    }
    if (!(acc > 0.0)) {
        throw NumericalError("all grid masses are zero");
    }

    const auto t0 = std::chrono::steady_clock::now();
    const auto q = grid.theta.front().size();
    SampleSet s;
    s.theta.resize(static_cast<Eigen::Index>(N), q);
    s.tau2.resize(N);
    s.index.resize(N);
    s.seed = seed;
    s.method = "grid";
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t d = 0; d < N; ++d) {
        const double u = unif(rng) * acc;
        auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
        k = std::min(k, last_positive);
        s.index[d] = k;
        s.theta.row(static_cast<Eigen::Index>(d)) = grid.theta[k].transpose();
        s.tau2[d] = sample_gamma(grid.tau2[k], rng);
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

GibbsResult griddy_gibbs(const Target& target, const std::vector<std::vector<double>>& axes,
                         const GibbsOptions& opts, std::vector<std::size_t> init)
{
    const std::size_t q = axes.size();
    if (q == 0 || init.size() != q) {
        throw SpecError("griddy Gibbs needs one axis and one starting index per parameter");
    }
    for (std::size_t j = 0; j < q; ++j) {
        if (axes[j].empty() || init[j] >= axes[j].size()) {
            throw SpecError("griddy Gibbs axis " + std::to_string(j + 1) + " is empty or the start is off-grid");
        }
    }
    if (opts.N == 0 || opts.thin == 0) {
        throw SpecError("griddy Gibbs needs N >= 1 and thin >= 1");
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::vector<std::size_t>, PointEval> cache;
    auto theta_at = [&](const std::vector<std::size_t>& idx) {
        Vector t(static_cast<Eigen::Index>(q));
        for (std::size_t j = 0; j < q; ++j) {
            t[static_cast<Eigen::Index>(j)] = axes[j][idx[j]];
        }
        return t;
    };
    auto eval = [&](const std::vector<std::size_t>& idx, const Vector* warm) -> const PointEval& {
        auto it = cache.find(idx);
        if (it == cache.end()) {
            it = cache.emplace(idx, target(theta_at(idx), warm)).first;
        }
        return it->second;
    };

    std::vector<std::size_t> state = std::move(init);
    Vector warm = eval(state, nullptr).x1_hat;

    const auto recorded = opts.N * opts.thin;
    const auto burn = static_cast<std::size_t>(std::ceil(opts.burn_in_fraction * static_cast<double>(recorded)));
    GibbsResult res;
    SampleSet& s = res.samples;
    s.theta.resize(static_cast<Eigen::Index>(opts.N), static_cast<Eigen::Index>(q));
    s.tau2.resize(opts.N);
    s.seed = opts.seed;
    s.method = "griddy-gibbs";
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> lp;
    std::size_t kept = 0;

    for (std::size_t scan = 0; scan < burn + recorded; ++scan) {
        for (std::size_t j = 0; j < q; ++j) {
            lp.assign(axes[j].size(), kNegInf);
            std::vector<std::size_t> probe = state;
            const Vector* w = warm.size() ? &warm : nullptr;
            for (std::size_t k = 0; k < axes[j].size(); ++k) {
                probe[j] = k;
                lp[k] = eval(probe, w).log_post;
            }
            const std::vector<double> prob = normalize_log_weights(lp, nullptr);
            double total = 0.0;
            for (double pk : prob) {
                total += pk;
            }
            if (!(total > 0.0)) {
                throw NumericalError("griddy Gibbs: full conditional of theta" + std::to_string(j + 1) +
                                     " is -inf at every grid value");
            }
            const double u = unif(rng) * total;
            double c = 0.0;
            std::size_t pick = prob.size();
            for (std::size_t k = 0; k < prob.size(); ++k) {
                c += prob[k];
                if (prob[k] > 0.0) {
                    pick = k;
                    if (u < c) {
                        break;
                    }
                }
            }
            state[j] = pick;
            const PointEval& cur = eval(state, nullptr);
            if (cur.x1_hat.size()) {
                warm = cur.x1_hat;
            }
        }
        if (scan >= burn && (scan - burn + 1) % opts.thin == 0) {
            const PointEval& cur = eval(state, nullptr);
            s.theta.row(static_cast<Eigen::Index>(kept)) = theta_at(state).transpose();
            s.tau2[kept] = sample_gamma(cur.tau2, rng);
            ++kept;
        }
    }
    res.scans = burn + recorded;
    res.evaluations = cache.size();
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

std::vector<std::vector<double>> gibbs_axes(const Vector& theta0, const Matrix& sigma_hat, const Box& box,
                                            int points)
{
    if (points < 1) {
        throw SpecError("griddy Gibbs needs at least one point per axis");
    }
    std::vector<std::vector<double>> axes;
    for (Eigen::Index i = 0; i < theta0.size(); ++i) {
        const double sd = std::sqrt(std::max(sigma_hat(i, i), 0.0));
        double lo = theta0[i] - 4.0 * sd;
        double hi = theta0[i] + 4.0 * sd;
        if (box.size() == theta0.size()) {
            lo = std::max(lo, box.lower[i]);
            hi = std::min(hi, box.upper[i]);
        }
        if (points == 1) {
            axes.push_back({theta0[i]});
        } else {
            axes.push_back(linspace(lo, hi, points));
        }
    }
    return axes;
}

RefineResult refine_m(const std::function<Vector(int m)>& pipeline, const std::vector<int>& m_sequence,
                      double rel_tol)
{
    if (m_sequence.empty()) {
        throw SpecError("m sequence is empty");
    }
    RefineResult r;
    for (std::size_t k = 0; k < m_sequence.size(); ++k) {
        r.history.emplace_back(m_sequence[k], pipeline(m_sequence[k]));
        if (k == 0) {
            continue;
        }
        const Vector& prev = r.history[k - 1].second;
        const Vector& cur = r.history[k].second;
        bool stable = prev.size() == cur.size();
        for (Eigen::Index i = 0; stable && i < cur.size(); ++i) {
            const double scale = std::max(std::abs(prev[i]), 1e-12);
            stable = std::abs(cur[i] - prev[i]) / scale < rel_tol;
        }
        if (stable) {
            r.chosen_m = m_sequence[k - 1];
            r.stabilized = true;
            return r;
        }
    }
    r.chosen_m = m_sequence.back();
    return r;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn)
{
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next = count;
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace lapode
