#include "lapode/models.hpp"

#include <cmath>
#include <random>

namespace lapode {

namespace {

Vector vec(std::initializer_list<double> values)
{
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) {
        v[i++] = x;
    }
    return v;
}

Box box(std::initializer_list<double> lower, std::initializer_list<double> upper)
{
    return Box{vec(lower), vec(upper)};
}

SensitivityBundle cooling_closed_form(const Vector& x1, const Vector& theta, std::span<const double> times)
{
    const auto n = static_cast<Eigen::Index>(times.size());
    SensitivityBundle b;
    b.states.resize(n, 1);
    b.Z.assign(times.size(), Matrix::Zero(1, 1));
    b.W.assign(times.size(), Matrix::Zero(1, 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = std::exp(theta[0] * (times[i] - times[0]));
        b.states(i, 0) = theta[1] - (theta[1] - x1[0]) * e;
        b.Z[i](0, 0) = e;
    }
    return b;
}

SensitivityBundle logistic_closed_form(const Vector& x1, const Vector& theta, std::span<const double> times)
{
    const auto n = static_cast<Eigen::Index>(times.size());
    const double r = theta[0];
    const double K = theta[1];
    const double x0 = x1[0];
    SensitivityBundle b;
    b.states.resize(n, 1);
    b.Z.assign(times.size(), Matrix::Zero(1, 1));
    b.W.assign(times.size(), Matrix::Zero(1, 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double E = std::exp(r * (times[i] - times[0]));
        const double D = K + x0 * (E - 1.0);
        b.states(i, 0) = K * x0 * E / D;
        b.Z[i](0, 0) = K * K * E / (D * D);
        b.W[i](0, 0) = -2.0 * K * K * E * (E - 1.0) / (D * D * D);
    }
    return b;
}

}  // namespace

PriorSpec ModelCatalogEntry::prior_for(const Dataset& data) const
{
    if (data.n() < 1 || data.p() != system.p) {
        throw SpecError("data do not match model '" + name + "'");
    }
    PriorSpec pr = prior;
    pr.mu_x1 = data.y.row(0).transpose();
    return pr;
}

ModelCatalogEntry newton_cooling(int n)
{
    double h = 0.0;
    for (const auto& d : kCoolingDesigns) {
        if (d.n == n) {
            h = d.h;
        }
    }
    if (h == 0.0) {
        throw SpecError("cooling designs have n in {20, 50, 100, 150}");
    }
    ModelCatalogEntry e;
    e.name = "cooling";
    e.system.name = "cooling";
    e.system.p = 1;
    e.system.q = 2;
    e.system.rhs = [](const ConstVectorRef& x, double, const ConstVectorRef& th, Eigen::Ref<Vector> dx) {
        dx[0] = th[0] * (x[0] - th[1]);
    };
    e.system.jac_x = [](const ConstVectorRef&, double, const ConstVectorRef& th, Eigen::Ref<Matrix> J) {
        J(0, 0) = th[0];
    };
    e.system.hess_x = [](const ConstVectorRef&, double, const ConstVectorRef&, Eigen::Ref<Matrix> H) {
        H.setZero();
    };
    e.system.theta_support = box({-200.0, -200.0}, {0.0, 500.0});
    e.theta_true = vec({-0.5, 80.0});
    e.x1_true = vec({20.0});
    e.sigma2 = 25.0;
    e.n = n;
    e.h = h;
    e.prior.theta_box = e.system.theta_support;
    e.theta_center = vec({-0.547, 80.933});
    e.reported_y1 = vec({15.515});
    e.closed_form = cooling_closed_form;
    e.default_M2 = 25;
    return e;
}

ModelCatalogEntry fitzhugh_nagumo()
{
    ModelCatalogEntry e;
    e.name = "fhn";
    e.system.name = "fhn";
    e.system.p = 2;
    e.system.q = 3;
    e.system.rhs = [](const ConstVectorRef& x, double, const ConstVectorRef& th, Eigen::Ref<Vector> dx) {
        dx[0] = th[2] * (x[0] - x[0] * x[0] * x[0] / 3.0 + x[1]);
        dx[1] = -(x[0] - th[0] + th[1] * x[1]) / th[2];
    };
    e.system.jac_x = [](const ConstVectorRef& x, double, const ConstVectorRef& th, Eigen::Ref<Matrix> J) {
        J(0, 0) = th[2] * (1.0 - x[0] * x[0]);
        J(0, 1) = th[2];
        J(1, 0) = -1.0 / th[2];
        J(1, 1) = -th[1] / th[2];
    };
    e.system.hess_x = [](const ConstVectorRef& x, double, const ConstVectorRef& th, Eigen::Ref<Matrix> H) {
        H.setZero();
        H(0, 0) = -2.0 * th[2] * x[0];
    };
    e.system.theta_support = box({-0.8, -0.8, 0.0}, {0.8, 0.8, 8.0});
    e.theta_true = vec({0.2, 0.2, 3.0});
    e.x1_true = vec({-1.0, 1.0});
    e.sigma2 = 0.25;
    e.n = 100;
    e.h = 0.2;
    e.prior.theta_box = e.system.theta_support;
    e.theta_center = vec({0.199, 0.131, 3.056});
    e.reported_y1 = vec({-1.449, 1.092});
    e.default_M2 = 15;
    return e;
}

namespace {

constexpr double kDilution = 0.68;
constexpr double kInflow = 8.0;

// Holling type II terms of the predator-prey system and their derivatives.
struct Saturation {
    double v, d_num, d_den, d_den_den, d_num_den;
};

// k * a * b / (s + a): value and derivatives in a (denominator variable) and b.
Saturation saturation(double k, double s, double a, double b)
{
    const double w = s + a;
    return {k * a * b / w, k * a / w, k * b * s / (w * w), -2.0 * k * b * s / (w * w * w), k * s / (w * w)};
}

}  // namespace

ModelCatalogEntry predator_prey()
{
    ModelCatalogEntry e;
    e.name = "predator-prey";
    e.system.name = "predator-prey";
    e.system.p = 4;
    e.system.q = 7;
    e.system.rhs = [](const ConstVectorRef& x, double, const ConstVectorRef& th, Eigen::Ref<Vector> dx) {
        const double a1 = th[0] * x[0] * x[1] / (th[1] + x[0]);
        const double a2 = th[2] * x[1] * x[3] / (th[3] + x[1]);
        const double b = th[2] * x[1] * x[2] / (th[3] + x[1]);
        dx[0] = kDilution * (kInflow - x[0]) - a1;
        dx[1] = a1 - a2 / th[4] - kDilution * x[1];
        dx[2] = b - (kDilution + th[5] + th[6]) * x[2];
        dx[3] = b - (kDilution + th[5]) * x[3];
    };
    e.system.jac_x = [](const ConstVectorRef& x, double, const ConstVectorRef& th, Eigen::Ref<Matrix> J) {
        const Saturation a1 = saturation(th[0], th[1], x[0], x[1]);
        const Saturation a2 = saturation(th[2], th[3], x[1], x[3]);
        const Saturation b = saturation(th[2], th[3], x[1], x[2]);
        J.setZero();
        J(0, 0) = -kDilution - a1.d_den;
        J(0, 1) = -a1.d_num;
        J(1, 0) = a1.d_den;
        J(1, 1) = a1.d_num - a2.d_den / th[4] - kDilution;
        J(1, 3) = -a2.d_num / th[4];
        J(2, 1) = b.d_den;
        J(2, 2) = b.d_num - (kDilution + th[5] + th[6]);
        J(3, 1) = b.d_den;
        J(3, 2) = b.d_num;
        J(3, 3) = -(kDilution + th[5]);
    };
    e.system.hess_x = [](const ConstVectorRef& x, double, const ConstVectorRef& th, Eigen::Ref<Matrix> H) {
        const Saturation a1 = saturation(th[0], th[1], x[0], x[1]);
        const Saturation a2 = saturation(th[2], th[3], x[1], x[3]);
        const Saturation b = saturation(th[2], th[3], x[1], x[2]);
        const int p = 4;
        H.setZero();
        auto set = [&](int j, int u, int v, double value) {
            H(u + v * p, j) = value;
            H(v + u * p, j) = value;
        };
        set(0, 0, 0, -a1.d_den_den);
        set(0, 0, 1, -a1.d_num_den);
        set(1, 0, 0, a1.d_den_den);
        set(1, 0, 1, a1.d_num_den);
        set(1, 1, 1, -a2.d_den_den / th[4]);
        set(1, 1, 3, -a2.d_num_den / th[4]);
        for (int j : {2, 3}) {
            set(j, 1, 1, b.d_den_den);
            set(j, 1, 2, b.d_num_den);
        }
    };
    e.system.theta_support =
        box({0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0}, {70.0, 10.0, 70.0, 70.0, 70.0, 10.0, 10.0});
    e.theta_true = vec({3.3, 0.43, 2.25, 1.5, 2.5, 0.055, 0.4});
    e.x1_true = vec({1.0, 3.0, 5.0, 5.0});
    e.sigma2 = 1.0;
    e.n = 100;
    e.h = 0.1;
    e.prior.theta_box = e.system.theta_support;
    e.theta_center = vec({3.295, 1.444, 2.225, 1.393, 3.883, 0.248, 0.397});
    e.reported_y1 = vec({0.103, 3.185, 6.298, 5.137});
    e.positive_data = true;
    e.default_M2 = 15;
    e.default_sampler = "griddy";
    return e;
}

ModelCatalogEntry logistic()
{
    ModelCatalogEntry e;
    e.name = "logistic";
    e.system.name = "logistic";
    e.system.p = 1;
    e.system.q = 2;
    e.system.rhs = [](const ConstVectorRef& x, double, const ConstVectorRef& th, Eigen::Ref<Vector> dx) {
        dx[0] = th[0] * x[0] - th[0] * x[0] * x[0] / th[1];
    };
    e.system.jac_x = [](const ConstVectorRef& x, double, const ConstVectorRef& th, Eigen::Ref<Matrix> J) {
        J(0, 0) = th[0] - 2.0 * th[0] * x[0] / th[1];
    };
    e.system.hess_x = [](const ConstVectorRef&, double, const ConstVectorRef& th, Eigen::Ref<Matrix> H) {
        H(0, 0) = -2.0 * th[0] / th[1];
    };
    e.system.theta_support = box({0.0, 300.0}, {1.0, 1000.0});
    e.theta_true = vec({0.020, 532.125});
    e.x1_true = vec({3.929});
    e.sigma2 = 26.314;
    e.n = 23;
    e.h = 10.0;
    e.prior.theta_box = e.system.theta_support;
    e.theta_center = vec({0.020, 532.125});
    e.reported_y1 = vec({3.929});
    e.closed_form = logistic_closed_form;
    e.default_M2 = 35;
    return e;
}

std::vector<std::string> model_names()
{
    return {"cooling", "fhn", "predator-prey", "logistic"};
}

ModelCatalogEntry model_by_name(std::string_view name)
{
    if (name == "cooling") {
        return newton_cooling();
    }
    if (name == "fhn" || name == "fitzhugh-nagumo") {
        return fitzhugh_nagumo();
    }
    if (name == "predator-prey" || name == "pp") {
        return predator_prey();
    }
    if (name == "logistic" || name == "census") {
        return logistic();
    }
    std::string known;
    for (const auto& m : model_names()) {
        known += (known.empty() ? "" : ", ") + m;
    }
    throw SpecError("unknown model '" + std::string(name) + "' (known: " + known + ")");
}

ExactCoolingEval cooling_exact(const Vector& theta, const Dataset& data, const PriorSpec& prior)
{
    if (data.p() != 1 || theta.size() != 2) {
        throw SpecError("exact cooling posterior needs p = 1 and q = 2");
    }
    const auto& t = data.times;
    const double h = t.size() > 1 ? t[1] - t[0] : 1.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs((t[i] - t[0]) - h * static_cast<double>(i)) > 1e-9 * std::max(1.0, std::abs(t[i]))) {
            throw SpecError("exact cooling posterior needs equally spaced times");
        }
    }
    ExactCoolingEval out;
    const double log_prior = prior.log_prior_at(theta);
    if (!std::isfinite(log_prior)) {
        return out;
    }
    const double mu = prior.mu_x1[0];
    const double c = prior.c;
    double szz = 0.0, sze = 0.0, see = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const double e = std::exp(theta[0] * (t[static_cast<std::size_t>(i)] - t[0]));
        const double z = data.y(i, 0) - theta[1] + theta[1] * e;
        szz += z * z;
        sze += z * e;
        see += e * e;
    }
    const double A = see + 1.0 / c;
    const double B = sze + mu / c;
    out.u = szz + mu * mu / c - B * B / A;
    const double shape = data.n() / 2.0 + prior.a;
    out.tau2 = GammaParams{shape, out.u / 2.0 + prior.b};
    out.log_post = log_prior - shape * std::log(out.tau2.rate) - 0.5 * std::log(A);
    if (!std::isfinite(out.log_post)) {
        out.log_post = kNegInf;
    }
    return out;
}

double cooling_exact_posterior(const Vector& theta, const Dataset& data, const PriorSpec& prior)
{
    return cooling_exact(theta, data, prior).log_post;
}

Dataset simulate_data(const OdeSystem& sys, const Vector& theta, const Vector& x1, double sigma2,
                      const std::vector<double>& times, std::uint64_t seed, int m_fine, bool positivity)
{
    if (!(sigma2 >= 0.0)) {
        throw SpecError("noise variance must be non-negative");
    }
    if (m_fine < 1) {
        throw SpecError("m_fine must be at least 1");
    }
    const Trajectory traj = integrate(sys, x1, theta, TimeGrid(times, m_fine), Method::Rk4);
    Dataset d;
    d.times = times;
    d.y = traj.states;
    for (int j = 0; j < sys.p; ++j) {
        d.columns.push_back("y" + std::to_string(j + 1));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
    for (Eigen::Index i = 0; i < d.y.rows(); ++i) {
        for (Eigen::Index j = 0; j < d.y.cols(); ++j) {
            if (sigma2 > 0.0) {
                d.y(i, j) += normal(rng);
            }
            if (positivity) {
                d.y(i, j) = std::abs(d.y(i, j));
            }
        }
    }
    return d;
}

Dataset simulate_data(const ModelCatalogEntry& entry, std::uint64_t seed, int m_fine)
{
    return simulate_data(entry.system, entry.theta_true, entry.x1_true, entry.sigma2, entry.times(), seed,
                         m_fine, entry.positive_data);
}

}  // namespace lapode
