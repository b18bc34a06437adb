#ifndef LAPODE_TESTS_SUPPORT_HPP
#define LAPODE_TESTS_SUPPORT_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "lapode/models.hpp"
#include "lapode/sensitivity.hpp"

namespace lapode::testing {

inline Vector vec(std::initializer_list<double> values)
{
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) {
        v[i++] = x;
    }
    return v;
}

inline Box wide_box(int q)
{
    return Box{Vector::Constant(q, -1e6), Vector::Constant(q, 1e6)};
}

// dx/dt = 0
inline OdeSystem zero_system(int p, int q = 1)
{
    OdeSystem s;
    s.name = "zero";
    s.p = p;
    s.q = q;
    s.rhs = [](const ConstVectorRef&, double, const ConstVectorRef&, Eigen::Ref<Vector> dx) { dx.setZero(); };
    s.jac_x = [](const ConstVectorRef&, double, const ConstVectorRef&, Eigen::Ref<Matrix> J) { J.setZero(); };
    s.hess_x = [](const ConstVectorRef&, double, const ConstVectorRef&, Eigen::Ref<Matrix> H) { H.setZero(); };
    s.theta_support = wide_box(q);
    return s;
}

// dx/dt = x (p = 1)
inline OdeSystem growth_system()
{
    OdeSystem s;
    s.name = "growth";
    s.p = 1;
    s.q = 1;
    s.rhs = [](const ConstVectorRef& x, double, const ConstVectorRef&, Eigen::Ref<Vector> dx) { dx[0] = x[0]; };
    s.jac_x = [](const ConstVectorRef&, double, const ConstVectorRef&, Eigen::Ref<Matrix> J) { J(0, 0) = 1.0; };
    s.theta_support = wide_box(1);
    return s;
}

// dx/dt = c (constant vector given by theta)
inline OdeSystem constant_system(int p)
{
    OdeSystem s;
    s.name = "constant";
    s.p = p;
    s.q = p;
    s.rhs = [](const ConstVectorRef&, double, const ConstVectorRef& th, Eigen::Ref<Vector> dx) { dx = th; };
    s.jac_x = [](const ConstVectorRef&, double, const ConstVectorRef&, Eigen::Ref<Matrix> J) { J.setZero(); };
    s.theta_support = wide_box(p);
    return s;
}

inline double cooling_exact_state(double t, double x1, const Vector& theta)
{
    return theta[1] - (theta[1] - x1) * std::exp(theta[0] * t);
}

inline Dataset dataset_from(const std::vector<double>& times, const Matrix& y)
{
    Dataset d;
    d.times = times;
    d.y = y;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        d.columns.push_back("y" + std::to_string(j + 1));
    }
    return d;
}

// Central finite-difference gradient of a scalar function.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double rel = 1e-5)
{
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = rel * std::max(1.0, std::abs(x[i]));
        Vector a = x, b = x;
        a[i] += h;
        b[i] -= h;
        g[i] = (f(a) - f(b)) / (2.0 * h);
    }
    return g;
}

// Central finite-difference Hessian of a scalar function.
inline Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x, double rel = 1e-4)
{
    const auto p = x.size();
    Matrix H(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const double hi = rel * std::max(1.0, std::abs(x[i]));
            const double hj = rel * std::max(1.0, std::abs(x[j]));
            auto at = [&](double si, double sj) {
                Vector y = x;
                y[i] += si * hi;
                y[j] += sj * hj;
                return f(y);
            };
            H(i, j) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hi * hj);
        }
    }
    return 0.5 * (H + H.transpose());
}

inline double rel_error(const Matrix& a, const Matrix& b)
{
    return (a - b).norm() / std::max(1e-300, b.norm());
}

// Marginal log posterior of the cooling parameters by brute force: tau^2
// integrated analytically, x1 by trapezoidal quadrature. Flat prior on theta.
inline double cooling_marginal_quadrature(const Vector& theta, const std::vector<double>& t, const Matrix& y,
                                          double a, double b, double c, double mu,
                                          int K = 4000)
{
    const auto n = static_cast<double>(t.size());
    auto F = [&](double x1) {
        double s = (x1 - mu) * (x1 - mu) / c;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double r = y(static_cast<Eigen::Index>(i), 0) - cooling_exact_state(t[i] - t[0], x1, theta);
            s += r * r;
        }
        return s;
    };
    // F is quadratic in x1; its vertex and curvature locate the integration window.
    const double f0 = F(0.0), f1 = F(1.0), f2 = F(2.0);
    const double A = 0.5 * (f2 - 2.0 * f1 + f0);
    const double B = f1 - f0 - A;
    const double centre = -B / (2.0 * A);
    const double power = (n + 1.0) / 2.0 + a;
    const double half = 40.0 * std::sqrt((F(centre) + 2.0 * b) / (A * power));
    const double dx = 2.0 * half / K;
    std::vector<double> logs(static_cast<std::size_t>(K + 1));
    double top = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= K; ++k) {
        logs[static_cast<std::size_t>(k)] = -power * std::log(F(centre - half + k * dx) / 2.0 + b);
        top = std::max(top, logs[static_cast<std::size_t>(k)]);
    }
    double sum = 0.0;
    for (int k = 0; k <= K; ++k) {
        const double w = (k == 0 || k == K) ? 0.5 : 1.0;
        sum += w * std::exp(logs[static_cast<std::size_t>(k)] - top);
    }
    return top + std::log(sum * dx);
}

}  // namespace lapode::testing

#endif  // LAPODE_TESTS_SUPPORT_HPP
