#ifndef LAPODE_ODE_HPP
#define LAPODE_ODE_HPP

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lapode/numeric.hpp"

namespace lapode {

using ConstVectorRef = Eigen::Ref<const Vector>;

// f(x, t; theta) written into `dx` (length p).
using RhsFn = std::function<void(const ConstVectorRef& x, double t, const ConstVectorRef& theta,
                                 Eigen::Ref<Vector> dx)>;
// df_j/dx_u written into a p x p matrix.
using JacobianFn = std::function<void(const ConstVectorRef& x, double t, const ConstVectorRef& theta,
                                      Eigen::Ref<Matrix> jac)>;
// Second derivatives written into a (p*p) x p matrix: column j holds the p x p
// block d2 f_j / dx_u dx_v stored column-major, i.e. entry (u + v*p, j).
using HessianFn = std::function<void(const ConstVectorRef& x, double t, const ConstVectorRef& theta,
                                     Eigen::Ref<Matrix> hess)>;

// Open box  lower < theta < upper  (componentwise).
struct Box {
    Vector lower;
    Vector upper;

    int size() const { return static_cast<int>(lower.size()); }
    bool contains(const Vector& theta) const;
    void validate() const;
};

struct OdeSystem {
    std::string name;
    int p = 0;  // state dimension
    int q = 0;  // parameter dimension
    RhsFn rhs;
    JacobianFn jac_x;
    HessianFn hess_x;  // optional; central differences of jac_x when empty
    Box theta_support;

    void validate() const;

    // Checked evaluations: a non-finite result raises EvalError at (t, x).
    void eval_rhs(const ConstVectorRef& x, double t, const ConstVectorRef& theta,
                  Eigen::Ref<Vector> dx) const;
    void eval_jac(const ConstVectorRef& x, double t, const ConstVectorRef& theta,
                  Eigen::Ref<Matrix> jac) const;
    void eval_hess(const ConstVectorRef& x, double t, const ConstVectorRef& theta,
                   Eigen::Ref<Matrix> hess) const;

    Vector rhs_at(const Vector& x, double t, const Vector& theta) const;
    Matrix jac_at(const Vector& x, double t, const Vector& theta) const;
    Matrix hess_at(const Vector& x, double t, const Vector& theta) const;
};

enum class Method { Euler, Rk4 };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

// Observation times t_1 < ... < t_n with m equal sub-steps per interval.
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(std::vector<double> times, int m = 1);

    static TimeGrid uniform(int n, double h, int m = 1, double t0 = 0.0);

    const std::vector<double>& times() const { return times_; }
    int size() const { return static_cast<int>(times_.size()); }
    int m() const { return m_; }
    double max_spacing() const;

    TimeGrid with_m(int m) const { return TimeGrid(times_, m); }
    // Appends `count` points continuing with the trailing spacing.
    TimeGrid extended(int count) const;

    // Boundaries of the m sub-steps inside interval [t_{i-1}, t_i], i >= 1 (0-based).
    // Returns m + 1 values with the first equal to t_{i-1} and the last equal to t_i.
    std::vector<double> substeps(int i) const;

private:
    std::vector<double> times_;
    int m_ = 1;
};

struct Trajectory {
    Matrix states;  // n x p, row i is x at t_i
    Method method = Method::Rk4;
    int m = 1;
};

Vector step_euler(const OdeSystem& sys, const Vector& x, double t, double dt, const Vector& theta);
Vector step_rk4(const OdeSystem& sys, const Vector& x, double t, double dt, const Vector& theta);
Vector step(Method method, const OdeSystem& sys, const Vector& x, double t, double dt,
            const Vector& theta);

Trajectory integrate(const OdeSystem& sys, const Vector& x1, const Vector& theta,
                     const TimeGrid& grid, Method method);

}  // namespace lapode

#endif  // LAPODE_ODE_HPP
