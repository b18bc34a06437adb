#ifndef LAPODE_SENSITIVITY_HPP
#define LAPODE_SENSITIVITY_HPP

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lapode/dataset.hpp"
#include "lapode/ode.hpp"

namespace lapode {

enum class SensitivityMode {
    Discrete,    // exact derivatives of the one-step map
    Continuous,  // variational equations integrated with the same stepper
};

std::string_view to_string(SensitivityMode mode);
SensitivityMode parse_sensitivity_mode(std::string_view text);

// Trajectory at the observation times and its derivatives with respect to the
// initial state.
//   Z[i](j, l)        = d x_ij / d x_1l
//   W[i](l + k*p, j)  = d2 x_ij / d x_1l d x_1k   (column j is a p x p block)
struct SensitivityBundle {
    Matrix states;  // n x p
    std::vector<Matrix> Z;
    std::vector<Matrix> W;  // empty when only first order was requested
};

// g = (1/n) sum ||y_i - x_i||^2 with its gradient and Hessian in x_1.
struct FitStats {
    double g = 0.0;
    Vector grad;
    Matrix hess;
};

SensitivityBundle propagate_sensitivities(const OdeSystem& sys, const Vector& x1, const Vector& theta,
                                          const TimeGrid& grid, Method method,
                                          SensitivityMode mode = SensitivityMode::Discrete,
                                          bool second_order = true);

// Assembles FitStats from a bundle whose states line up with data rows.
FitStats fit_stats(const SensitivityBundle& bundle, const Dataset& data);

FitStats fit_stats(const OdeSystem& sys, const Vector& x1, const Vector& theta, const Dataset& data,
                   const TimeGrid& grid, Method method,
                   SensitivityMode mode = SensitivityMode::Discrete);

// Lack of fit only: sum ||y_i - x_i||^2 (i.e. n * g).
double sum_squared_residuals(const Matrix& states, const Dataset& data);

// Source of x_i(theta, x_1) and its x_1-derivatives at the observation times.
class TrajectoryModel {
public:
    virtual ~TrajectoryModel() = default;

    virtual int state_dim() const = 0;
    virtual int param_dim() const = 0;
    virtual const std::vector<double>& times() const = 0;

    virtual Matrix states(const Vector& x1, const Vector& theta) const = 0;
    virtual SensitivityBundle sensitivities(const Vector& x1, const Vector& theta) const = 0;
};

// Numerical one-step integration with m sub-steps.
class NumericalTrajectory final : public TrajectoryModel {
public:
    NumericalTrajectory(OdeSystem sys, TimeGrid grid, Method method,
                        SensitivityMode mode = SensitivityMode::Discrete);

    int state_dim() const override { return sys_.p; }
    int param_dim() const override { return sys_.q; }
    const std::vector<double>& times() const override { return grid_.times(); }

    Matrix states(const Vector& x1, const Vector& theta) const override;
    SensitivityBundle sensitivities(const Vector& x1, const Vector& theta) const override;

    const OdeSystem& system() const { return sys_; }
    const TimeGrid& grid() const { return grid_; }
    Method method() const { return method_; }

private:
    OdeSystem sys_;
    TimeGrid grid_;
    Method method_;
    SensitivityMode mode_;
};

// Closed-form solution: fn(x1, theta, times) returns states, Z and W.
using ClosedFormFn = std::function<SensitivityBundle(const Vector& x1, const Vector& theta,
                                                     std::span<const double> times)>;

class ClosedFormTrajectory final : public TrajectoryModel {
public:
    ClosedFormTrajectory(int p, int q, std::vector<double> times, ClosedFormFn fn);

    int state_dim() const override { return p_; }
    int param_dim() const override { return q_; }
    const std::vector<double>& times() const override { return times_; }

    Matrix states(const Vector& x1, const Vector& theta) const override;
    SensitivityBundle sensitivities(const Vector& x1, const Vector& theta) const override;

private:
    int p_;
    int q_;
    std::vector<double> times_;
    ClosedFormFn fn_;
};

}  // namespace lapode

#endif  // LAPODE_SENSITIVITY_HPP
