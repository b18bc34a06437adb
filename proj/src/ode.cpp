#include "lapode/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stepper.hpp"

namespace lapode {

namespace {

std::string describe_state(const char* what, double t, const ConstVectorRef& x)
{
    std::ostringstream os;
    os << what << " at t=" << t << ", x=(";
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        os << (i ? ", " : "") << x[i];
    }
    os << ")";
    return os.str();
}

}  // namespace

bool Box::contains(const Vector& theta) const
{
    if (theta.size() != lower.size()) {
        return false;
    }
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        if (!(theta[i] > lower[i] && theta[i] < upper[i])) {
            return false;
        }
    }
    return true;
}

void Box::validate() const
{
    if (lower.size() != upper.size() || lower.size() == 0) {
        throw SpecError("box bounds must be non-empty and of equal length");
    }
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (!(lower[i] < upper[i])) {
            throw SpecError("box lower bound must be below upper bound in coordinate " +
                            std::to_string(i + 1));
        }
    }
}

void OdeSystem::validate() const
{
    if (p <= 0 || q <= 0) {
        throw SpecError("ODE system dimensions must be positive");
    }
    if (!rhs || !jac_x) {
        throw SpecError("ODE system requires rhs and jac_x");
    }
    if (theta_support.size() != q) {
        throw SpecError("theta support dimension does not match q");
    }
    theta_support.validate();
}

void OdeSystem::eval_rhs(const ConstVectorRef& x, double t, const ConstVectorRef& theta,
                         Eigen::Ref<Vector> dx) const
{
    rhs(x, t, theta, dx);
    if (!dx.allFinite()) {
        throw EvalError(describe_state("non-finite vector field", t, x), t, x);
    }
}

void OdeSystem::eval_jac(const ConstVectorRef& x, double t, const ConstVectorRef& theta,
                         Eigen::Ref<Matrix> jac) const
{
    jac_x(x, t, theta, jac);
    if (!jac.allFinite()) {
        throw EvalError(describe_state("non-finite state Jacobian", t, x), t, x);
    }
}

void OdeSystem::eval_hess(const ConstVectorRef& x, double t, const ConstVectorRef& theta,
                          Eigen::Ref<Matrix> hess) const
{
    if (hess_x) {
        hess_x(x, t, theta, hess);
    } else {
        // Central differences of the Jacobian, column u of J gives d/dx_u.
        Matrix jp(p, p), jm(p, p);
        Vector xs = x;
        for (int v = 0; v < p; ++v) {
            const double step = 1e-5 * std::max(1.0, std::abs(x[v]));
            xs[v] = x[v] + step;
            jac_x(xs, t, theta, jp);
            xs[v] = x[v] - step;
            jac_x(xs, t, theta, jm);
            xs[v] = x[v];
            const Matrix d = (jp - jm) / (2.0 * step);  // d(J(j,u))/dx_v
            for (int j = 0; j < p; ++j) {
                for (int u = 0; u < p; ++u) {
                    hess(u + v * p, j) = d(j, u);
                }
            }
        }
        // Symmetrize each block.
        for (int j = 0; j < p; ++j) {
            Eigen::Map<Matrix> block(hess.col(j).data(), p, p);
            const Matrix sym = 0.5 * (block + block.transpose());
            block = sym;
        }
    }
    if (!hess.allFinite()) {
        throw EvalError(describe_state("non-finite state Hessian", t, x), t, x);
    }
}

Vector OdeSystem::rhs_at(const Vector& x, double t, const Vector& theta) const
{
    Vector dx(p);
    eval_rhs(x, t, theta, dx);
    return dx;
}

Matrix OdeSystem::jac_at(const Vector& x, double t, const Vector& theta) const
{
    Matrix jac(p, p);
    eval_jac(x, t, theta, jac);
    return jac;
}

Matrix OdeSystem::hess_at(const Vector& x, double t, const Vector& theta) const
{
    Matrix hess(p * p, p);
    eval_hess(x, t, theta, hess);
    return hess;
}

std::string_view to_string(Method method)
{
    return method == Method::Euler ? "euler" : "rk4";
}

Method parse_method(std::string_view text)
{
    if (text == "euler") {
        return Method::Euler;
    }
    if (text == "rk4") {
        return Method::Rk4;
    }
    throw SpecError("unknown integration method '" + std::string(text) + "' (expected euler|rk4)");
}

TimeGrid::TimeGrid(std::vector<double> times, int m) : times_(std::move(times)), m_(m)
{
    if (times_.empty()) {
        throw SpecError("time grid needs at least one time point");
    }
    if (m_ < 1) {
        throw SpecError("sub-step count m must be at least 1");
    }
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!std::isfinite(times_[i])) {
            throw SpecError("time grid contains a non-finite value");
        }
        if (i > 0 && !(times_[i] > times_[i - 1])) {
            throw SpecError("time grid must be strictly increasing (index " + std::to_string(i + 1) + ")");
        }
    }
}

TimeGrid TimeGrid::uniform(int n, double h, int m, double t0)
{
    if (n < 1 || !(h > 0.0)) {
        throw SpecError("uniform grid needs n >= 1 and h > 0");
    }
    std::vector<double> times(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        times[static_cast<std::size_t>(i)] = t0 + h * static_cast<double>(i);
    }
    return TimeGrid(std::move(times), m);
}

double TimeGrid::max_spacing() const
{
    double h = 0.0;
    for (std::size_t i = 1; i < times_.size(); ++i) {
        h = std::max(h, times_[i] - times_[i - 1]);
    }
    return h;
}

TimeGrid TimeGrid::extended(int count) const
{
    if (count < 0) {
        throw SpecError("cannot extend a grid by a negative count");
    }
    if (count > 0 && times_.size() < 2) {
        throw SpecError("extending a grid needs at least two time points");
    }
    std::vector<double> times = times_;
    if (count > 0) {
        const double spacing = times_.back() - times_[times_.size() - 2];
        const double last = times_.back();
        for (int k = 1; k <= count; ++k) {
            times.push_back(last + spacing * static_cast<double>(k));
        }
    }
    return TimeGrid(std::move(times), m_);
}

std::vector<double> TimeGrid::substeps(int i) const
{
    const double t0 = times_[static_cast<std::size_t>(i - 1)];
    const double t1 = times_[static_cast<std::size_t>(i)];
    const double width = (t1 - t0) / static_cast<double>(m_);
    std::vector<double> b(static_cast<std::size_t>(m_) + 1);
    for (int k = 0; k < m_; ++k) {
        b[static_cast<std::size_t>(k)] = t0 + static_cast<double>(k) * width;
    }
    b.back() = t1;
    return b;
}

namespace {

auto field_of(const OdeSystem& sys, const Vector& theta)
{
    return [&sys, &theta](const Vector& x, double t, Vector& out) { sys.eval_rhs(x, t, theta, out); };
}

}  // namespace

Vector step_euler(const OdeSystem& sys, const Vector& x, double t, double dt, const Vector& theta)
{
    return step(Method::Euler, sys, x, t, dt, theta);
}

Vector step_rk4(const OdeSystem& sys, const Vector& x, double t, double dt, const Vector& theta)
{
    return step(Method::Rk4, sys, x, t, dt, theta);
}

Vector step(Method method, const OdeSystem& sys, const Vector& x, double t, double dt,
            const Vector& theta)
{
    if (!(dt > 0.0)) {
        throw SpecError("step length must be positive");
    }
    if (x.size() != sys.p || theta.size() != sys.q) {
        throw SpecError("state or parameter dimension mismatch in step");
    }
    detail::StepWorkspace ws(sys.p);
    Vector out(sys.p);
    detail::one_step(method, field_of(sys, theta), x, t, dt, out, ws);
    if (!out.allFinite()) {
        throw EvalError(describe_state("non-finite state after step", t, x), t, x);
    }
    return out;
}

Trajectory integrate(const OdeSystem& sys, const Vector& x1, const Vector& theta,
                     const TimeGrid& grid, Method method)
{
    if (x1.size() != sys.p || theta.size() != sys.q) {
        throw SpecError("state or parameter dimension mismatch in integrate");
    }
    if (!x1.allFinite()) {
        throw SpecError("initial state must be finite");
    }
    const int n = grid.size();
    Trajectory traj;
    traj.method = method;
    traj.m = grid.m();
    traj.states.resize(n, sys.p);
    traj.states.row(0) = x1.transpose();

    detail::StepWorkspace ws(sys.p);
    const auto field = field_of(sys, theta);
    Vector x = x1;
    Vector next(sys.p);
    for (int i = 1; i < n; ++i) {
        const std::vector<double> b = grid.substeps(i);
        try {
            for (int k = 0; k < grid.m(); ++k) {
                const double t = b[static_cast<std::size_t>(k)];
                detail::one_step(method, field, x, t, b[static_cast<std::size_t>(k) + 1] - t, next, ws);
                if (!next.allFinite()) {
                    throw EvalError(describe_state("non-finite state after step", t, x), t, x);
                }
                x.swap(next);
            }
        } catch (const EvalError& e) {
            throw e.with_interval(i + 1);
        }
        traj.states.row(i) = x.transpose();
    }
    return traj;
}

}  // namespace lapode
