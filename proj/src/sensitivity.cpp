#include "lapode/sensitivity.hpp"

#include "stepper.hpp"

namespace lapode {

std::string_view to_string(SensitivityMode mode)
{
    return mode == SensitivityMode::Discrete ? "discrete" : "continuous";
}

SensitivityMode parse_sensitivity_mode(std::string_view text)
{
    if (text == "discrete") {
        return SensitivityMode::Discrete;
    }
    if (text == "continuous") {
        return SensitivityMode::Continuous;
    }
    throw SpecError("unknown sensitivity mode '" + std::string(text) + "' (expected discrete|continuous)");
}

namespace {

// Differentiates the Euler / RK4 map stage by stage. For a stage evaluated at
// a = x + c k_prev with A = da/dx1 and B = d2a/dx1^2 (layout of W):
//   K = J(a) A,   L(:, j) = vec(A^T H_j(a) A) + (B J(a)^T)(:, j).
class DiscretePropagator {
public:
    DiscretePropagator(const OdeSystem& sys, const Vector& theta, bool second_order)
        : sys_(sys), theta_(theta), second_(second_order), p_(sys.p)
    {
        const int p = p_;
        a_.resize(p);
        A_.resize(p, p);
        J_.resize(p, p);
        tmp_.resize(p, p);
        for (int s = 0; s < 4; ++s) {
            k_[s].resize(p);
            K_[s].resize(p, p);
        }
        if (second_) {
            B_.resize(p * p, p);
            H_.resize(p * p, p);
            for (auto& l : L_) {
                l.resize(p * p, p);
            }
        }
    }

    void advance(Method method, Vector& x, Matrix& X, Matrix& W, double t, double dt)
    {
        if (method == Method::Euler) {
            stage(x, X, W, t, 0);
            x += dt * k_[0];
            X += dt * K_[0];
            if (second_) {
                W += dt * L_[0];
            }
            return;
        }
        const double half = 0.5 * dt;
        stage(x, X, W, t, 0);
        shifted(x, X, W, half, 0);
        stage(a_, A_, B_, t + half, 1);
        shifted(x, X, W, half, 1);
        stage(a_, A_, B_, t + half, 2);
        shifted(x, X, W, dt, 2);
        stage(a_, A_, B_, t + dt, 3);
        const double w = dt / 6.0;
        x += w * (k_[0] + 2.0 * k_[1] + 2.0 * k_[2] + k_[3]);
        X += w * (K_[0] + 2.0 * K_[1] + 2.0 * K_[2] + K_[3]);
        if (second_) {
            W += w * (L_[0] + 2.0 * L_[1] + 2.0 * L_[2] + L_[3]);
        }
    }

private:
    void shifted(const Vector& x, const Matrix& X, const Matrix& W, double c, int s)
    {
        a_ = x + c * k_[s];
        A_ = X + c * K_[s];
        if (second_) {
            B_ = W + c * L_[s];
        }
    }

    void stage(const Vector& a, const Matrix& A, const Matrix& B, double t, int s)
    {
        sys_.eval_rhs(a, t, theta_, k_[s]);
        sys_.eval_jac(a, t, theta_, J_);
        K_[s].noalias() = J_ * A;
        if (!second_) {
            return;
        }
        sys_.eval_hess(a, t, theta_, H_);
        Matrix& L = L_[s];
        L.noalias() = B * J_.transpose();
        for (int j = 0; j < p_; ++j) {
            Eigen::Map<const Matrix> hj(H_.col(j).data(), p_, p_);
            tmp_.noalias() = hj * A;
            Eigen::Map<Matrix>(L.col(j).data(), p_, p_).noalias() += A.transpose() * tmp_;
        }
    }

    const OdeSystem& sys_;
    const Vector& theta_;
    bool second_;
    int p_;
    Vector a_;
    Matrix A_, B_, J_, H_, tmp_;
    Vector k_[4];
    Matrix K_[4];
    Matrix L_[4];
};

void check_finite(const Vector& x, const Matrix& X, const Matrix& W, double t)
{
    if (!x.allFinite() || !X.allFinite() || (W.size() > 0 && !W.allFinite())) {
        throw EvalError("non-finite state or sensitivity after step", t, x);
    }
}

SensitivityBundle propagate_discrete(const OdeSystem& sys, const Vector& x1, const Vector& theta,
                                     const TimeGrid& grid, Method method, bool second_order)
{
    const int p = sys.p;
    const int n = grid.size();
    SensitivityBundle out;
    out.states.resize(n, p);
    out.Z.reserve(static_cast<std::size_t>(n));
    if (second_order) {
        out.W.reserve(static_cast<std::size_t>(n));
    }

    Vector x = x1;
    Matrix X = Matrix::Identity(p, p);
    Matrix W = second_order ? Matrix::Zero(p * p, p) : Matrix();
    out.states.row(0) = x.transpose();
    out.Z.push_back(X);
    if (second_order) {
        out.W.push_back(W);
    }

    DiscretePropagator prop(sys, theta, second_order);
    for (int i = 1; i < n; ++i) {
        const std::vector<double> b = grid.substeps(i);
        try {
            for (int k = 0; k < grid.m(); ++k) {
                const double t = b[static_cast<std::size_t>(k)];
                prop.advance(method, x, X, W, t, b[static_cast<std::size_t>(k) + 1] - t);
                check_finite(x, X, W, t);
            }
        } catch (const EvalError& e) {
            throw e.with_interval(i + 1);
        }
        out.states.row(i) = x.transpose();
        out.Z.push_back(X);
        if (second_order) {
            out.W.push_back(W);
        }
    }
    return out;
}

// Augmented state [x; vec(Z); vec(W)] driven by
//   x' = f,  Z' = J Z,  W'(:, j) = vec(Z^T H_j Z) + (W J^T)(:, j).
SensitivityBundle propagate_continuous(const OdeSystem& sys, const Vector& x1, const Vector& theta,
                                       const TimeGrid& grid, Method method, bool second_order)
{
    const int p = sys.p;
    const int n = grid.size();
    const Eigen::Index zsize = static_cast<Eigen::Index>(p) * p;
    const Eigen::Index wsize = second_order ? zsize * p : 0;
    const Eigen::Index size = p + zsize + wsize;

    Matrix J(p, p), H(p * p, p), tmp(p, p);
    auto field = [&](const Vector& y, double t, Vector& out) {
        const auto x = y.head(p);
        Eigen::Map<const Matrix> Z(y.data() + p, p, p);
        sys.eval_rhs(x, t, theta, out.head(p));
        sys.eval_jac(x, t, theta, J);
        Eigen::Map<Matrix>(out.data() + p, p, p).noalias() = J * Z;
        if (!second_order) {
            return;
        }
        sys.eval_hess(x, t, theta, H);
        Eigen::Map<const Matrix> W(y.data() + p + zsize, p * p, p);
        Eigen::Map<Matrix> dW(out.data() + p + zsize, p * p, p);
        dW.noalias() = W * J.transpose();
        for (int j = 0; j < p; ++j) {
            Eigen::Map<const Matrix> hj(H.col(j).data(), p, p);
            tmp.noalias() = hj * Z;
            Eigen::Map<Matrix>(dW.col(j).data(), p, p).noalias() += Z.transpose() * tmp;
        }
    };

    Vector y = Vector::Zero(size);
    y.head(p) = x1;
    Eigen::Map<Matrix>(y.data() + p, p, p) = Matrix::Identity(p, p);

    SensitivityBundle out;
    out.states.resize(n, p);
    auto record = [&](int i) {
        out.states.row(i) = y.head(p).transpose();
        out.Z.push_back(Eigen::Map<const Matrix>(y.data() + p, p, p));
        if (second_order) {
            out.W.push_back(Eigen::Map<const Matrix>(y.data() + p + zsize, p * p, p));
        }
    };
    record(0);

    detail::StepWorkspace ws(size);
    Vector next(size);
    for (int i = 1; i < n; ++i) {
        const std::vector<double> b = grid.substeps(i);
        try {
            for (int k = 0; k < grid.m(); ++k) {
                const double t = b[static_cast<std::size_t>(k)];
                detail::one_step(method, field, y, t, b[static_cast<std::size_t>(k) + 1] - t, next, ws);
                if (!next.allFinite()) {
                    throw EvalError("non-finite state or sensitivity after step", t, y.head(p));
                }
                y.swap(next);
            }
        } catch (const EvalError& e) {
            throw e.with_interval(i + 1);
        }
        record(i);
    }
    return out;
}

}  // namespace

SensitivityBundle propagate_sensitivities(const OdeSystem& sys, const Vector& x1, const Vector& theta,
                                          const TimeGrid& grid, Method method, SensitivityMode mode,
                                          bool second_order)
{
    if (x1.size() != sys.p || theta.size() != sys.q) {
        throw SpecError("state or parameter dimension mismatch in propagate_sensitivities");
    }
    if (!x1.allFinite()) {
        throw SpecError("initial state must be finite");
    }
    return mode == SensitivityMode::Discrete
               ? propagate_discrete(sys, x1, theta, grid, method, second_order)
               : propagate_continuous(sys, x1, theta, grid, method, second_order);
}

double sum_squared_residuals(const Matrix& states, const Dataset& data)
{
    if (states.rows() != data.y.rows() || states.cols() != data.y.cols()) {
        throw SpecError("trajectory and data dimensions differ");
    }
    return (data.y - states).squaredNorm();
}

FitStats fit_stats(const SensitivityBundle& bundle, const Dataset& data)
{
    const int n = data.n();
    const int p = data.p();
    if (bundle.states.rows() != n || bundle.states.cols() != p ||
        static_cast<int>(bundle.Z.size()) != n) {
        throw SpecError("sensitivity bundle and data dimensions differ");
    }
    const bool second = !bundle.W.empty();
    FitStats s;
    s.grad = Vector::Zero(p);
    s.hess = Matrix::Zero(p, p);
    Vector r(p);
    Vector wr(p * p);
    double ssr = 0.0;
    for (int i = 0; i < n; ++i) {
        r = bundle.states.row(i).transpose() - data.y.row(i).transpose();  // x_i - y_i
        ssr += r.squaredNorm();
        const Matrix& Z = bundle.Z[static_cast<std::size_t>(i)];
        s.grad.noalias() += Z.transpose() * r;
        s.hess.noalias() += Z.transpose() * Z;
        if (second) {
            wr.noalias() = bundle.W[static_cast<std::size_t>(i)] * r;
            s.hess += Eigen::Map<const Matrix>(wr.data(), p, p);
        }
    }
    const double scale = 2.0 / static_cast<double>(n);
    s.g = ssr / static_cast<double>(n);
    s.grad *= scale;
    s.hess *= scale;
    const Matrix sym = 0.5 * (s.hess + s.hess.transpose());
    s.hess = sym;
    return s;
}

FitStats fit_stats(const OdeSystem& sys, const Vector& x1, const Vector& theta, const Dataset& data,
                   const TimeGrid& grid, Method method, SensitivityMode mode)
{
    if (data.times != grid.times()) {
        throw SpecError("data times must equal the integration grid times");
    }
    if (data.p() != sys.p) {
        throw SpecError("data columns do not match the state dimension");
    }
    return fit_stats(propagate_sensitivities(sys, x1, theta, grid, method, mode, true), data);
}

NumericalTrajectory::NumericalTrajectory(OdeSystem sys, TimeGrid grid, Method method,
                                         SensitivityMode mode)
    : sys_(std::move(sys)), grid_(std::move(grid)), method_(method), mode_(mode)
{
    sys_.validate();
}

Matrix NumericalTrajectory::states(const Vector& x1, const Vector& theta) const
{
    return integrate(sys_, x1, theta, grid_, method_).states;
}

SensitivityBundle NumericalTrajectory::sensitivities(const Vector& x1, const Vector& theta) const
{
    return propagate_sensitivities(sys_, x1, theta, grid_, method_, mode_, true);
}

ClosedFormTrajectory::ClosedFormTrajectory(int p, int q, std::vector<double> times, ClosedFormFn fn)
    : p_(p), q_(q), times_(std::move(times)), fn_(std::move(fn))
{
    if (!fn_) {
        throw SpecError("closed-form trajectory needs a solution function");
    }
}

Matrix ClosedFormTrajectory::states(const Vector& x1, const Vector& theta) const
{
    return fn_(x1, theta, times_).states;
}

SensitivityBundle ClosedFormTrajectory::sensitivities(const Vector& x1, const Vector& theta) const
{
    return fn_(x1, theta, times_);
}

}  // namespace lapode
