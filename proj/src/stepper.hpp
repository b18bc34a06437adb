#ifndef LAPODE_SRC_STEPPER_HPP
#define LAPODE_SRC_STEPPER_HPP

#include "lapode/ode.hpp"

namespace lapode::detail {

struct StepWorkspace {
    Vector k1, k2, k3, k4, tmp;

    explicit StepWorkspace(Eigen::Index size)
        : k1(size), k2(size), k3(size), k4(size), tmp(size) {}
};

// Field signature: field(const Vector& x, double t, Vector& out).
template <class Field>
void euler_step(const Field& field, const Vector& x, double t, double dt, Vector& out,
                StepWorkspace& ws)
{
    field(x, t, ws.k1);
    out = x + dt * ws.k1;
}

template <class Field>
void rk4_step(const Field& field, const Vector& x, double t, double dt, Vector& out,
              StepWorkspace& ws)
{
    const double half = 0.5 * dt;
    field(x, t, ws.k1);
    ws.tmp = x + half * ws.k1;
    field(ws.tmp, t + half, ws.k2);
    ws.tmp = x + half * ws.k2;
    field(ws.tmp, t + half, ws.k3);
    ws.tmp = x + dt * ws.k3;
    field(ws.tmp, t + dt, ws.k4);
    out = x + (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
}

template <class Field>
void one_step(Method method, const Field& field, const Vector& x, double t, double dt, Vector& out,
              StepWorkspace& ws)
{
    if (method == Method::Euler) {
        euler_step(field, x, t, dt, out, ws);
    } else {
        rk4_step(field, x, t, dt, out, ws);
    }
}

}  // namespace lapode::detail

#endif  // LAPODE_SRC_STEPPER_HPP
