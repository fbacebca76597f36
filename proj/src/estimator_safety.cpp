#include "safety/estimator_safety.hpp"

#include <algorithm>
#include <cmath>

namespace safety {

namespace {

constexpr double kBoundaryTol = 1e-12;

Vec tangential(const RowVec& dh, const Vec& u0) {
    const double a = dh.dot(u0);
    if (a >= 0.0) return Vec::Zero(u0.size());
    const double n2 = dh.squaredNorm();
    if (n2 < 1e-24) throw CbfViolation("projection: gradient of h vanishes on the active branch");
    return (-a / n2) * dh.transpose();
}

double qp_margin(const ProjectionSpec& spec, const RowVec& dh, double hv, const Vec& u0) {
    return std::max(0.0, -dh.dot(u0) - spec.alpha(hv));
}

}  // namespace

Vec classic_projection(const ProjectionSpec& spec, const Vec& theta, const Vec& u0) {
    const double hv = spec.h(theta);
    if (std::abs(spec.alpha(hv)) > kBoundaryTol) return Vec::Zero(u0.size());
    return tangential(spec.h.gradient(theta), u0);
}

Vec qp_projection(const ProjectionSpec& spec, const Vec& theta, const Vec& u0) {
    const RowVec dh = spec.h.gradient(theta);
    const double m = qp_margin(spec, dh, spec.h(theta), u0);
    if (m == 0.0) return Vec::Zero(u0.size());
    const double n2 = dh.squaredNorm();
    if (n2 < 1e-24) throw CbfViolation("qp projection: gradient of h vanishes with an active constraint");
    return (m / n2) * dh.transpose();
}

Vec inverse_optimal_update(const ProjectionSpec& spec, const Vec& theta, const Vec& u0) {
    if (!(spec.beta_gain >= 2.0)) throw ParameterError("inverse_optimal_update: beta gain must be >= 2");
    return u0 + spec.beta_gain * qp_projection(spec, theta, u0);
}

double projection_state_penalty(const ProjectionSpec& spec, const Vec& theta, const Vec& u0) {
    const RowVec dh = spec.h.gradient(theta);
    const double b = spec.beta_gain;
    return 2.0 * b * dh.dot(u0) + b * b * qp_margin(spec, dh, spec.h(theta), u0);
}

Weight projection_cost_weight(const ProjectionSpec& spec, const Vec& theta, const Vec& u0) {
    const RowVec dh = spec.h.gradient(theta);
    const double m = qp_margin(spec, dh, spec.h(theta), u0);
    return m == 0.0 ? Weight::infinite() : Weight::finite(dh.squaredNorm() / m);
}

UpdatePath simulate_update(const ProjectionSpec& spec, UpdateLaw law, const Vec& theta0, const Vec& aux, double T,
                           double dt) {
    if (!(dt > 0.0) || !(T >= 0.0)) throw std::invalid_argument("simulate_update: need dt > 0 and T >= 0");
    bool on_boundary = false;
    auto rhs = [&](const Vec& th, double t) -> Vec {
        const Vec u0 = spec.u0(th, aux, t);
        switch (law) {
            case UpdateLaw::Classic:
                return on_boundary ? Vec(u0 + tangential(spec.h.gradient(th), u0)) : u0;
            case UpdateLaw::Qp: return u0 + qp_projection(spec, th, u0);
            case UpdateLaw::InverseOptimal: return inverse_optimal_update(spec, th, u0);
        }
        return u0;
    };
    auto rk4 = [&](const Vec& th, double t, double s) -> Vec {
        const Vec k1 = rhs(th, t);
        const Vec k2 = rhs(th + 0.5 * s * k1, t + 0.5 * s);
        const Vec k3 = rhs(th + 0.5 * s * k2, t + 0.5 * s);
        const Vec k4 = rhs(th + s * k3, t + s);
        return th + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };

    UpdatePath out;
    Vec th = theta0;
    double t = 0.0;
    out.t.push_back(t);
    out.theta.push_back(th);
    out.min_h = spec.h(th);
    const auto steps = static_cast<long>(std::ceil(T / dt - 1e-9));
    for (long k = 0; k < steps; ++k) {
        const double s = std::min(dt, T - t);
        if (law == UpdateLaw::Classic) {
            if (on_boundary) {
                // leave the boundary once the nominal update points inward
                const Vec u0 = spec.u0(th, aux, t);
                if (spec.h.gradient(th).dot(u0) > 0.0) on_boundary = false;
            }
            Vec next = rk4(th, t, s);
            if (!on_boundary && spec.h(next) < 0.0) {
                double lo = 0.0, hi = s;
                for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, s); ++i) {
                    const double mid = 0.5 * (lo + hi);
                    (spec.h(rk4(th, t, mid)) >= 0.0 ? lo : hi) = mid;
                }
                th = rk4(th, t, lo);
                on_boundary = true;
                ++out.boundary_events;
                if (s - lo > 0.0) next = rk4(th, t + lo, s - lo);
                else next = th;
            }
            if (on_boundary) {
                for (int i = 0; i < 3; ++i) {
                    const double hv = spec.h(next);
                    const RowVec g = spec.h.gradient(next);
                    if (std::abs(hv) < 1e-14 || g.squaredNorm() < 1e-24) break;
                    next -= (hv / g.squaredNorm()) * g.transpose();
                }
            }
            th = next;
        } else {
            th = rk4(th, t, s);
        }
        t += s;
        out.t.push_back(t);
        out.theta.push_back(th);
        out.min_h = std::min(out.min_h, spec.h(th));
    }
    return out;
}

double projection_gap(const ProjectionSpec& spec, const std::vector<Vec>& thetas, const Vec& u0) {
    double gap = 0.0;
    for (const Vec& th : thetas)
        gap = std::max(gap, (classic_projection(spec, th, u0) - qp_projection(spec, th, u0)).norm());
    return gap;
}

}  // namespace safety
