#include "safety/rcbf_filters.hpp"

#include <algorithm>
#include <cmath>

namespace safety {

namespace {

void check_beta(double beta) {
    if (!(beta >= 2.0)) throw ParameterError("reciprocal filter: beta gain must be >= 2");
}

double rbar_quadratic(const RcbfSpec& spec, const Vec& x, const Vec& u0, const RowVec& LgB) {
    if (!spec.Rbar) throw ParameterError("reciprocal filter: Rbar is not set");
    return weighted_norm_sq(LgB, spec.Rbar(x, u0));
}

}  // namespace

RcbfLie rcbf_lie(const RcbfSpec& spec, const Vec& x, const Vec& u0) {
    if (spec.sys.m1 != 0) throw ParameterError("reciprocal filter: only disturbance-free systems are supported");
    RcbfLie r{spec.B(x), 0.0, {}};
    if (!(r.B > 0.0) || !std::isfinite(r.B)) throw DomainError("reciprocal filter: B must be positive and finite");
    const RowVec dB = spec.gradB(x);
    const Mat g = spec.sys.eval_g2(x);
    r.LgB = dB * g;
    r.drift = dB.dot(spec.sys.eval_f(x)) + r.LgB.dot(u0);
    return r;
}

double omega_tilde(const RcbfSpec& spec, const Vec& x, double t) {
    const RcbfLie r = rcbf_lie(spec, x, spec.u0(x, t));
    return r.drift - spec.alpha_bar(1.0 / r.B);
}

Vec rcbf_qp_filter(const RcbfSpec& spec, const Vec& x, double t) {
    check_beta(spec.beta_gain);
    const Vec u0 = spec.u0(x, t);
    const RcbfLie r = rcbf_lie(spec, x, u0);
    const double wt = r.drift - spec.alpha_bar(1.0 / r.B);
    if (wt <= 0.0) return u0;
    const double n2 = r.LgB.squaredNorm();
    if (std::sqrt(n2) < 1e-12) throw RcbfViolation("omega_tilde > 0 while LgB vanishes");
    return u0 - spec.beta_gain * (wt / n2) * r.LgB.transpose();
}

Weight rcbf_qp_weight(const RcbfSpec& spec, const Vec& x, double t) {
    const RcbfLie r = rcbf_lie(spec, x, spec.u0(x, t));
    const double wt = std::max(0.0, r.drift - spec.alpha_bar(1.0 / r.B));
    return wt == 0.0 ? Weight::infinite() : Weight::finite(r.LgB.squaredNorm() / wt);
}

Vec rcbf_inverse_optimal(const RcbfSpec& spec, const Vec& x, double t) {
    check_beta(spec.beta_gain);
    const Vec u0 = spec.u0(x, t);
    const RcbfLie r = rcbf_lie(spec, x, u0);
    const Mat R = spec.Rbar(x, u0);
    weighted_norm_sq(r.LgB, R);
    Eigen::LLT<Mat> llt(R);
    return u0 - spec.beta_gain * llt.solve(r.LgB.transpose());
}

double rcbf_condition(const RcbfSpec& spec, const Vec& x, double t) {
    const Vec u0 = spec.u0(x, t);
    const RcbfLie r = rcbf_lie(spec, x, u0);
    return spec.alpha_bar(1.0 / r.B) - r.drift + rbar_quadratic(spec, x, u0, r.LgB);
}

double rcbf_state_penalty(const RcbfSpec& spec, const Vec& x, double t) {
    const Vec u0 = spec.u0(x, t);
    const RcbfLie r = rcbf_lie(spec, x, u0);
    const double Q = rbar_quadratic(spec, x, u0, r.LgB);
    const double b = spec.beta_gain;
    return (-2.0 * b * (r.drift - Q) + b * (b - 2.0) * Q) / (r.B * r.B);
}

double rcbf_state_penalty_flipped(const RcbfSpec& spec, const Vec& x, double t) {
    const Vec u0 = spec.u0(x, t);
    const RcbfLie r = rcbf_lie(spec, x, u0);
    const double Q = rbar_quadratic(spec, x, u0, r.LgB);
    const double b = spec.beta_gain;
    return -2.0 * b * (r.drift + Q) + b * (b - 2.0) * Q;
}

DssfCbfSpec rcbf_as_h_spec(const RcbfSpec& spec) {
    auto B = spec.B;
    auto gB = spec.gradB;
    auto ab = spec.alpha_bar;
    BarrierFunction bf([B](const Vec& x) { return 1.0 / B(x); },
                       [B, gB](const Vec& x) {
                           const double b = B(x);
                           return RowVec(-gB(x) / (b * b));
                       });
    ExtendedKFunction alpha([ab](double h) { return std::copysign(h * h * ab(std::abs(h)), h); });
    return DssfCbfSpec{spec.sys, bf, KFunction::identity(), alpha, spec.u0};
}

}  // namespace safety
