#include "safety/stoch_filters.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace safety {

namespace {

void check_beta(const StochSpec& s) {
    const double lo = s.safety_only ? 1.0 : 2.0;
    if (!(s.beta_gain >= lo)) throw ParameterError("stochastic filter: beta gain below " + std::to_string(lo));
}

struct StochTerms {
    LieData ld;
    Vec u0;
    double drift;
    double z;  // |Lg2h R2^-1/2|
    Mat R2;
};

StochTerms stoch_terms(const StochSpec& s, const Vec& x, double t) {
    if (!s.R2) throw ParameterError("stochastic inverse-optimal filter: R2 is not set");
    StochTerms st{lie_data(s.sys, s.bf, x), s.u0(x, t), 0.0, 0.0, {}};
    st.drift = st.ld.drift_with(st.u0);
    st.R2 = s.R2(x, st.u0);
    st.z = std::sqrt(std::max(0.0, weighted_norm_sq(st.ld.Lg2h, st.R2)));
    return st;
}

Vec io_control(const StochSpec& s, const StochTerms& st) {
    if (st.z == 0.0) return st.u0;
    Eigen::LLT<Mat> llt(st.R2);
    const double scale = 0.5 * s.beta_gain * s.gamma2.gamma_prime_inv(st.z) / st.z;
    return st.u0 + scale * llt.solve(st.ld.Lg2h.transpose());
}

double ell1_term(const NssfSpec& ns, const LieData& ld) {
    return ld.frob_term > 0.0 ? ns.gamma1.ell(ld.frob_term) : 0.0;
}

}  // namespace

double generator_value(const ControlAffineSystem& sys, const BarrierFunction& bf, const Vec& x, const Vec& u,
                       const Mat& Sigma) {
    const LieData ld = lie_data(sys, bf, x);
    double tr = 0.0;
    if (sys.m1 > 0) {
        if (Sigma.rows() != sys.m1) throw std::invalid_argument("generator_value: Sigma has wrong shape");
        tr = 0.5 * (Sigma.transpose() * ld.curvature * Sigma).trace();
    }
    return ld.drift_with(u) + tr;
}

double omega_sbfc(const StochSpec& spec, const Vec& x, double t) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    return ld.drift_with(spec.u0(x, t)) + ld.trace_term + spec.alpha(ld.h_val);
}

Vec stoch_qp_filter(const StochSpec& spec, const Vec& x, double t) {
    check_beta(spec);
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    const Vec u0 = spec.u0(x, t);
    const double omega = ld.drift_with(u0) + ld.trace_term + spec.alpha(ld.h_val);
    if (omega >= 0.0) return u0;
    const double n2 = ld.Lg2h.squaredNorm();
    if (std::sqrt(n2) < 1e-12) throw ScbfViolation("omega = " + std::to_string(omega) + " < 0 while Lg2h vanishes");
    return u0 + spec.beta_gain * (-omega / n2) * ld.Lg2h.transpose();
}

Vec stoch_sontag_filter(const StochSpec& spec, const Vec& x, double t) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    const Vec u0 = spec.u0(x, t);
    const double omega = ld.drift_with(u0) + ld.trace_term + spec.alpha(ld.h_val);
    return u0 + sontag_correction(ld.Lg2h, omega);
}

Vec stoch_inverse_optimal(const StochSpec& spec, const Vec& x, double t) {
    check_beta(spec);
    return io_control(spec, stoch_terms(spec, x, t));
}

double stoch_condition(const StochSpec& spec, const Vec& x, double t) {
    const StochTerms st = stoch_terms(spec, x, t);
    return st.drift + st.ld.trace_term + spec.gamma2.ell(st.z) + spec.alpha(st.ld.h_val);
}

double stoch_state_penalty(const StochSpec& spec, const Vec& x, double t) {
    const StochTerms st = stoch_terms(spec, x, t);
    const double b = spec.beta_gain;
    const double e2 = spec.gamma2.ell(st.z);
    return -2.0 * b * (st.drift + st.ld.trace_term + e2) - b * (b - 2.0) * e2;
}

double hjb_residual(const StochSpec& spec, const Vec& x, double t) {
    const StochTerms st = stoch_terms(spec, x, t);
    const double b = spec.beta_gain;
    const double e2 = spec.gamma2.ell(st.z);
    const double l = -2.0 * b * (st.drift + st.ld.trace_term + e2) - b * (b - 2.0) * e2;
    return st.drift + st.ld.trace_term + 0.5 * b * e2 + l / (2.0 * b);
}

double omega_nssf(const NssfSpec& spec, const Vec& x, double t) {
    const StochSpec& s = spec.base;
    const LieData ld = lie_data(s.sys, s.bf, x);
    double rterm = 0.0;
    if (ld.frob_term > 0.0) rterm = 0.5 * ld.frob_term * spec.rho.inverse(std::max(0.0, -ld.h_val));
    return ld.drift_with(s.u0(x, t)) + s.alpha(ld.h_val) - rterm;
}

Vec nssf_qp_filter(const NssfSpec& spec, const Vec& x, double t) {
    const LieData ld = lie_data(spec.base.sys, spec.base.bf, x);
    return spec.base.u0(x, t) + min_norm_correction(ld.Lg2h, omega_nssf(spec, x, t));
}

Vec nssf_sontag_filter(const NssfSpec& spec, const Vec& x, double t) {
    const LieData ld = lie_data(spec.base.sys, spec.base.bf, x);
    return spec.base.u0(x, t) + sontag_correction(ld.Lg2h, omega_nssf(spec, x, t));
}

double cubic_barrier_shortcut_filter(double x, double u0, const KFunction& rho) {
    const double s = 1.0 + x * x;
    return std::min(u0, -s * s * rho.inverse(std::max(0.0, std::abs(x) * x)) - x);
}

CovarianceReport worst_case_covariance(const NssfSpec& spec, const Vec& x) {
    const LieData ld = lie_data(spec.base.sys, spec.base.bf, x);
    const auto m1 = spec.base.sys.m1;
    CovarianceReport rep{Mat::Zero(m1, m1), true, 0.0};
    if (!(ld.frob_term > 0.0)) return rep;
    rep.value = (-spec.lambda * spec.gamma1.gamma_prime_inv(ld.frob_term) / ld.frob_term) * ld.curvature;
    rep.value = 0.5 * (rep.value + rep.value.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(rep.value, Eigen::EigenvaluesOnly);
    rep.min_eigenvalue = es.eigenvalues().minCoeff();
    rep.psd = rep.min_eigenvalue >= -1e-12 * (1.0 + rep.value.norm());
    return rep;
}

Vec nssf_inverse_optimal(const NssfSpec& spec, const Vec& x, double t) {
    check_beta(spec.base);
    return io_control(spec.base, stoch_terms(spec.base, x, t));
}

double nssf_condition(const NssfSpec& spec, const Vec& x, double t) {
    const StochTerms st = stoch_terms(spec.base, x, t);
    return st.drift - ell1_term(spec, st.ld) + spec.base.gamma2.ell(st.z) + spec.base.alpha(st.ld.h_val);
}

double nssf_state_penalty(const NssfSpec& spec, const Vec& x, double t) {
    const StochTerms st = stoch_terms(spec.base, x, t);
    const double b = spec.base.beta_gain;
    const double e1 = ell1_term(spec, st.ld);
    const double e2 = spec.base.gamma2.ell(st.z);
    return -2.0 * b * (st.drift - e1 + e2) - b * (b - 2.0) * e2 - b * (2.0 - spec.lambda) * e1;
}

double nssf_hji_residual(const NssfSpec& spec, const Vec& x, double t) {
    const StochTerms st = stoch_terms(spec.base, x, t);
    const double b = spec.base.beta_gain;
    const double e1 = ell1_term(spec, st.ld);
    const double e2 = spec.base.gamma2.ell(st.z);
    const double l = -2.0 * b * (st.drift - e1 + e2) - b * (b - 2.0) * e2 - b * (2.0 - spec.lambda) * e1;
    return st.drift - 0.5 * spec.lambda * e1 + 0.5 * b * e2 + l / (2.0 * b);
}

}  // namespace safety
