#include "safety/det_filters.hpp"

#include <algorithm>
#include <cmath>

namespace safety {

double Weight::value() const {
    if (inf_) throw std::logic_error("Weight::value: weight is infinite");
    return v_;
}

double Weight::apply(double numerator) const {
    if (!inf_) return v_ * numerator;
    if (numerator == 0.0) return 0.0;
    return numerator > 0.0 ? kInf : -kInf;
}

namespace {

void check_io_params(double beta, double lambda, double beta_min) {
    if (!(beta >= beta_min)) throw ParameterError("inverse-optimal filter: beta gain below " + std::to_string(beta_min));
    if (!(lambda > 0.0 && lambda <= 2.0)) throw ParameterError("inverse-optimal filter: lambda must lie in (0, 2]");
}

double rho_term(const DssfCbfSpec& spec, const LieData& ld) {
    const double nrm = ld.Lg1h.size() ? ld.Lg1h.norm() : 0.0;
    if (nrm == 0.0) return 0.0;
    return nrm * spec.rho.inverse(std::max(0.0, -ld.h_val));
}

}  // namespace

InverseOptimalSpec make_inverse_optimal(DssfCbfSpec base, double beta_gain, double lambda, LegendreFenchelPair gamma,
                                        WeightFn R2) {
    check_io_params(beta_gain, lambda, 2.0);
    return InverseOptimalSpec{std::move(base), beta_gain, lambda, std::move(gamma), std::move(R2), false};
}

InverseOptimalSpec make_inverse_optimal_safety_only(DssfCbfSpec base, double beta_gain, double lambda,
                                                    LegendreFenchelPair gamma, WeightFn R2) {
    check_io_params(beta_gain, lambda, 1.0);
    return InverseOptimalSpec{std::move(base), beta_gain, lambda, std::move(gamma), std::move(R2), beta_gain < 2.0};
}

Vec min_norm_correction(const RowVec& L, double omega) {
    if (omega >= 0.0) return Vec::Zero(L.size());
    const double n2 = L.squaredNorm();
    if (std::sqrt(n2) < 1e-12)
        throw CbfViolation("omega = " + std::to_string(omega) + " < 0 while the control direction vanishes");
    return (-omega / n2) * L.transpose();
}

Vec sontag_correction(const RowVec& L, double omega) {
    const double n2 = L.squaredNorm();
    if (n2 == 0.0) return Vec::Zero(L.size());
    const double root = std::hypot(omega, n2);
    const double kappa = omega < 0.0 ? (-omega + root) / n2 : n2 / (omega + root);
    return kappa * L.transpose();
}

double omega_dssf(const DssfCbfSpec& spec, const LieData& ld, const Vec& u0) {
    return ld.drift_with(u0) - rho_term(spec, ld) + spec.alpha(ld.h_val);
}

double omega_dssf(const DssfCbfSpec& spec, const Vec& x, double t) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    return omega_dssf(spec, ld, spec.u0(x, t));
}

Vec qp_filter(const DssfCbfSpec& spec, const Vec& x, double t) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    return min_norm_correction(ld.Lg2h, omega_dssf(spec, ld, spec.u0(x, t)));
}

QpAffineForm qp_filter_affine_form(const DssfCbfSpec& spec, const Vec& x, double t) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    const Vec u0 = spec.u0(x, t);
    const double omega = omega_dssf(spec, ld, u0);
    const auto m2 = ld.Lg2h.size();
    QpAffineForm out{Mat::Identity(m2, m2), Vec::Zero(m2), false};
    if (omega >= 0.0) return out;
    const double n2 = ld.Lg2h.squaredNorm();
    if (std::sqrt(n2) < 1e-12) throw CbfViolation("affine form: omega < 0 while the control direction vanishes");
    const double omega1 = omega - ld.Lg2h.dot(u0);
    out.chi0 -= ld.Lg2h.transpose() * ld.Lg2h / n2;
    out.chi1 = -(omega1 / n2) * ld.Lg2h.transpose();
    out.active = true;
    return out;
}

Vec sontag_filter(const DssfCbfSpec& spec, const Vec& x, double t, bool include_u0) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    const Vec u0 = include_u0 ? spec.u0(x, t) : Vec::Zero(spec.sys.m2);
    return sontag_correction(ld.Lg2h, omega_dssf(spec, ld, u0));
}

Vec half_sontag_filter(const DssfCbfSpec& spec, const Vec& x, double t) {
    return spec.u0(x, t) + 0.5 * sontag_filter(spec, x, t, true);
}

Vec inverse_optimal_qp(const DssfCbfSpec& spec, double beta_gain, const Vec& x, double t) {
    if (!(beta_gain >= 2.0)) throw ParameterError("inverse_optimal_qp: beta gain must be >= 2");
    return spec.u0(x, t) + beta_gain * qp_filter(spec, x, t);
}

Vec inverse_optimal_qp_safety_only(const DssfCbfSpec& spec, double beta_gain, const Vec& x, double t) {
    if (!(beta_gain >= 1.0)) throw ParameterError("inverse_optimal_qp_safety_only: beta gain must be >= 1");
    return spec.u0(x, t) + beta_gain * qp_filter(spec, x, t);
}

double weighted_norm_sq(const RowVec& L, const Mat& R) {
    if (R.rows() != L.size() || R.cols() != L.size()) throw ParameterError("weight matrix has wrong shape");
    if (!R.allFinite()) throw ParameterError("weight matrix is not finite");
    if ((R - R.transpose()).norm() > 1e-10 * (1.0 + R.norm())) throw ParameterError("weight matrix is not symmetric");
    Eigen::LLT<Mat> llt(R);
    if (llt.info() != Eigen::Success) throw ParameterError("weight matrix is not positive definite");
    return L.dot(llt.solve(L.transpose()));
}

namespace {

Vec solve_spd(const Mat& R, const Vec& b) {
    Eigen::LLT<Mat> llt(R);
    if (llt.info() != Eigen::Success) throw ParameterError("weight matrix is not positive definite");
    return llt.solve(b);
}

struct IoTerms {
    LieData ld;
    Vec u0;
    double drift;
    double ell;  // ell gamma(2 |Lg1h|)
    double Q;    // Lg2h R2^-1 Lg2h'
    Mat R2;
};

IoTerms io_terms(const InverseOptimalSpec& io, const Vec& x, double t) {
    IoTerms s{lie_data(io.base.sys, io.base.bf, x), io.base.u0(x, t), 0.0, 0.0, 0.0, {}};
    s.drift = s.ld.drift_with(s.u0);
    s.ell = s.ld.Lg1h.size() ? io.gamma.ell(2.0 * s.ld.Lg1h.norm()) : 0.0;
    s.R2 = io.R2(x, s.u0);
    s.Q = weighted_norm_sq(s.ld.Lg2h, s.R2);
    return s;
}

}  // namespace

Vec inverse_optimal_general(const InverseOptimalSpec& io, const Vec& x, double t) {
    const LieData ld = lie_data(io.base.sys, io.base.bf, x);
    const Vec u0 = io.base.u0(x, t);
    const Mat R2 = io.R2(x, u0);
    weighted_norm_sq(ld.Lg2h, R2);  // shape / SPD check
    return u0 + io.beta_gain * solve_spd(R2, ld.Lg2h.transpose());
}

double inverse_optimal_condition(const InverseOptimalSpec& io, const Vec& x, double t) {
    const IoTerms s = io_terms(io, x, t);
    return s.drift - s.ell + s.Q + io.base.alpha(s.ld.h_val);
}

Vec worst_case_disturbance(const InverseOptimalSpec& io, const Vec& x) {
    const LieData ld = lie_data(io.base.sys, io.base.bf, x);
    const double nrm = ld.Lg1h.size() ? ld.Lg1h.norm() : 0.0;
    if (nrm == 0.0) return Vec::Zero(io.base.sys.m1);
    const double s = io.gamma.gamma_prime_inv(2.0 * nrm);
    return (-io.lambda * s / nrm) * ld.Lg1h.transpose();
}

double state_penalty_l(const InverseOptimalSpec& io, const Vec& x, double t) {
    const IoTerms s = io_terms(io, x, t);
    const double b = io.beta_gain;
    return -2.0 * b * (s.drift - s.ell + s.Q) - b * (2.0 - io.lambda) * s.ell - b * (b - 2.0) * s.Q;
}

double pi_gap(const InverseOptimalSpec& io, const Vec& x, const Vec& d) {
    const Vec ds = worst_case_disturbance(io, x);
    if (d.size() != ds.size()) throw std::invalid_argument("pi_gap: disturbance has wrong dimension");
    const double lam = io.lambda;
    const double nds = ds.norm();
    if (nds == 0.0) return io.gamma.gamma(d.norm() / lam);
    // Bregman gap of gamma(|.|/lambda) at d*; the first-order term enters with a plus sign
    return io.gamma.gamma(d.norm() / lam) - io.gamma.gamma(nds / lam) +
           io.gamma.gamma_prime(nds / lam) * ds.dot(ds - d) / (lam * nds);
}

double hji_residual(const InverseOptimalSpec& io, const Vec& x, double t) {
    const IoTerms s = io_terms(io, x, t);
    const double b = io.beta_gain;
    const double l = -2.0 * b * (s.drift - s.ell + s.Q) - b * (2.0 - io.lambda) * s.ell - b * (b - 2.0) * s.Q;
    return s.drift + 0.5 * b * s.Q - 0.5 * io.lambda * s.ell + l / (2.0 * b);
}

QpWeights qp_weights(const DssfCbfSpec& spec, double beta_gain, double lambda, const Vec& x, double t) {
    check_io_params(beta_gain, lambda, 2.0);
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    const double omega = omega_dssf(spec, ld, spec.u0(x, t));
    const double viol = spec.rho.inverse(std::max(0.0, -ld.h_val));
    const double active = std::max(0.0, -omega);
    QpWeights w;
    w.R1 = viol == 0.0 ? Weight::infinite() : Weight::finite(1.0 / viol);
    w.R2 = active == 0.0 ? Weight::infinite() : Weight::finite(ld.Lg2h.squaredNorm() / active);
    const double b = beta_gain;
    const double base = 2.0 * b * spec.alpha(ld.h_val) - b * (2.0 - lambda) * rho_term(spec, ld);
    w.l = base + b * std::min((b - 2.0) * omega, -2.0 * omega);
    w.l_unshifted = base + b * std::min(b * omega, -2.0 * omega);
    return w;
}

double scp_diagnostic(const DssfCbfSpec& spec, const std::vector<Vec>& points, double t, double eps) {
    double worst = 0.0;
    for (const Vec& x : points) {
        const LieData ld = lie_data(spec.sys, spec.bf, x);
        if (ld.Lg2h.norm() >= eps) continue;
        worst = std::max(worst, min_norm_correction(ld.Lg2h, omega_dssf(spec, ld, spec.u0(x, t))).norm());
    }
    return worst;
}

}  // namespace safety
