#pragma once

#include "safety/det_filters.hpp"

namespace safety {

struct ScbfViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// dx = f dt + g1 dw + g2 u dt with unit-intensity noise.
struct StochSpec {
    ControlAffineSystem sys;
    BarrierFunction bf;
    ExtendedKFunction alpha;
    NominalController u0;
    LegendreFenchelPair gamma2 = LegendreFenchelPair::quadratic(0.25);
    WeightFn R2;
    double beta_gain = 2.0;
    bool safety_only = false;  // permits beta in [1, 2)
};

/// Noise of unknown covariance Sigma Sigma'; h must be a noise-to-state safety CBF.
struct NssfSpec {
    StochSpec base;
    KFunction rho;
    LegendreFenchelPair gamma1 = LegendreFenchelPair::quadratic(0.25);
    double lambda = 1.0;
};

/// Incremental covariance factor: the noise increment is Sigma(t) dw.
struct CovarianceSchedule {
    std::function<Mat(double t)> Sigma;

    Mat at(double t) const { return Sigma(t); }
    static CovarianceSchedule constant(const Mat& S) {
        return CovarianceSchedule{[S](double) { return S; }};
    }
};

// Lfh + Lg2h u + 0.5 Tr(Sigma' g1' H g1 Sigma)
double generator_value(const ControlAffineSystem& sys, const BarrierFunction& bf, const Vec& x, const Vec& u,
                       const Mat& Sigma);

double omega_sbfc(const StochSpec& spec, const Vec& x, double t);
Vec stoch_qp_filter(const StochSpec& spec, const Vec& x, double t);
// u0 plus the Sontag correction built from the trace-augmented omega.
Vec stoch_sontag_filter(const StochSpec& spec, const Vec& x, double t);

Vec stoch_inverse_optimal(const StochSpec& spec, const Vec& x, double t);
double stoch_condition(const StochSpec& spec, const Vec& x, double t);
double stoch_state_penalty(const StochSpec& spec, const Vec& x, double t);
double hjb_residual(const StochSpec& spec, const Vec& x, double t);

double omega_nssf(const NssfSpec& spec, const Vec& x, double t);
Vec nssf_qp_filter(const NssfSpec& spec, const Vec& x, double t);
Vec nssf_sontag_filter(const NssfSpec& spec, const Vec& x, double t);

/// Shortcut closed form for the scalar cubic-barrier system: min{u0, -(1+x^2)^2 rho^-1(max{0,|x|x}) - x}.
/// Matches nssf_qp_filter for rho = id, and on x <= 0 for any rho.
double cubic_barrier_shortcut_filter(double x, double u0, const KFunction& rho);

struct CovarianceReport {
    Mat value;
    bool psd = true;
    double min_eigenvalue = 0.0;
};
CovarianceReport worst_case_covariance(const NssfSpec& spec, const Vec& x);

Vec nssf_inverse_optimal(const NssfSpec& spec, const Vec& x, double t);
double nssf_condition(const NssfSpec& spec, const Vec& x, double t);
double nssf_state_penalty(const NssfSpec& spec, const Vec& x, double t);
double nssf_hji_residual(const NssfSpec& spec, const Vec& x, double t);

}  // namespace safety
