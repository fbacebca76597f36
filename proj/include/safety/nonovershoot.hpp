#pragma once

#include "safety/det_filters.hpp"

#include <vector>

namespace safety {

/// Regulate h to the boundary with u0 while the filter keeps h from reaching it too fast.
struct SandwichSpec {
    ControlAffineSystem sys;
    BarrierFunction bf;
    std::function<Vec(const Vec&)> u0;
    KFunction rho0;
    KFunction rho;
    ExtendedKFunction alpha0;
    ExtendedKFunction alpha;
};

/// Builds the spec after checking alpha0 <= alpha on a grid of h in [0, sup h]; throws ParameterError otherwise.
/// The full two-sided margin condition is only sampled by check_assumptions.
SandwichSpec make_sandwich_spec(ControlAffineSystem sys, BarrierFunction bf, std::function<Vec(const Vec&)> u0,
                                KFunction rho0, KFunction rho, ExtendedKFunction alpha0, ExtendedKFunction alpha);

double omega0(const SandwichSpec& spec, const Vec& x);
double omega_no(const SandwichSpec& spec, const Vec& x);
Vec sandwich_filter(const SandwichSpec& spec, const Vec& x);

enum class NoiseModel {
    Frobenius,  // unknown covariance, Frobenius trace bound with rho0/rho
    UnitSigma,  // Sigma = I, exact trace term
};
double stoch_omega0(const SandwichSpec& spec, const Vec& x, NoiseModel model);
double stoch_omega(const SandwichSpec& spec, const Vec& x, NoiseModel model);
Vec stoch_sandwich_filter(const SandwichSpec& spec, const Vec& x, NoiseModel model);

struct AssumptionReport {
    long samples = 0;
    double max_omega0 = -kInf;          // input-to-output stabilizing: must be <= 0
    double min_omega_where_lg2h_zero = kInf;  // CBF property: must be >= 0
    double min_alpha_margin = kInf;     // alpha - alpha0 - |Lg1h|[...]: must be >= 0
    bool ios_ok() const { return max_omega0 <= 1e-12; }
    bool cbf_ok() const { return min_omega_where_lg2h_zero >= -1e-12; }
    bool alpha_ok() const { return min_alpha_margin >= -1e-12; }
};

/// Dense grid over the box [lo, hi] with n points per axis. Points outside the domain of h are skipped.
AssumptionReport check_assumptions(const SandwichSpec& spec, const Vec& lo, const Vec& hi, int n_per_axis,
                                   double lg2h_eps = 1e-9);

}  // namespace safety
