#pragma once

#include "safety/det_filters.hpp"

namespace safety {

struct RcbfViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** @brief Reciprocal barrier B = 1/h > 0 on the open safe set, disturbance-free dynamics.
 *
 * sys.g2 is the control field g; sys.m1 must be 0.
 */
struct RcbfSpec {
    ControlAffineSystem sys;
    std::function<double(const Vec&)> B;
    std::function<RowVec(const Vec&)> gradB;
    KFunction alpha_bar = KFunction::identity();
    NominalController u0;
    WeightFn Rbar;  // may be empty when only the QP form is used
    double beta_gain = 2.0;
};

struct RcbfLie {
    double B;
    double drift;  // L_{f+g u0} B
    RowVec LgB;
};

RcbfLie rcbf_lie(const RcbfSpec& spec, const Vec& x, const Vec& u0);

double omega_tilde(const RcbfSpec& spec, const Vec& x, double t);
Vec rcbf_qp_filter(const RcbfSpec& spec, const Vec& x, double t);
// |LgB|^2 / max{0, omega_tilde}
Weight rcbf_qp_weight(const RcbfSpec& spec, const Vec& x, double t);

Vec rcbf_inverse_optimal(const RcbfSpec& spec, const Vec& x, double t);
// alpha_bar(1/B) - L_{f+gu0}B + LgB Rbar^-1 LgB'; nonnegative when the safety condition holds.
double rcbf_condition(const RcbfSpec& spec, const Vec& x, double t);

/// State penalty that makes -2 beta/B + integral of (l + (u-u0)' (Rbar/B^2) (u-u0)) constant along the filter.
double rcbf_state_penalty(const RcbfSpec& spec, const Vec& x, double t);
/// Variant with +Q inside the bracket (Q = LgB Rbar^-1 LgB') and no 1/B^2 scaling, kept for comparison.
double rcbf_state_penalty_flipped(const RcbfSpec& spec, const Vec& x, double t);

/// h = 1/B with alpha(h) = h|h| alpha_bar(|h|), for cross-checks against the h-formulation.
DssfCbfSpec rcbf_as_h_spec(const RcbfSpec& spec);

}  // namespace safety
