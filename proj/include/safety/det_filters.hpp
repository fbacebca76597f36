#pragma once

#include "safety/func_core.hpp"
#include "safety/system_model.hpp"

#include <stdexcept>
#include <vector>

namespace safety {

/// omega < 0 where the control direction vanishes: h is not a valid CBF at x.
struct CbfViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/** @brief Cost weight that may be +infinity.
 *
 * An infinite weight times a zero numerator contributes 0; times a positive
 * numerator the product is +inf. The infinity never enters other arithmetic.
 */
class Weight {
public:
    static Weight finite(double v) { return Weight(v, false); }
    static Weight infinite() { return Weight(0.0, true); }

    bool is_infinite() const { return inf_; }
    double value() const;
    double apply(double numerator) const;

private:
    Weight(double v, bool inf) : v_(v), inf_(inf) {}
    double v_;
    bool inf_;
};

using WeightFn = std::function<Mat(const Vec& x, const Vec& u0)>;

struct DssfCbfSpec {
    ControlAffineSystem sys;
    BarrierFunction bf;
    KFunction rho;
    ExtendedKFunction alpha;
    NominalController u0;
};

struct InverseOptimalSpec {
    DssfCbfSpec base;
    double beta_gain = 2.0;
    double lambda = 1.0;
    LegendreFenchelPair gamma;
    WeightFn R2;
    bool safety_only = false;  // beta in [1, 2): safety holds, optimality is not claimed
};

InverseOptimalSpec make_inverse_optimal(DssfCbfSpec base, double beta_gain, double lambda, LegendreFenchelPair gamma,
                                        WeightFn R2);
InverseOptimalSpec make_inverse_optimal_safety_only(DssfCbfSpec base, double beta_gain, double lambda,
                                                    LegendreFenchelPair gamma, WeightFn R2);

// Closed-form minimizer of |v|^2 s.t. omega + L v >= 0.
Vec min_norm_correction(const RowVec& L, double omega);
// (L)' kappa with the Sontag-type kappa; zero where L = 0.
Vec sontag_correction(const RowVec& L, double omega);

double omega_dssf(const DssfCbfSpec& spec, const LieData& ld, const Vec& u0);
double omega_dssf(const DssfCbfSpec& spec, const Vec& x, double t);

Vec qp_filter(const DssfCbfSpec& spec, const Vec& x, double t);

struct QpAffineForm {
    Mat chi0;
    Vec chi1;
    bool active = false;
};
QpAffineForm qp_filter_affine_form(const DssfCbfSpec& spec, const Vec& x, double t);

/// Returns the Sontag correction; include_u0 selects omega with u0 in the drift.
Vec sontag_filter(const DssfCbfSpec& spec, const Vec& x, double t, bool include_u0);
Vec half_sontag_filter(const DssfCbfSpec& spec, const Vec& x, double t);

Vec inverse_optimal_qp(const DssfCbfSpec& spec, double beta_gain, const Vec& x, double t);
Vec inverse_optimal_qp_safety_only(const DssfCbfSpec& spec, double beta_gain, const Vec& x, double t);

Vec inverse_optimal_general(const InverseOptimalSpec& io, const Vec& x, double t);
// L_{f+g2u0}h - ell(2|Lg1h|) + Lg2h R2^-1 Lg2h' + alpha(h); nonnegative when the safety condition holds.
double inverse_optimal_condition(const InverseOptimalSpec& io, const Vec& x, double t);
Vec worst_case_disturbance(const InverseOptimalSpec& io, const Vec& x);
double state_penalty_l(const InverseOptimalSpec& io, const Vec& x, double t);
double pi_gap(const InverseOptimalSpec& io, const Vec& x, const Vec& d);
double hji_residual(const InverseOptimalSpec& io, const Vec& x, double t);

// Lg2h R^-1 Lg2h' via a Cholesky factor; throws ParameterError unless R is SPD.
double weighted_norm_sq(const RowVec& L, const Mat& R);

struct QpWeights {
    Weight R1 = Weight::infinite();
    Weight R2 = Weight::infinite();
    double l = 0.0;             // closes the completed-square identity
    double l_unshifted = 0.0;  // uses min{beta*omega, -2*omega}
};
QpWeights qp_weights(const DssfCbfSpec& spec, double beta_gain, double lambda, const Vec& x, double t);

/// Largest |u_QP| over the points whose |Lg2h| is below eps (continuity near L = 0).
double scp_diagnostic(const DssfCbfSpec& spec, const std::vector<Vec>& points, double t, double eps);

}  // namespace safety
