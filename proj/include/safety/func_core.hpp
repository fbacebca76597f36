#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace safety {

using ScalarFn = std::function<double(double)>;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Solves f(r) = y for r >= 0 with f nondecreasing and f(0) <= y.
/// Bracket grows by doubling, then TOMS 748 down to a relative width of ~1e-15.
double invert_monotone(const ScalarFn& f, double y, double initial_hi = 1.0);

/** @brief Class-K (or K-infinity) function on [0, inf) with an inverse.
 *
 * The inverse is numeric when none is supplied. An optional codomain cap
 * records functions such as rho that map into [0, cap).
 */
class KFunction {
public:
    KFunction(ScalarFn eval, ScalarFn inverse = {}, std::optional<double> codomain_cap = std::nullopt);

    double operator()(double r) const;
    double inverse(double y) const;
    bool has_analytic_inverse() const { return static_cast<bool>(inv_); }
    std::optional<double> codomain_cap() const { return cap_; }

    static KFunction identity();
    static KFunction linear(double k);
    // c * r^p
    static KFunction power(double p, double c = 1.0);

private:
    ScalarFn eval_;
    ScalarFn inv_;
    std::optional<double> cap_;
};

/// Strictly increasing function on (a, b), a < 0 < b, vanishing at 0.
class ExtendedKFunction {
public:
    ExtendedKFunction(ScalarFn eval, double a = -kInf, double b = kInf);

    double operator()(double h) const;
    double lower() const { return a_; }
    double upper() const { return b_; }
    bool contains(double h) const { return h > a_ && h < b_; }

    static ExtendedKFunction identity();
    static ExtendedKFunction linear(double k);
    // sign(h) * |h|^p / c, e.g. the r^eps / eps family
    static ExtendedKFunction odd_power(double p, double scale = 1.0);

private:
    ScalarFn eval_;
    double a_, b_;
};

/** @brief gamma, gamma', (gamma')^{-1} and the Legendre-Fenchel transform of gamma.
 *
 * gamma' is expected to be class K-infinity. When (gamma')^{-1} is not
 * supplied it is computed by root finding and the transform falls back to
 * tanh-sinh quadrature of the inverse derivative.
 */
class LegendreFenchelPair {
public:
    LegendreFenchelPair(ScalarFn gamma, ScalarFn gamma_prime, ScalarFn gamma_prime_inv = {});

    double gamma(double r) const;
    double gamma_prime(double r) const;
    double gamma_prime_inv(double s) const;
    double ell(double r) const;
    bool has_analytic_inverse() const { return static_cast<bool>(dinv_); }

    // Transform evaluated through the integral form, independent of ell().
    double ell_integral(double r) const;

    // The pair (ell gamma, (gamma')^{-1}, gamma'); its transform is gamma again.
    LegendreFenchelPair dual() const;

    // c * r^2
    static LegendreFenchelPair quadratic(double c = 1.0);
    // r^p / p, p > 1
    static LegendreFenchelPair power(double p);

private:
    ScalarFn g_, dg_, dinv_;
};

double legendre_fenchel(const LegendreFenchelPair& pair, double r);

/// gamma(|x|) + ell gamma(|y|) - x'y; nonnegative by Young's inequality.
double young_gap(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LegendreFenchelPair& pair);

/// Solution at time t of h' = -alpha(h), h(0) = r, by RK4 with step halving.
double kl_solve(const ExtendedKFunction& alpha, double r, double t);

/// kl_solve sampled at sorted times in one forward sweep.
std::vector<double> kl_curve(const ExtendedKFunction& alpha, double r, const std::vector<double>& times);

class KLBound {
public:
    explicit KLBound(ExtendedKFunction alpha) : alpha_(std::move(alpha)) {}
    double operator()(double r, double t) const { return kl_solve(alpha_, r, t); }
    const ExtendedKFunction& alpha() const { return alpha_; }

private:
    ExtendedKFunction alpha_;
};

}  // namespace safety
