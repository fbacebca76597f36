#include "safety/func_core.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>

namespace safety {

double invert_monotone(const ScalarFn& f, double y, double initial_hi) {
    if (!std::isfinite(y)) throw DomainError("invert_monotone: non-finite target");
    if (f(0.0) >= y) return 0.0;
    double lo = 0.0;
    double hi = initial_hi > 0.0 ? initial_hi : 1.0;
    while (f(hi) < y) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw ConvergenceError("invert_monotone: could not bracket target");
    }
    if (f(hi) == y) return hi;
    std::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::toms748_solve([&](double r) { return f(r) - y; }, lo, hi,
                                                          boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (a + b);
}

KFunction::KFunction(ScalarFn eval, ScalarFn inverse, std::optional<double> codomain_cap)
    : eval_(std::move(eval)), inv_(std::move(inverse)), cap_(codomain_cap) {
    if (!eval_) throw std::invalid_argument("KFunction: eval is empty");
    if (cap_ && !(*cap_ > 0.0)) throw std::invalid_argument("KFunction: codomain cap must be positive");
}

double KFunction::operator()(double r) const {
    if (r < 0.0) throw DomainError("KFunction: negative argument");
    return eval_(r);
}

double KFunction::inverse(double y) const {
    if (y < 0.0) throw DomainError("KFunction::inverse: negative argument");
    if (cap_ && y >= *cap_) throw DomainError("KFunction::inverse: argument outside codomain");
    if (y == 0.0) return 0.0;
    if (inv_) return inv_(y);
    return invert_monotone(eval_, y);
}

KFunction KFunction::identity() {
    return KFunction([](double r) { return r; }, [](double y) { return y; });
}

KFunction KFunction::linear(double k) {
    if (!(k > 0.0)) throw std::invalid_argument("KFunction::linear: gain must be positive");
    return KFunction([k](double r) { return k * r; }, [k](double y) { return y / k; });
}

KFunction KFunction::power(double p, double c) {
    if (!(p > 0.0) || !(c > 0.0)) throw std::invalid_argument("KFunction::power: bad parameters");
    return KFunction([p, c](double r) { return c * std::pow(r, p); },
                     [p, c](double y) { return std::pow(y / c, 1.0 / p); });
}

ExtendedKFunction::ExtendedKFunction(ScalarFn eval, double a, double b) : eval_(std::move(eval)), a_(a), b_(b) {
    if (!eval_) throw std::invalid_argument("ExtendedKFunction: eval is empty");
    if (!(a < 0.0 && 0.0 < b)) throw std::invalid_argument("ExtendedKFunction: need a < 0 < b");
}

double ExtendedKFunction::operator()(double h) const {
    if (!contains(h)) throw DomainError("ExtendedKFunction: argument outside (a, b)");
    return eval_(h);
}

ExtendedKFunction ExtendedKFunction::identity() {
    return ExtendedKFunction([](double h) { return h; });
}

ExtendedKFunction ExtendedKFunction::linear(double k) {
    if (!(k > 0.0)) throw std::invalid_argument("ExtendedKFunction::linear: gain must be positive");
    return ExtendedKFunction([k](double h) { return k * h; });
}

ExtendedKFunction ExtendedKFunction::odd_power(double p, double scale) {
    if (!(p > 0.0) || !(scale > 0.0)) throw std::invalid_argument("ExtendedKFunction::odd_power: bad parameters");
    return ExtendedKFunction([p, scale](double h) { return std::copysign(std::pow(std::abs(h), p), h) / scale; });
}

LegendreFenchelPair::LegendreFenchelPair(ScalarFn gamma, ScalarFn gamma_prime, ScalarFn gamma_prime_inv)
    : g_(std::move(gamma)), dg_(std::move(gamma_prime)), dinv_(std::move(gamma_prime_inv)) {
    if (!g_ || !dg_) throw std::invalid_argument("LegendreFenchelPair: gamma and gamma' are required");
}

double LegendreFenchelPair::gamma(double r) const {
    if (r < 0.0) throw DomainError("gamma: negative argument");
    return g_(r);
}

double LegendreFenchelPair::gamma_prime(double r) const {
    if (r < 0.0) throw DomainError("gamma': negative argument");
    return dg_(r);
}

double LegendreFenchelPair::gamma_prime_inv(double s) const {
    if (s < 0.0) throw DomainError("(gamma')^-1: negative argument");
    if (s == 0.0) return 0.0;
    if (dinv_) return dinv_(s);
    return invert_monotone(dg_, s);
}

double LegendreFenchelPair::ell_integral(double r) const {
    if (r < 0.0) throw DomainError("legendre_fenchel: negative argument");
    if (r == 0.0) return 0.0;
    // tanh-sinh copes with the unbounded slope of the inverse derivative at 0
    thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    const double v = integrator.integrate([this](double s) { return gamma_prime_inv(s); }, 0.0, r, 1e-13);
    if (!std::isfinite(v)) throw ConvergenceError("legendre_fenchel: quadrature failed");
    return v;
}

double LegendreFenchelPair::ell(double r) const {
    if (r < 0.0) throw DomainError("legendre_fenchel: negative argument");
    if (r == 0.0) return 0.0;
    if (dinv_) {
        const double s = dinv_(r);
        return r * s - g_(s);
    }
    return ell_integral(r);
}

LegendreFenchelPair LegendreFenchelPair::dual() const {
    auto self = *this;
    return LegendreFenchelPair([self](double r) { return self.ell(r); },
                               [self](double s) { return self.gamma_prime_inv(s); },
                               [self](double r) { return self.gamma_prime(r); });
}

LegendreFenchelPair LegendreFenchelPair::quadratic(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("quadratic gamma: c must be positive");
    return LegendreFenchelPair([c](double r) { return c * r * r; }, [c](double r) { return 2.0 * c * r; },
                               [c](double s) { return s / (2.0 * c); });
}

LegendreFenchelPair LegendreFenchelPair::power(double p) {
    if (!(p > 1.0)) throw std::invalid_argument("power gamma: p must exceed 1");
    return LegendreFenchelPair([p](double r) { return std::pow(r, p) / p; },
                               [p](double r) { return std::pow(r, p - 1.0); },
                               [p](double s) { return std::pow(s, 1.0 / (p - 1.0)); });
}

double legendre_fenchel(const LegendreFenchelPair& pair, double r) { return pair.ell(r); }

double young_gap(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const LegendreFenchelPair& pair) {
    if (x.size() != y.size()) throw std::invalid_argument("young_gap: dimension mismatch");
    return pair.gamma(x.norm()) + pair.ell(y.norm()) - x.dot(y);
}

namespace {

double rk4_decay(const ExtendedKFunction& alpha, double r, double t, long steps) {
    const double dt = t / static_cast<double>(steps);
    double h = r;
    for (long k = 0; k < steps; ++k) {
        const double k1 = -alpha(h);
        const double k2 = -alpha(h + 0.5 * dt * k1);
        const double k3 = -alpha(h + 0.5 * dt * k2);
        const double k4 = -alpha(h + dt * k3);
        const double next = h + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        // the exact solution never crosses 0; non-Lipschitz alpha reaches it in finite time and stays
        if (next == 0.0 || std::signbit(next) != std::signbit(h)) return 0.0;
        h = next;
    }
    return h;
}

}  // namespace

double kl_solve(const ExtendedKFunction& alpha, double r, double t) {
    if (!alpha.contains(r)) throw DomainError("kl_solve: initial value outside alpha's domain");
    if (t < 0.0) throw DomainError("kl_solve: negative time");
    if (t == 0.0 || r == 0.0) return r;
    long steps = std::max<long>(8, static_cast<long>(std::ceil(t / 0.05)));
    double prev = rk4_decay(alpha, r, t, steps);
    constexpr long kMaxSteps = 1L << 24;
    while (steps < kMaxSteps) {
        steps *= 2;
        const double cur = rk4_decay(alpha, r, t, steps);
        if (std::abs(cur - prev) <= 1e-8 * std::max(1.0, std::abs(cur))) return cur;
        prev = cur;
    }
    throw ConvergenceError("kl_solve: step size underflow before refinements agreed");
}

std::vector<double> kl_curve(const ExtendedKFunction& alpha, double r, const std::vector<double>& times) {
    if (!alpha.contains(r)) throw DomainError("kl_curve: initial value outside alpha's domain");
    for (std::size_t k = 0; k < times.size(); ++k)
        if (times[k] < 0.0 || (k > 0 && times[k] < times[k - 1]))
            throw DomainError("kl_curve: times must be nonnegative and sorted");
    auto sweep = [&](double hmax) {
        std::vector<double> out(times.size());
        double h = r, t = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double span = times[k] - t;
            if (span > 0.0 && h != 0.0) {
                const long n = std::max<long>(1, static_cast<long>(std::ceil(span / hmax)));
                h = rk4_decay(alpha, h, span, n);
            }
            t = times[k];
            out[k] = h;
        }
        return out;
    };
    double hmax = 1e-2;
    std::vector<double> prev = sweep(hmax);
    for (int it = 0; it < 12; ++it) {
        hmax *= 0.5;
        std::vector<double> cur = sweep(hmax);
        double diff = 0.0;
        for (std::size_t k = 0; k < cur.size(); ++k)
            diff = std::max(diff, std::abs(cur[k] - prev[k]) / std::max(1.0, std::abs(cur[k])));
        if (diff <= 1e-8) return cur;
        prev = std::move(cur);
    }
    throw ConvergenceError("kl_curve: refinements did not agree");
}

}  // namespace safety
