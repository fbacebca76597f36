#include "safety/nonovershoot.hpp"

#include <algorithm>
#include <cmath>

namespace safety {

namespace {

double lg1_norm(const LieData& ld) { return ld.Lg1h.size() ? ld.Lg1h.norm() : 0.0; }

double rho0_term(const SandwichSpec& s, const LieData& ld) {
    return s.rho0.inverse(std::max(0.0, ld.h_val));
}

double rho_term(const SandwichSpec& s, const LieData& ld) {
    return s.rho.inverse(std::max(0.0, -ld.h_val));
}

}  // namespace

SandwichSpec make_sandwich_spec(ControlAffineSystem sys, BarrierFunction bf, std::function<Vec(const Vec&)> u0,
                                KFunction rho0, KFunction rho, ExtendedKFunction alpha0, ExtendedKFunction alpha) {
    // only the safe side: any pair with alpha0 < alpha for h > 0 reverses order for h < 0 when both are odd
    const double hi = std::min({alpha0.upper(), alpha.upper(), bf.sup_h(), 1e3});
    constexpr int n = 2001;
    for (int i = 1; i <= n; ++i) {
        const double h = hi * i / n;
        if (alpha0(h) > alpha(h) * (1.0 + 1e-12) + 1e-14)
            throw ParameterError("sandwich spec: alpha0 exceeds alpha at h = " + std::to_string(h));
    }
    return SandwichSpec{std::move(sys), std::move(bf), std::move(u0), std::move(rho0), std::move(rho),
                        std::move(alpha0), std::move(alpha)};
}

double omega0(const SandwichSpec& spec, const Vec& x) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    const double n1 = lg1_norm(ld);
    return ld.drift_with(spec.u0(x)) + (n1 > 0.0 ? n1 * rho0_term(spec, ld) : 0.0) + spec.alpha0(ld.h_val);
}

double omega_no(const SandwichSpec& spec, const Vec& x) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    const double n1 = lg1_norm(ld);
    return ld.drift_with(spec.u0(x)) - (n1 > 0.0 ? n1 * rho_term(spec, ld) : 0.0) + spec.alpha(ld.h_val);
}

Vec sandwich_filter(const SandwichSpec& spec, const Vec& x) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    return spec.u0(x) + min_norm_correction(ld.Lg2h, omega_no(spec, x));
}

double stoch_omega0(const SandwichSpec& spec, const Vec& x, NoiseModel model) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    const double base = ld.drift_with(spec.u0(x)) + spec.alpha0(ld.h_val);
    if (model == NoiseModel::UnitSigma) return base + ld.trace_term;
    return base + (ld.frob_term > 0.0 ? 0.5 * ld.frob_term * rho0_term(spec, ld) : 0.0);
}

double stoch_omega(const SandwichSpec& spec, const Vec& x, NoiseModel model) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    const double base = ld.drift_with(spec.u0(x)) + spec.alpha(ld.h_val);
    if (model == NoiseModel::UnitSigma) return base + ld.trace_term;
    return base - (ld.frob_term > 0.0 ? 0.5 * ld.frob_term * rho_term(spec, ld) : 0.0);
}

Vec stoch_sandwich_filter(const SandwichSpec& spec, const Vec& x, NoiseModel model) {
    const LieData ld = lie_data(spec.sys, spec.bf, x);
    return spec.u0(x) + min_norm_correction(ld.Lg2h, stoch_omega(spec, x, model));
}

AssumptionReport check_assumptions(const SandwichSpec& spec, const Vec& lo, const Vec& hi, int n_per_axis,
                                   double lg2h_eps) {
    if (lo.size() != spec.sys.n || hi.size() != spec.sys.n || n_per_axis < 2)
        throw std::invalid_argument("check_assumptions: bad box");
    AssumptionReport rep;
    const int n = spec.sys.n;
    std::vector<int> idx(n, 0);
    Vec x(n);
    for (;;) {
        for (int i = 0; i < n; ++i) x(i) = lo(i) + (hi(i) - lo(i)) * idx[i] / (n_per_axis - 1);
        try {
            const LieData ld = lie_data(spec.sys, spec.bf, x);
            const double n1 = lg1_norm(ld);
            rep.max_omega0 = std::max(rep.max_omega0, omega0(spec, x));
            if (ld.Lg2h.norm() < lg2h_eps) rep.min_omega_where_lg2h_zero = std::min(rep.min_omega_where_lg2h_zero, omega_no(spec, x));
            const double margin = spec.alpha(ld.h_val) - spec.alpha0(ld.h_val) -
                                  (n1 > 0.0 ? n1 * (rho_term(spec, ld) + rho0_term(spec, ld)) : 0.0);
            rep.min_alpha_margin = std::min(rep.min_alpha_margin, margin);
            ++rep.samples;
        } catch (const DomainError&) {
        }
        int k = 0;
        while (k < n && ++idx[k] == n_per_axis) idx[k++] = 0;
        if (k == n) break;
    }
    return rep;
}

}  // namespace safety
