#include "safety/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace safety {

void SimConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("SimConfig: dt must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("SimConfig: T must be positive");
    if (dt > T) throw std::invalid_argument("SimConfig: dt exceeds T");
    if (!(escape_threshold > 0.0)) throw std::invalid_argument("SimConfig: escape threshold must be positive");
    if (paths < 1) throw std::invalid_argument("SimConfig: paths must be >= 1");
}

namespace {

std::string where(const Vec& x, double t) {
    std::ostringstream os;
    os << std::setprecision(17) << " (t = " << t << ", x = [";
    for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
    os << "])";
    return os.str();
}

struct Eval {
    Vec u, u0, d;
};

Eval evaluate(const ClosedLoop& loop, const Vec& x, double t) {
    try {
        Eval e{loop.control(x, t), loop.u0 ? loop.u0(x, t) : Vec::Zero(loop.sys.m2),
               loop.disturbance ? loop.disturbance(x, t) : Vec::Zero(loop.sys.m1)};
        if (e.u.size() != loop.sys.m2) throw std::invalid_argument("controller returned wrong dimension");
        if (e.d.size() != loop.sys.m1) throw std::invalid_argument("disturbance returned wrong dimension");
        return e;
    } catch (const SimError&) {
        throw;
    } catch (const std::exception& ex) {
        throw SimError(std::string(ex.what()) + where(x, t));
    }
}

Vec rhs(const ClosedLoop& loop, const Vec& x, const Eval& e) {
    Vec dx = loop.sys.eval_f(x) + loop.sys.eval_g2(x) * e.u;
    if (loop.sys.m1 > 0) dx += loop.sys.eval_g1(x) * e.d;
    return dx;
}

bool escaped(const Vec& x, double thr) { return !x.allFinite() || x.lpNorm<Eigen::Infinity>() > thr; }

void record(Trajectory& tr, const ClosedLoop& loop, double t, const Vec& x, const Eval& e) {
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.u.push_back(e.u);
    tr.u0.push_back(e.u0);
    tr.d.push_back(e.d);
    tr.h_values.push_back(loop.bf(x));
}

long step_count(const SimConfig& cfg) { return static_cast<long>(std::ceil(cfg.T / cfg.dt - 1e-9)); }

// Treats |v|^2 below (1e-10 * scale)^2 as an exact zero so rounding in u - u0 does not trip an infinite weight.
double tagged(const Weight& w, double num, double scale) {
    const double tol = 1e-10 * (1.0 + scale);
    if (w.is_infinite() && num <= tol * tol) return 0.0;
    return w.apply(num);
}

double scale_of(const Vec& u, const Vec& u0) { return u.lpNorm<Eigen::Infinity>() + u0.lpNorm<Eigen::Infinity>(); }

}  // namespace

Trajectory integrate_ode(const ClosedLoop& loop, const Vec& x0, const SimConfig& cfg) {
    cfg.validate();
    if (x0.size() != loop.sys.n) throw std::invalid_argument("integrate_ode: x0 has wrong dimension");
    Trajectory tr;
    Vec x = x0;
    double t = 0.0;
    Eval e = evaluate(loop, x, t);
    record(tr, loop, t, x, e);
    const long n = step_count(cfg);
    for (long k = 0; k < n; ++k) {
        const double s = std::min(cfg.dt, cfg.T - t);
        const Vec k1 = rhs(loop, x, e);
        const Vec x2 = x + 0.5 * s * k1;
        const Vec k2 = escaped(x2, kInf) ? x2 : rhs(loop, x2, evaluate(loop, x2, t + 0.5 * s));
        const Vec x3 = x + 0.5 * s * k2;
        const Vec k3 = escaped(x3, kInf) ? x3 : rhs(loop, x3, evaluate(loop, x3, t + 0.5 * s));
        const Vec x4 = x + s * k3;
        const Vec k4 = escaped(x4, kInf) ? x4 : rhs(loop, x4, evaluate(loop, x4, t + s));
        const Vec next = x + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = (k + 1 == n) ? cfg.T : t + s;
        if (escaped(next, cfg.escape_threshold)) {
            tr.escape_time = t;
            break;
        }
        x = next;
        e = evaluate(loop, x, t);
        record(tr, loop, t, x, e);
    }
    return tr;
}

Trajectory integrate_sde_path(const ClosedLoop& loop, const CovarianceSchedule& cov, const Vec& x0,
                              const SimConfig& cfg, std::uint64_t path) {
    cfg.validate();
    if (x0.size() != loop.sys.n) throw std::invalid_argument("integrate_sde: x0 has wrong dimension");
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);

    Trajectory tr;
    Vec x = x0;
    double t = 0.0;
    ClosedLoop noiseless = loop;
    noiseless.disturbance = {};
    const int m1 = loop.sys.m1;
    auto eval_at = [&](const Vec& xx, double tt) {
        Eval e = evaluate(noiseless, xx, tt);
        e.d = Vec::Zero(m1);
        return e;
    };
    Eval e = eval_at(x, t);
    const long n = step_count(cfg);
    for (long k = 0; k <= n; ++k) {
        const double s = (k == n) ? 0.0 : std::min(cfg.dt, cfg.T - t);
        Vec dw = Vec::Zero(m1);
        Vec noise = Vec::Zero(loop.sys.n);
        if (s > 0.0 && m1 > 0) {
            const Mat S = cov.at(t);
            if (S.rows() != m1) throw SimError("covariance factor has wrong shape" + where(x, t));
            Vec xi(S.cols());
            for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng) * std::sqrt(s);
            dw = S * xi;
            noise = loop.sys.eval_g1(x) * dw;
        }
        e.d = dw;
        record(tr, loop, t, x, e);
        if (k == n) break;
        const Vec next = x + s * (loop.sys.eval_f(x) + loop.sys.eval_g2(x) * e.u) + noise;
        t = (k + 1 == n) ? cfg.T : t + s;
        if (escaped(next, cfg.escape_threshold)) {
            tr.escape_time = t;
            break;
        }
        x = next;
        e = eval_at(x, t);
    }
    return tr;
}

std::vector<Trajectory> integrate_sde(const ClosedLoop& loop, const CovarianceSchedule& cov, const Vec& x0,
                                      const SimConfig& cfg) {
    cfg.validate();
    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(cfg.paths));
    for (int p = 0; p < cfg.paths; ++p) out.push_back(integrate_sde_path(loop, cov, x0, cfg, static_cast<std::uint64_t>(p)));
    return out;
}

DssfReport certify_dssf_bound(const Trajectory& traj, const ExtendedKFunction& alpha, const KFunction& rho) {
    DssfReport rep;
    if (traj.size() == 0) return rep;
    const std::vector<double> beta = kl_curve(alpha, traj.h_values.front(), traj.times);
    double dsup = 0.0;
    rep.margins.resize(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.d[k].size()) dsup = std::max(dsup, traj.d[k].norm());
        rep.margins[k] = traj.h_values[k] - (beta[k] - rho(dsup));
        rep.min_margin = std::min(rep.min_margin, rep.margins[k]);
    }
    rep.pass = rep.min_margin >= -1e-4;
    return rep;
}

SandwichReport certify_sandwich_bound(const Trajectory& traj, const ExtendedKFunction& alpha, const KFunction& rho,
                                      const ExtendedKFunction& alpha0, const KFunction& rho0) {
    SandwichReport rep;
    if (traj.size() == 0) return rep;
    const double h0 = traj.h_values.front();
    const std::vector<double> lo = kl_curve(alpha, h0, traj.times);
    const std::vector<double> hi = kl_curve(alpha0, h0, traj.times);
    double dsup = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.d[k].size()) dsup = std::max(dsup, traj.d[k].norm());
        rep.min_lower_margin = std::min(rep.min_lower_margin, traj.h_values[k] - (lo[k] - rho(dsup)));
        rep.min_upper_margin = std::min(rep.min_upper_margin, hi[k] + rho0(dsup) - traj.h_values[k]);
    }
    rep.pass = rep.min_lower_margin >= -1e-4 && rep.min_upper_margin >= -1e-4;
    return rep;
}

CostSpec cost_general_game(const InverseOptimalSpec& io) {
    CostSpec c{"general-game", true, io.beta_gain, io.lambda, {}, {}};
    const double b = io.beta_gain, lam = io.lambda;
    c.terminal = [bf = io.base.bf, b](const Vec& x) { return 2.0 * b * bf(x); };
    c.running = [io, b, lam](const Vec& x, const Vec& u, const Vec& u0, const Vec& d, double t) {
        const Vec v = u - u0;
        const Mat R2 = io.R2(x, u0);
        return state_penalty_l(io, x, t) - v.dot(R2 * v) + b * lam * io.gamma.gamma(d.norm() / lam);
    };
    return c;
}

CostSpec cost_qp_game(const DssfCbfSpec& spec, double beta_gain, double lambda) {
    CostSpec c{"qp-game", true, beta_gain, lambda, {}, {}};
    c.terminal = [bf = spec.bf, beta_gain](const Vec& x) { return 2.0 * beta_gain * bf(x); };
    c.running = [spec, beta_gain, lambda](const Vec& x, const Vec& u, const Vec& u0, const Vec& d, double t) {
        const QpWeights w = qp_weights(spec, beta_gain, lambda, x, t);
        const Vec v = u - u0;
        const double dn = d.size() ? d.squaredNorm() : 0.0;
        return w.l - tagged(w.R2, v.squaredNorm(), scale_of(u, u0)) +
               (beta_gain / lambda) * tagged(w.R1, dn, d.size() ? d.lpNorm<Eigen::Infinity>() : 0.0);
    };
    return c;
}

CostSpec cost_qp_undisturbed(const DssfCbfSpec& spec, double beta_gain) {
    if (spec.sys.m1 != 0) throw ParameterError("cost_qp_undisturbed: the disturbance-free form needs m1 = 0");
    CostSpec c = cost_qp_game(spec, beta_gain, 2.0);
    c.selector = "qp-undisturbed";
    return c;
}

CostSpec cost_reciprocal_min(const RcbfSpec& spec) {
    CostSpec c{"reciprocal-min", false, spec.beta_gain, 1.0, {}, {}};
    const double b = spec.beta_gain;
    c.terminal = [B = spec.B, b](const Vec& x) { return -2.0 * b / B(x); };
    c.running = [spec, b](const Vec& x, const Vec& u, const Vec& u0, const Vec&, double t) {
        const Vec v = u - u0;
        const RcbfLie r = rcbf_lie(spec, x, u0);
        const double B2 = r.B * r.B;
        if (spec.Rbar) {
            const Mat R = spec.Rbar(x, u0);
            return rcbf_state_penalty(spec, x, t) + v.dot(R * v) / B2;
        }
        // QP form: Rbar = |LgB|^2 / max{0, omega_tilde}, so LgB Rbar^-1 LgB' = max{0, omega_tilde}
        const double m = std::max(0.0, r.drift - spec.alpha_bar(1.0 / r.B));
        const double l = (-2.0 * b * (r.drift - m) + b * (b - 2.0) * m) / B2;
        const Weight W = m == 0.0 ? Weight::infinite() : Weight::finite(r.LgB.squaredNorm() / m / B2);
        return l + tagged(W, v.squaredNorm(), scale_of(u, u0));
    };
    return c;
}

CostSpec cost_stochastic_mean(const StochSpec& spec) {
    CostSpec c{"stochastic-mean", true, spec.beta_gain, 1.0, {}, {}};
    const double b = spec.beta_gain;
    c.terminal = [bf = spec.bf, b](const Vec& x) { return 2.0 * b * bf(x); };
    c.running = [spec, b](const Vec& x, const Vec& u, const Vec& u0, const Vec&, double t) {
        const Vec v = u - u0;
        const double r = std::sqrt(std::max(0.0, v.dot(spec.R2(x, u0) * v)));
        return stoch_state_penalty(spec, x, t) - b * b * spec.gamma2.gamma(2.0 * r / b);
    };
    return c;
}

CostSpec cost_noise_game(const NssfSpec& spec, const CovarianceSchedule& cov) {
    CostSpec c{"noise-game", true, spec.base.beta_gain, spec.lambda, {}, {}};
    const double b = spec.base.beta_gain, lam = spec.lambda;
    c.terminal = [bf = spec.base.bf, b](const Vec& x) { return 2.0 * b * bf(x); };
    c.running = [spec, cov, b, lam](const Vec& x, const Vec& u, const Vec& u0, const Vec&, double t) {
        const Vec v = u - u0;
        const double r = std::sqrt(std::max(0.0, v.dot(spec.base.R2(x, u0) * v)));
        const Mat S = cov.at(t);
        const double fro = (S * S.transpose()).norm();
        return nssf_state_penalty(spec, x, t) - b * b * spec.base.gamma2.gamma(2.0 * r / b) +
               b * lam * spec.gamma1.gamma(fro / lam);
    };
    return c;
}

CostSpec cost_projection_min(const ProjectionSpec& spec) {
    CostSpec c{"projection-min", false, spec.beta_gain, 1.0, {}, {}};
    const double b = spec.beta_gain;
    c.terminal = [h = spec.h, b](const Vec& x) { return -2.0 * b * h(x); };
    c.running = [spec](const Vec& x, const Vec& u, const Vec& u0, const Vec&, double) {
        const Vec v = u - u0;
        return projection_state_penalty(spec, x, u0) +
               tagged(projection_cost_weight(spec, x, u0), v.squaredNorm(), scale_of(u, u0));
    };
    return c;
}

CostSpec cost_integrator_min() {
    CostSpec c{"integrator-min", false, 2.0, 1.0, {}, {}};
    c.terminal = [](const Vec& x) { return x(0); };
    c.running = [](const Vec& x, const Vec& u, const Vec& u0, const Vec&, double) {
        const double a = u0(0) + x(0);
        const double v = u(0) - u0(0);
        const Weight W = a > 0.0 ? Weight::finite(1.0 / (4.0 * a)) : Weight::infinite();
        return std::max(x(0), -u0(0)) + tagged(W, v * v, scale_of(u, u0));
    };
    return c;
}

CostSpec cost_integrator_sontag() {
    CostSpec c{"integrator-sontag", false, 2.0, 1.0, {}, {}};
    c.terminal = [](const Vec& x) { return x(0); };
    c.running = [](const Vec& x, const Vec& u, const Vec& u0, const Vec&, double) {
        const double a = u0(0) + x(0);
        const double s = std::hypot(a, 1.0);
        const double v = u(0) - u0(0);
        return 0.5 * (-u0(0) + x(0) + s) + 0.5 * v * v / (a + s);
    };
    return c;
}

CostResult evaluate_cost(const Trajectory& traj, const CostSpec& cost) {
    CostResult res;
    if (traj.size() == 0) throw std::invalid_argument("evaluate_cost: empty trajectory");
    if (!cost.terminal || !cost.running) throw std::invalid_argument("evaluate_cost: cost spec is incomplete");
    const std::size_t n = traj.size();
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Vec& x = traj.states[k];
        if (traj.u[k].size() != traj.u0[k].size())
            throw std::invalid_argument("evaluate_cost: trajectory u and u0 dimensions differ");
        g[k] = cost.running(x, traj.u[k], traj.u0[k], traj.d[k], traj.times[k]);
        if (std::isnan(g[k])) throw std::invalid_argument("evaluate_cost: running term is NaN at sample " + std::to_string(k));
    }
    res.cumulative.assign(n, 0.0);
    double acc = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = traj.times[k] - traj.times[k - 1];
        if (std::isinf(g[k - 1]) || std::isinf(g[k])) {
            const double inf = std::isinf(g[k - 1]) ? g[k - 1] : g[k];
            if (std::isinf(acc) && acc != inf) throw std::invalid_argument("evaluate_cost: infinities of both signs");
            acc = inf;
        } else if (!std::isinf(acc)) {
            acc += 0.5 * dt * (g[k - 1] + g[k]);
        }
        res.cumulative[k] = acc;
    }
    if (n == 1 && std::isinf(g[0])) acc = 0.0;  // zero-length horizon carries no running cost
    res.integral = acc;
    res.terminal = cost.terminal(traj.states.back());
    res.value = res.terminal + res.integral;
    res.infinite = std::isinf(res.value);
    return res;
}

CostResult attach_cost(Trajectory& traj, const CostSpec& cost) {
    CostResult r = evaluate_cost(traj, cost);
    traj.running_cost = r.cumulative;
    return r;
}

double cost_invariance_check(const Trajectory& traj, const CostSpec& cost) {
    const CostResult r = evaluate_cost(traj, cost);
    const double base = cost.terminal(traj.states.front());
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k)
        worst = std::max(worst, std::abs(cost.terminal(traj.states[k]) + r.cumulative[k] - base));
    return worst;
}

double ibssf_check(const Trajectory& traj, const ExtendedKFunction& alpha, const LegendreFenchelPair& gamma,
                   double lambda) {
    if (!(lambda > 0.0)) throw ParameterError("ibssf_check: lambda must be positive");
    if (traj.size() == 0) throw std::invalid_argument("ibssf_check: empty trajectory");
    double ia = 0.0, ig = 0.0;
    auto gd = [&](std::size_t k) { return traj.d[k].size() ? gamma.gamma(traj.d[k].norm() / lambda) : 0.0; };
    for (std::size_t k = 1; k < traj.size(); ++k) {
        const double dt = traj.times[k] - traj.times[k - 1];
        ia += 0.5 * dt * (alpha(traj.h_values[k - 1]) + alpha(traj.h_values[k]));
        ig += 0.5 * dt * (gd(k - 1) + gd(k));
    }
    return traj.h_values.back() + ia + 0.5 * lambda * ig;
}

std::vector<Perturbation> standard_perturbations(int m2, double T) {
    const Vec one = Vec::Ones(m2);
    const double t0 = 0.25 * T, t1 = 0.5 * T;
    return {
        {"constant", [one](double) { return one; }},
        {"step", [one, t0, t1](double t) { return Vec((t >= t0 && t < t1) ? one : Vec::Zero(one.size())); }},
        {"sine", [one](double t) { return Vec(std::sin(2.0 * t) * one); }},
        {"decay", [one](double t) { return Vec(std::exp(-t) * one); }},
    };
}

ProbeReport optimality_probe(const ClosedLoop& loop, const CostSpec& cost, const Vec& x0, const SimConfig& cfg,
                             const std::vector<Perturbation>& family, const std::vector<double>& amplitudes) {
    ProbeReport rep;
    rep.J_star = evaluate_cost(integrate_ode(loop, x0, cfg), cost).value;
    for (const Perturbation& p : family) {
        for (double eps : amplitudes) {
            ClosedLoop pert = loop;
            pert.control = [ctrl = loop.control, delta = p.delta, eps](const Vec& x, double t) {
                return Vec(ctrl(x, t) + eps * delta(t));
            };
            const Trajectory tr = integrate_ode(pert, x0, cfg);
            ProbeCase c{p.name, eps, evaluate_cost(tr, cost).value, 0.0};
            if (tr.escape_time) c.J = cost.maximize ? -kInf : kInf;
            c.margin = cost.maximize ? rep.J_star - c.J : c.J - rep.J_star;
            rep.worst_margin = std::min(rep.worst_margin, c.margin);
            rep.cases.push_back(c);
        }
    }
    rep.pass = rep.worst_margin >= -1e-6;
    return rep;
}

MonteCarloReport monte_carlo_cost(const ClosedLoop& loop, const CovarianceSchedule& cov, const Vec& x0,
                                  const CostSpec& cost, const SimConfig& cfg) {
    cfg.validate();
    MonteCarloReport rep;
    double mean = 0.0, m2 = 0.0;
    for (int p = 0; p < cfg.paths; ++p) {
        const Trajectory tr = integrate_sde_path(loop, cov, x0, cfg, static_cast<std::uint64_t>(p));
        if (tr.escape_time) {
            ++rep.escaped;
            continue;
        }
        const double v = evaluate_cost(tr, cost).value;
        ++rep.paths;
        const double delta = v - mean;
        mean += delta / static_cast<double>(rep.paths);
        m2 += delta * (v - mean);
    }
    rep.mean = mean;
    if (rep.paths > 1) rep.std_error = std::sqrt(m2 / static_cast<double>(rep.paths - 1) / static_cast<double>(rep.paths));
    return rep;
}

void write_csv(const Trajectory& traj, std::ostream& os) {
    if (traj.size() == 0) return;
    const auto n = traj.states.front().size();
    const auto m = traj.u.front().size();
    const auto m0 = traj.u0.front().size();
    const auto md = traj.d.front().size();
    os << "t";
    for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
    for (Eigen::Index i = 1; i <= m; ++i) os << ",u" << i;
    for (Eigen::Index i = 1; i <= m0; ++i) os << ",u0_" << i;
    for (Eigen::Index i = 1; i <= md; ++i) os << ",d" << i;
    os << ",h,running_cost\n";
    os << std::setprecision(17);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        os << traj.times[k];
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << traj.states[k](i);
        for (Eigen::Index i = 0; i < m; ++i) os << ',' << traj.u[k](i);
        for (Eigen::Index i = 0; i < m0; ++i) os << ',' << traj.u0[k](i);
        for (Eigen::Index i = 0; i < md; ++i) os << ',' << traj.d[k](i);
        os << ',' << traj.h_values[k] << ',' << (k < traj.running_cost.size() ? traj.running_cost[k] : 0.0) << '\n';
    }
}

}  // namespace safety
