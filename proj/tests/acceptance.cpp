// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include "safety/scenarios.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace safety;
using test_util::uniform;
using test_util::uniform_vec;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

ScenarioParams params(std::initializer_list<std::pair<const char*, std::string>> kv) {
    ScenarioParams p;
    for (const auto& [k, v] : kv) p.set(k, v);
    return p;
}

const Trajectory& trajectory(const ScenarioResult& r, const std::string& name) {
    for (const auto& [n, t] : r.trajectories)
        if (n == name) return t;
    throw std::runtime_error("no trajectory " + name);
}

double trapz(const std::vector<double>& t, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) s += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
    return s;
}

SimConfig config(double dt, double T) {
    SimConfig c;
    c.dt = dt;
    c.T = T;
    return c;
}

NominalController constant(const Vec& u0) {
    return [u0](const Vec&, double) { return u0; };
}

WeightFn constant_weight(const Mat& R) {
    return [R](const Vec&, const Vec&) { return R; };
}

Mat planar_weight() { return (Mat(2, 2) << 2.0, 0.5, 0.5, 1.0).finished(); }

// x' = u + (1 + x^2) d, h = -x
DssfCbfSpec disturbed_scalar(double u0) {
    return {scalar_system([](const Vec& x) { return mat1(1.0 + x(0) * x(0)); }), minus_x(), KFunction::identity(),
            ExtendedKFunction::identity(), constant(vec1(u0))};
}

DssfCbfSpec planar(const Vec& u0) {
    return {test_util::planar_system(), test_util::quadratic_barrier(true), KFunction::power(2.0),
            ExtendedKFunction::linear(2.0), constant(u0)};
}

StochSpec planar_stoch(const Vec& u0, double beta) {
    return StochSpec{test_util::planar_system(), test_util::quadratic_barrier(true), ExtendedKFunction::linear(2.0),
                     constant(u0), LegendreFenchelPair::quadratic(0.25), constant_weight(planar_weight()), beta,
                     false};
}

// ------------------------------------------------------------------ criteria

Outcome intro_optimal_cost() {
    Outcome o;
    const Stopwatch sw;
    const ScenarioResult r = run_scenario(
        "intro-qp-optimal", params({{"x0", "-1"}, {"u0", "const:1"}, {"dt", "1e-4"}, {"T", "10"}}));
    const double secs = sw.seconds();
    const double J = evaluate_cost(trajectory(r, "trajectory"), cost_integrator_min()).value;
    o.detail << "J = " << J << ", runtime " << secs << " s";
    o.require(std::abs(J - -1.0) <= 0.01, "J within 0.01 of x0 = -1");
    o.require(secs < 5.0, "runtime < 5 s");
    return o;
}

Outcome dssf_bound() {
    Outcome o;
    const Stopwatch sw;
    const ScenarioResult r =
        run_scenario("ex1-dssf", params({{"x0", "-1"}, {"rho", "identity"}, {"alpha", "identity"},
                                         {"disturbance", "sine:0.5"}, {"T", "20"}}));
    const double secs = sw.seconds();
    const Trajectory& tr = trajectory(r, "trajectory");
    const DssfReport rep = certify_dssf_bound(tr, ExtendedKFunction::identity(), KFunction::identity());
    // the explicit comparison curve for rho = alpha = id and |d| <= 0.5
    double worst = kInf;
    for (std::size_t k = 0; k < tr.size(); ++k)
        worst = std::min(worst, std::exp(-tr.times[k]) * -1.0 + 0.5 - tr.states[k](0));
    o.detail << "min margin " << rep.min_margin << ", explicit margin " << worst << ", T = " << tr.times.back()
             << ", runtime " << secs << " s";
    o.require(rep.min_margin >= -1e-4, "certified margin >= -1e-4");
    o.require(worst >= -1e-4, "x(t) <= e^-t x0 + 0.5");
    o.require(std::abs(tr.times.back() - 20.0) < 1e-9, "full horizon");
    o.require(secs < 5.0, "runtime < 5 s");
    return o;
}

Outcome worst_case_attenuation() {
    Outcome o;
    const double lambda = 1.0;
    const WorstCaseExample ex = make_worst_case_example(2.0, lambda, ExtendedKFunction::linear(10.0), "alpha", "worst");
    const Trajectory tr = integrate_ode(ex.loop, vec1(-1.0), config(1e-4, 10.0));
    std::vector<double> xs, d2;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        xs.push_back(tr.states[k](0));
        d2.push_back(tr.d[k](0) * tr.d[k](0));
    }
    const double lhs = xs.back() + trapz(tr.times, xs);
    const double rhs = trapz(tr.times, d2) / (2.0 * lambda);
    o.detail << "x(T) + int x = " << lhs << ", (1/2 lambda) int d^2 = " << rhs;
    o.require(lhs <= rhs + 1e-3, "attenuation inequality");
    o.require(!tr.escape_time, "no escape");
    return o;
}

Outcome cost_invariance() {
    Outcome o;
    double worst = 0.0;
    for (double beta : {2.0, 3.0})
        for (double lambda : {1.0, 2.0}) {
            const WorstCaseExample ex =
                make_worst_case_example(beta, lambda, ExtendedKFunction::linear(10.0), "alpha", "worst");
            const Trajectory tr = integrate_ode(ex.loop, vec1(-1.0), config(1e-4, 10.0));
            const double dev = cost_invariance_check(tr, cost_general_game(ex.io));
            worst = std::max(worst, dev);
            o.require(dev <= 1e-3, "invariance at beta " + std::to_string(beta) + ", lambda " + std::to_string(lambda));
        }
    o.detail << "max deviation " << worst << " over the 2x2 grid";
    return o;
}

Outcome optimality_probes() {
    Outcome o;
    const SimConfig cfg = config(1e-3, 10.0);
    const std::vector<Perturbation> family = standard_perturbations(1, cfg.T);

    const DssfCbfSpec intro{scalar_system({}), minus_x(), KFunction::identity(), ExtendedKFunction::identity(),
                            constant(vec1(1.0))};
    const ClosedLoop intro_loop{intro.sys, intro.bf,
                                [intro](const Vec& x, double t) { return inverse_optimal_qp(intro, 2.0, x, t); },
                                intro.u0, {}};
    const ProbeReport a =
        optimality_probe(intro_loop, cost_integrator_min(), vec1(-1.0), cfg, family, standard_amplitudes());

    const WorstCaseExample ex = make_worst_case_example(2.0, 1.0, ExtendedKFunction::linear(10.0), "alpha", "worst");
    const ProbeReport b = optimality_probe(ex.loop, cost_general_game(ex.io), vec1(-1.0), cfg, family,
                                           standard_amplitudes());
    o.detail << "cases " << a.cases.size() << " + " << b.cases.size() << ", worst margins " << a.worst_margin << ", "
             << b.worst_margin;
    o.require(a.cases.size() == 16 && b.cases.size() == 16, "4 shapes x 4 amplitudes");
    o.require(a.worst_margin >= -1e-6, "integrator example");
    o.require(b.worst_margin >= -1e-6, "worst-case example");
    return o;
}

Outcome residuals() {
    Outcome o;
    double worst = 0.0;
    auto track = [&](double r, double tol, const std::string& what) {
        worst = std::max(worst, std::abs(r));
        if (!(std::abs(r) <= tol)) o.require(false, what);
    };
    // alternate a closed-form pair with the quartic mix, whose transform goes through quadrature
    const LegendreFenchelPair cubic = LegendreFenchelPair::power(3.0), quartic = test_util::quartic_mix();
    for (double beta : {2.0, 3.0})
        for (double lambda : {1.0, 2.0}) {
            const InverseOptimalSpec scalar = make_worst_case_example(beta, lambda, ExtendedKFunction::identity(),
                                                                      "alpha", "worst").io;
            for (int i = 0; i < 1000; ++i) {
                const LegendreFenchelPair& g = i % 2 == 0 ? quartic : cubic;
                track(hji_residual(scalar, vec1(uniform(-2.0, 2.0)), 0.0), 1e-9, "scalar HJI");

                const Vec x = uniform_vec(3, -2.0, 2.0), u0 = uniform_vec(2, -2.0, 2.0);
                const InverseOptimalSpec pl = make_inverse_optimal(planar(u0), beta, lambda, g,
                                                                   constant_weight(planar_weight()));
                track(hji_residual(pl, x, 0.0), 1e-9, "planar HJI");

                const StochSpec lb = make_log_barrier_example(beta, false, 1.0);
                track(hjb_residual(lb, vec1(uniform(-3.0, 0.95)), 0.0), 1e-9, "log-barrier HJB");

                StochSpec ps = planar_stoch(u0, beta);
                ps.gamma2 = g;
                track(hjb_residual(ps, x, 0.0), 1e-9, "planar HJB");
                track(nssf_hji_residual(NssfSpec{ps, KFunction::identity(), g, lambda}, x, 0.0), 1e-9,
                      "planar noise-to-state HJI");

                const NssfSpec cb = make_cubic_barrier_example(KFunction::identity(), [](double) { return 0.0; }, beta,
                                                              lambda);
                track(nssf_hji_residual(cb, vec1(uniform(-2.0, 2.0)), 0.0), 1e-9, "cubic-barrier HJI");
            }
        }

    // independent check: the Hamiltonian maximized over u by Brent's method is zero at the closed-form control
    double brent_worst = 0.0;
    for (double beta : {2.0, 3.0})
        for (int i = 0; i < 50; ++i) {
            const StochSpec s = make_log_barrier_example(beta, false, 1.0);
            const Vec x = vec1(uniform(-3.0, 0.9));
            const double l = stoch_state_penalty(s, x, 0.0);
            const Vec u0 = s.u0(x, 0.0);
            const double R = s.R2(x, u0)(0, 0);
            auto H = [&](double u) {
                const double Lh = generator_value(s.sys, s.bf, x, vec1(u), mat1(1.0));
                return 2.0 * beta * Lh + l - beta * beta * s.gamma2.gamma(2.0 * std::sqrt(R) * std::abs(u - u0(0)) / beta);
            };
            const double us = stoch_inverse_optimal(s, x, 0.0)(0);
            const auto [umax, neg] = test_util::brent_min([&](double u) { return -H(u); }, us - 20.0, us + 20.0);
            brent_worst = std::max({brent_worst, std::abs(neg), std::abs(umax - us) / (1.0 + std::abs(us))});
            o.require(std::abs(-neg) <= 1e-9 && std::abs(umax - us) <= 1e-6 * (1.0 + std::abs(us)), "HJB maximum");
        }
    // and the deterministic saddle: max over u, min over d
    for (double beta : {2.0, 3.0})
        for (double lambda : {1.0, 2.0})
            for (int i = 0; i < 25; ++i) {
                const InverseOptimalSpec io = make_worst_case_example(beta, lambda, ExtendedKFunction::identity(),
                                                                      "alpha", "worst").io;
                const CostSpec cost = cost_general_game(io);
                const Vec x = vec1(uniform(-2.0, 2.0));
                const Vec u0 = io.base.u0(x, 0.0);
                const Vec ds = worst_case_disturbance(io, x), us = inverse_optimal_general(io, x, 0.0);
                const LieData ld = lie_data(io.base.sys, io.base.bf, x);
                auto G = [&](double u, double d) {
                    const double hdot = ld.Lfh + ld.Lg2h(0) * u + ld.Lg1h(0) * d;
                    return 2.0 * beta * hdot + cost.running(x, vec1(u), u0, vec1(d), 0.0);
                };
                const auto [umax, gu] = test_util::brent_min([&](double u) { return -G(u, ds(0)); }, us(0) - 50, us(0) + 50);
                const auto [dmin, gd] = test_util::brent_min([&](double d) { return G(us(0), d); }, ds(0) - 50, ds(0) + 50);
                brent_worst = std::max({brent_worst, std::abs(gu), std::abs(gd)});
                o.require(std::abs(umax - us(0)) <= 1e-6 * (1 + std::abs(us(0))) &&
                              std::abs(dmin - ds(0)) <= 1e-6 * (1 + std::abs(ds(0))),
                          "saddle location");
                o.require(std::abs(gu) <= 1e-9 && std::abs(gd) <= 1e-9, "saddle value");
            }
    o.detail << "max |residual| " << worst << " over 6 systems x 4 grid points x 1000 points; Brent checks " << brent_worst;
    return o;
}

Outcome qp_oracle() {
    Outcome o;
    double worst = 0.0;
    // KKT oracle: least-norm solution of L v = -omega when the constraint binds
    auto kkt = [&](const DssfCbfSpec& s, const Vec& x) {
        const LieData ld = lie_data(s.sys, s.bf, x);
        const double omega = omega_dssf(s, x, 0.0);
        const Vec oracle = omega >= 0.0 ? Vec::Zero(s.sys.m2)
                                        : Vec(ld.Lg2h.completeOrthogonalDecomposition().solve(Vec::Constant(1, -omega)));
        const double e = (qp_filter(s, x, 0.0) - oracle).norm();
        worst = std::max(worst, e);
        return e <= 1e-8;
    };
    int bad = 0;
    for (int i = 0; i < 500; ++i) {
        if (!kkt(planar(uniform_vec(2, -3.0, 3.0)), uniform_vec(3, -2.0, 2.0))) ++bad;
        if (!kkt(disturbed_scalar(uniform(-3.0, 3.0)), vec1(uniform(-2.0, 0.0)))) ++bad;
    }
    o.require(bad == 0, std::to_string(bad) + " filter points off the KKT oracle");

    // projection against a grid minimizer on the unit ball
    const BarrierFunction ball([](const Vec& t) { return 1.0 - t.squaredNorm(); },
                               [](const Vec& t) { return RowVec(-2.0 * t.transpose()); });
    double grid_gap = 0.0;
    int pbad = 0;
    for (int i = 0; i < 500; ++i) {
        const double r = 0.6 + 0.4 * std::sqrt(uniform(0.0, 1.0)), a = uniform(0.0, 2.0 * M_PI);
        const Vec th = (Vec(2) << r * std::cos(a), r * std::sin(a)).finished();
        const Vec u0 = uniform_vec(2, -3.0, 3.0);
        const ProjectionSpec s{ball, ExtendedKFunction::identity(), [u0](const Vec&, const Vec&, double) { return u0; },
                               2.0};
        const Vec v = qp_projection(s, th, u0);
        const RowVec g = ball.gradient(th);
        const double slack = g.dot(u0) + s.alpha(ball(th));
        // brute-force grid over a box that contains the minimizer
        const double R = v.norm() + 0.5, step = 2.0 * R / 400;
        double best = kInf;
        for (int p = 0; p <= 400; ++p)
            for (int q = 0; q <= 400; ++q) {
                const double w0 = -R + p * step, w1 = -R + q * step;
                if (slack + g(0) * w0 + g(1) * w1 >= 0.0) best = std::min(best, std::hypot(w0, w1));
            }
        grid_gap = std::max(grid_gap, best - v.norm());
        // no grid point beats the projection, the projection is feasible, and the grid gets within one cell
        if (!(v.norm() <= best + 1e-12 && slack + g.dot(v) >= -1e-12 && best - v.norm() <= step * std::sqrt(2.0))) ++pbad;
        // the same closed form through the KKT oracle
        const Vec oracle = slack >= 0.0 ? Vec::Zero(2) : Vec(-slack * g.transpose() / g.squaredNorm());
        if ((v - oracle).norm() > 1e-8) ++pbad;
        worst = std::max(worst, (v - oracle).norm());
    }
    o.require(pbad == 0, std::to_string(pbad) + " projection points off the grid or KKT oracle");
    o.detail << "max KKT deviation " << worst << ", max grid gap " << grid_gap;
    return o;
}

Outcome legendre_young() {
    Outcome o;
    const LegendreFenchelPair pairs[] = {LegendreFenchelPair::quadratic(1.0), LegendreFenchelPair::quadratic(0.25),
                                         LegendreFenchelPair::power(3.0), LegendreFenchelPair::power(1.5),
                                         test_util::quartic_mix()};
    double dual_err = 0.0, min_gap = kInf, eq_gap = 0.0;
    for (const auto& p : pairs) {
        const LegendreFenchelPair d = p.dual();
        for (double r = 1e-3; r <= 1e2; r *= 1.25) dual_err = std::max(dual_err, std::abs(d.ell(r) - p.gamma(r)) / (1.0 + p.gamma(r)));
        for (int i = 0; i < 500; ++i) {
            const int n = 1 + i % 4;
            const Vec x = uniform_vec(n, -2.0, 2.0), y = uniform_vec(n, -5.0, 5.0);
            min_gap = std::min(min_gap, young_gap(x, y, p));
            // equality when y = gamma'(|x|) x / |x|
            eq_gap = std::max(eq_gap, std::abs(young_gap(x, p.gamma_prime(x.norm()) * x / x.norm(), p)));
        }
    }
    const LegendreFenchelPair sq = LegendreFenchelPair::quadratic(1.0);
    bool exact = true;
    for (double r = 0.0; r <= 50.0; r += 0.37) exact = exact && sq.ell(2.0 * r) == r * r;
    o.detail << "max double-transform error " << dual_err << ", min Young gap " << min_gap << ", max gap at equality "
             << eq_gap;
    o.require(dual_err <= 1e-6, "double transform");
    o.require(min_gap >= -1e-10, "Young gap nonnegative");
    o.require(eq_gap <= 1e-9, "Young equality");
    o.require(exact, "ell(2r) = r^2 for gamma = r^2");
    return o;
}

Outcome activation_threshold() {
    Outcome o;
    const double thr = 1.0 - std::sqrt(std::exp(1.0));
    const StochSpec s = make_log_barrier_example(2.0, false, 1.0);
    int idle_bad = 0, active_bad = 0;
    for (int i = 0; i <= 2000; ++i) {
        const double lo = -3.0 + (thr - 1e-9 + 3.0) * i / 2000.0;
        if (stoch_qp_filter(s, vec1(lo), 0.0)(0) != 0.0) ++idle_bad;
        const double hi = thr + 1e-9 + (0.99 - thr - 1e-9) * i / 2000.0;
        if (!(stoch_qp_filter(s, vec1(hi), 0.0)(0) < 0.0)) ++active_bad;
    }
    o.detail << "threshold 1 - sqrt(e) = " << thr << ", idle violations " << idle_bad << ", active violations "
             << active_bad;
    o.require(idle_bad == 0, "zero below the threshold");
    o.require(active_bad == 0, "negative above the threshold");
    return o;
}

Outcome mean_value_function() {
    Outcome o;
    const Stopwatch sw;
    const ScenarioResult r = run_scenario(
        "ex5-stoch", params({{"x0", "-0.5"}, {"beta", "2"}, {"paths", "10000"}, {"T", "2"}, {"dt", "1e-3"}}));
    const double secs = sw.seconds();
    const double mean = r.values.at("mc.mean"), se = r.values.at("mc.std_error");
    const double expected = 2.0 * 2.0 * std::log(1.0 - -0.5);
    o.detail << "mean " << mean << " +- " << se << " vs 2 beta h(x0) = " << expected << ", runtime " << secs << " s";
    o.require(r.values.at("mc.paths") == 10000.0, "10^4 paths");
    o.require(std::abs(mean - expected) <= 3.0 * se, "within 3 standard errors");
    o.require(secs < 60.0, "runtime < 60 s");
    return o;
}

Outcome finite_escape() {
    Outcome o;
    const ScenarioResult r = run_scenario("blowup", params({{"x0", "-1"}}));
    const auto& esc = trajectory(r, "trajectory").escape_time;
    o.require(esc.has_value(), "escape detected");
    if (esc) {
        o.detail << "escape_time " << *esc << " (analytic 0.5)";
        o.require(*esc >= 0.45 && *esc <= 0.55, "escape time in [0.45, 0.55]");
    }
    return o;
}

Outcome sandwich() {
    Outcome o;
    const ScenarioResult r = run_scenario("sandwich-scalar", params({{"T", "10"}, {"amplitude", "0.3"}}));
    double worst = kInf;
    for (const char* tag : {"disturbed", "disturbance_free"})
        for (const char* side : {"lower_margin", "upper_margin"}) {
            const double m = r.values.at(std::string(tag) + "." + side);
            worst = std::min(worst, m);
            o.require(m >= -1e-4, std::string(tag) + " " + side);
        }
    o.detail << "min margin " << worst << " over both runs and both sides";
    return o;
}

Outcome projection_suite() {
    Outcome o;
    const ScenarioResult r = run_scenario("proj-ball", ScenarioParams{});
    const double agree = r.values.at("boundary_agreement");
    o.require(agree <= 1e-12, "boundary agreement");
    const double g[] = {r.values.at("epsilon_gap.1"), r.values.at("epsilon_gap.0.5"), r.values.at("epsilon_gap.0.1"),
                        r.values.at("epsilon_gap.0.01")};
    o.require(g[0] > g[1] && g[1] > g[2] && g[2] > g[3], "epsilon family strictly decreasing");
    const double mc = r.values.at("classic.min_h"), mq = r.values.at("qp.min_h"),
                 mi = r.values.at("inverse_optimal.min_h");
    o.require(mc >= -1e-8 && mq >= -1e-8 && mi >= -1e-8, "unit ball invariant");
    o.detail << "agreement " << agree << ", gaps " << g[0] << " > " << g[1] << " > " << g[2] << " > " << g[3]
             << ", min h classic " << mc << " qp " << mq << " inverse-optimal " << mi;
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"integrator example optimal cost equals x0", intro_optimal_cost},
        {"disturbance-to-state bound", dssf_bound},
        {"worst-case attenuation", worst_case_attenuation},
        {"cost invariance on the beta-lambda grid", cost_invariance},
        {"optimality probes", optimality_probes},
        {"HJI and HJB residuals", residuals},
        {"QP closed forms against KKT and grid oracles", qp_oracle},
        {"Legendre-Fenchel and Young inequality", legendre_young},
        {"stochastic activation threshold", activation_threshold},
        {"Monte Carlo mean value function", mean_value_function},
        {"finite escape time", finite_escape},
        {"two-sided sandwich bounds", sandwich},
        {"parameter projection suite", projection_suite},
    };
    int failed = 0, n = 0;
    for (const auto& [name, run] : criteria) {
        ++n;
        Outcome out;
        const Stopwatch sw;
        try {
            out = run();
        } catch (const std::exception& e) {
            out.require(false, std::string("exception: ") + e.what());
        }
        failed += !out.pass;
        std::printf("%s %2d %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", n, name, out.detail.str().c_str(),
                    sw.seconds());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
