#include "safety/scenarios.hpp"

#include "safety/nonovershoot.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace safety {

// ---------------------------------------------------------------- params

void ScenarioParams::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string ScenarioParams::str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

namespace {

std::string field(const std::string& key) { return "field '" + key + "'"; }

double to_number(const std::string& s, const std::string& ctx) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError(ctx + ": '" + s + "' is not a number");
    }
    if (pos != s.size() || !std::isfinite(v)) throw ConfigError(ctx + ": '" + s + "' is not a finite number");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    boost::algorithm::split(out, s, [sep](char c) { return c == sep; });
    return out;
}

}  // namespace

double ScenarioParams::num(const std::string& key, double fallback) const {
    return has(key) ? to_number(values_.at(key), field(key)) : fallback;
}

long ScenarioParams::integer(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const double v = num(key, 0.0);
    if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError(field(key) + ": expected an integer");
    return static_cast<long>(v);
}

Vec ScenarioParams::vec(const std::string& key, const Vec& fallback) const {
    if (!has(key)) return fallback;
    const auto parts = split(values_.at(key), ',');
    Vec v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = to_number(boost::algorithm::trim_copy(parts[i]), field(key));
    return v;
}

std::vector<std::string> ScenarioParams::keys() const {
    std::vector<std::string> k;
    for (const auto& kv : values_) k.push_back(kv.first);
    return k;
}

ScenarioParams parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }
    ScenarioParams p;
    for (const auto& [key, node] : tree) {
        if (!node.empty()) throw ConfigError("section [" + key + "]: sections are not supported");
        const std::string value = node.data();
        if (value.empty()) throw ConfigError(field(key) + ": empty value");
        p.set(key, value);
    }
    return p;
}

// ---------------------------------------------------------------- named constructors

ExtendedKFunction parse_alpha(const std::string& s) {
    const auto a = split(s, ':');
    if (s == "identity") return ExtendedKFunction::identity();
    if (a.size() == 2 && a[0] == "linear") {
        const double k = to_number(a[1], "alpha");
        if (!(k > 0.0)) throw ConfigError("alpha: linear gain must be positive");
        return ExtendedKFunction::linear(k);
    }
    if ((a.size() == 2 || a.size() == 3) && a[0] == "odd_power") {
        const double p = to_number(a[1], "alpha");
        const double c = a.size() == 3 ? to_number(a[2], "alpha") : 1.0;
        if (!(p > 0.0) || !(c > 0.0)) throw ConfigError("alpha: odd_power needs p > 0 and scale > 0");
        return ExtendedKFunction::odd_power(p, c);
    }
    throw ConfigError("alpha: unknown constructor '" + s + "'");
}

KFunction parse_k(const std::string& s) {
    const auto a = split(s, ':');
    if (s == "identity") return KFunction::identity();
    if (a.size() == 2 && a[0] == "linear") {
        const double k = to_number(a[1], "class-K function");
        if (!(k > 0.0)) throw ConfigError("class-K function: linear gain must be positive");
        return KFunction::linear(k);
    }
    if ((a.size() == 2 || a.size() == 3) && a[0] == "power") {
        const double p = to_number(a[1], "class-K function");
        const double c = a.size() == 3 ? to_number(a[2], "class-K function") : 1.0;
        if (!(p > 0.0) || !(c > 0.0)) throw ConfigError("class-K function: power needs p > 0 and c > 0");
        return KFunction::power(p, c);
    }
    throw ConfigError("class-K function: unknown constructor '" + s + "'");
}

LegendreFenchelPair parse_gamma(const std::string& s) {
    const auto a = split(s, ':');
    if (a[0] == "quadratic" && a.size() <= 2) {
        const double c = a.size() == 2 ? to_number(a[1], "gamma") : 1.0;
        if (!(c > 0.0)) throw ConfigError("gamma: quadratic coefficient must be positive");
        return LegendreFenchelPair::quadratic(c);
    }
    if (a.size() == 2 && a[0] == "power") {
        const double p = to_number(a[1], "gamma");
        if (!(p > 1.0)) throw ConfigError("gamma: power exponent must exceed 1");
        return LegendreFenchelPair::power(p);
    }
    throw ConfigError("gamma: unknown constructor '" + s + "'");
}

std::function<double(double)> parse_signal(const std::string& s) {
    const auto a = split(s, ':');
    if (s == "zero") return [](double) { return 0.0; };
    if (a.size() == 2 && a[0] == "const") {
        const double c = to_number(a[1], "signal");
        return [c](double) { return c; };
    }
    if ((a.size() == 2 || a.size() == 3) && a[0] == "sine") {
        const double amp = to_number(a[1], "signal");
        const double w = a.size() == 3 ? to_number(a[2], "signal") : 1.0;
        return [amp, w](double t) { return amp * std::sin(w * t); };
    }
    throw ConfigError("signal: unknown constructor '" + s + "'");
}

// ---------------------------------------------------------------- results

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void ScenarioResult::put(const std::string& key, double v) {
    values[key] = v;
    report.emplace_back(key, fmt(v));
}

void ScenarioResult::put(const std::string& key, const std::string& v) { report.emplace_back(key, v); }

void ScenarioResult::certify(const std::string& name, bool pass) {
    certifications.push_back({name, pass});
    report.emplace_back("cert." + name, pass ? "PASS" : "FAIL");
}

bool ScenarioResult::all_pass() const {
    return std::all_of(certifications.begin(), certifications.end(), [](const Certification& c) { return c.pass; });
}

void write_report(const ScenarioResult& r, std::ostream& os) {
    for (const auto& [k, v] : r.report) os << k << " = " << v << '\n';
    os << "status = " << (r.all_pass() ? "PASS" : "FAIL") << '\n';
}

// ---------------------------------------------------------------- shared builders

namespace {

}  // namespace

ControlAffineSystem scalar_system(MatrixField g1) {
    ControlAffineSystem s;
    s.n = 1;
    s.m1 = g1 ? 1 : 0;
    s.m2 = 1;
    s.f = [](const Vec&) { return Vec::Zero(1); };
    s.g1 = std::move(g1);
    s.g2 = [](const Vec&) { return mat1(1.0); };
    return s;
}

BarrierFunction minus_x() {
    return BarrierFunction([](const Vec& x) { return -x(0); }, [](const Vec&) { return RowVec::Constant(1, -1.0); },
                           [](const Vec&) { return mat1(0.0); });
}

namespace {

MatrixField one_plus_x2() {
    return [](const Vec& x) { return mat1(1.0 + x(0) * x(0)); };
}

// const:c | linear:k | cubic
std::function<double(double)> parse_scalar_law(const std::string& s, const std::string& ctx) {
    const auto a = split(s, ':');
    if (s == "cubic") return [](double x) { return x * x * x; };
    if (a.size() == 2 && a[0] == "const") {
        const double c = to_number(a[1], ctx);
        return [c](double) { return c; };
    }
    if (a.size() == 2 && a[0] == "linear") {
        const double k = to_number(a[1], ctx);
        return [k](double x) { return k * x; };
    }
    throw ConfigError(ctx + ": unknown nominal law '" + s + "'");
}

SimConfig sim_config(const ScenarioParams& p, double dt, double T, long paths = 1, long seed = 0) {
    SimConfig c;
    c.dt = p.num("dt", dt);
    c.T = p.num("T", T);
    c.paths = static_cast<int>(p.integer("paths", paths));
    c.seed = static_cast<std::uint64_t>(p.integer("seed", seed));
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

double scalar_x0(const ScenarioParams& p, double fallback) { return p.num("x0", fallback); }

void put_traj(ScenarioResult& r, const std::string& prefix, const Trajectory& tr) {
    r.put(prefix + ".samples", static_cast<double>(tr.size()));
    r.put(prefix + ".x_final", tr.states.back()(0));
    r.put(prefix + ".h_min", *std::min_element(tr.h_values.begin(), tr.h_values.end()));
    r.put(prefix + ".escape_time", tr.escape_time ? fmt(*tr.escape_time) : std::string("none"));
}

// ---------------------------------------------------------------- scenarios

template <class F>
auto guarded(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const ParameterError& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

ScenarioResult intro_common(const ScenarioParams& p, bool sontag) {
    ScenarioResult r;
    const double x0 = scalar_x0(p, -1.0);
    const auto u0f = parse_scalar_law(p.str("u0", "const:1"), "u0");
    const SimConfig cfg = sim_config(p, 1e-4, 10.0);
    NominalController u0 = [u0f](const Vec& x, double) { return vec1(u0f(x(0))); };
    DssfCbfSpec spec{scalar_system({}), minus_x(), KFunction::identity(), ExtendedKFunction::identity(), u0};
    Controller ctrl;
    if (sontag) {
        ctrl = [spec](const Vec& x, double t) { return Vec(spec.u0(x, t) + sontag_filter(spec, x, t, true)); };
    } else {
        ctrl = [spec](const Vec& x, double t) { return inverse_optimal_qp(spec, 2.0, x, t); };
    }
    ClosedLoop loop{spec.sys, spec.bf, ctrl, u0, {}};
    const CostSpec cost = sontag ? cost_integrator_sontag() : cost_integrator_min();
    Trajectory tr = integrate_ode(loop, vec1(x0), cfg);
    const CostResult c = attach_cost(tr, cost);
    SimConfig cfg2 = cfg;
    cfg2.T = 2.0 * cfg.T;
    const double c2 = evaluate_cost(integrate_ode(loop, vec1(x0), cfg2), cost).value;
    put_traj(r, "traj", tr);
    r.put("cost.selector", cost.selector);
    r.put("cost.value", c.value);
    r.put("cost.expected", x0);
    r.put("cost.value_2T", c2);
    const DssfReport d = certify_dssf_bound(tr, spec.alpha, spec.rho);
    r.put("dssf.min_margin", d.min_margin);
    r.certify("cost_equals_x0", std::abs(c.value - x0) <= 0.01);
    r.certify("cost_tail_converged", std::abs(c2 - c.value) <= 1e-3);
    r.certify("dssf", d.pass);
    r.trajectories.emplace_back("trajectory", std::move(tr));
    return r;
}

ScenarioResult ex1_common(const ScenarioParams& p, double beta) {
    ScenarioResult r;
    const double x0 = scalar_x0(p, -1.0);
    const auto u0f = parse_scalar_law(p.str("u0", "const:0"), "u0");
    const KFunction rho = parse_k(p.str("rho", "identity"));
    const ExtendedKFunction alpha = parse_alpha(p.str("alpha", "identity"));
    const auto dist = parse_signal(p.str("disturbance", "sine:0.5"));
    const SimConfig cfg = sim_config(p, 1e-3, 20.0);
    NominalController u0 = [u0f](const Vec& x, double) { return vec1(u0f(x(0))); };
    DssfCbfSpec spec{scalar_system(one_plus_x2()), minus_x(), rho, alpha, u0};
    Controller ctrl = [spec, beta](const Vec& x, double t) {
        return beta == 1.0 ? Vec(spec.u0(x, t) + qp_filter(spec, x, t)) : inverse_optimal_qp(spec, beta, x, t);
    };
    ClosedLoop loop{spec.sys, spec.bf, ctrl, u0, [dist](const Vec&, double t) { return vec1(dist(t)); }};
    Trajectory tr = integrate_ode(loop, vec1(x0), cfg);
    put_traj(r, "traj", tr);
    const DssfReport d = certify_dssf_bound(tr, alpha, rho);
    r.put("dssf.min_margin", d.min_margin);
    if (beta != 1.0) {
        const CostResult c = attach_cost(tr, guarded("beta", [&] { return cost_qp_game(spec, beta, 1.0); }));
        r.put("cost.selector", "qp-game");
        r.put("cost.value", c.value);
    }
    r.certify("no_escape", !tr.escape_time.has_value());
    r.certify("dssf", d.pass);
    r.trajectories.emplace_back("trajectory", std::move(tr));
    return r;
}

ScenarioResult run_blowup(const ScenarioParams& p) {
    ScenarioResult r;
    const double x0 = scalar_x0(p, -1.0);
    if (!(x0 < 0.0)) throw ConfigError(field("x0") + ": the blow-up example needs x0 < 0");
    const SimConfig cfg = sim_config(p, 1e-3, 1.0);
    NominalController u0 = [](const Vec& x, double) { return vec1(x(0) * x(0) * x(0)); };
    DssfCbfSpec spec{scalar_system({}), minus_x(), KFunction::identity(), ExtendedKFunction::identity(), u0};
    Controller ctrl = [spec](const Vec& x, double t) { return Vec(spec.u0(x, t) + qp_filter(spec, x, t)); };
    Trajectory tr = integrate_ode(ClosedLoop{spec.sys, spec.bf, ctrl, u0, {}}, vec1(x0), cfg);
    const double analytic = 1.0 / (2.0 * x0 * x0);
    put_traj(r, "traj", tr);
    r.put("escape_time_analytic", analytic);
    if (tr.escape_time) r.put("escape_time", *tr.escape_time);
    r.certify("finite_escape_detected", tr.escape_time && std::abs(*tr.escape_time - analytic) <= 0.1 * analytic);
    r.trajectories.emplace_back("trajectory", std::move(tr));
    return r;
}

}  // namespace

WorstCaseExample make_worst_case_example(double beta, double lambda, const ExtendedKFunction& alpha, const std::string& u0_law,
                  const std::string& disturbance) {
    NominalController u0;
    if (u0_law == "alpha") {
        u0 = [alpha](const Vec& x, double) { return vec1(alpha(-x(0))); };
    } else {
        const auto f = parse_scalar_law(u0_law, "u0");
        u0 = [f](const Vec& x, double) { return vec1(f(x(0))); };
    }
    DssfCbfSpec base{scalar_system(one_plus_x2()), minus_x(), KFunction::identity(), alpha, u0};
    WeightFn R2 = [alpha](const Vec& x, const Vec& u) {
        const double s = 1.0 + x(0) * x(0);
        return mat1(1.0 / (std::max(0.0, u(0) - alpha(-x(0))) + s * s));
    };
    InverseOptimalSpec io = guarded("beta/lambda", [&] {
        return make_inverse_optimal(base, beta, lambda, LegendreFenchelPair::quadratic(1.0), R2);
    });
    Controller ctrl = [io](const Vec& x, double t) { return inverse_optimal_general(io, x, t); };
    DisturbanceFn d;
    if (disturbance == "worst") {
        d = [io](const Vec& x, double) { return worst_case_disturbance(io, x); };
    } else {
        const auto sig = parse_signal(disturbance);
        d = [sig](const Vec&, double t) { return vec1(sig(t)); };
    }
    return WorstCaseExample{io, ClosedLoop{base.sys, base.bf, ctrl, u0, d}};
}

namespace {

ScenarioResult run_ex3(const ScenarioParams& p) {
    ScenarioResult r;
    const double beta = p.num("beta", 2.0), lambda = p.num("lambda", 1.0);
    const double x0 = scalar_x0(p, -1.0);
    const ExtendedKFunction alpha = parse_alpha(p.str("alpha", "linear:10"));
    const std::string dist = p.str("disturbance", "worst");
    const SimConfig cfg = sim_config(p, 1e-4, 10.0);
    const WorstCaseExample s = make_worst_case_example(beta, lambda, alpha, p.str("u0", "alpha"), dist);
    Trajectory tr = integrate_ode(s.loop, vec1(x0), cfg);
    put_traj(r, "traj", tr);
    const CostSpec cost = cost_general_game(s.io);
    const CostResult c = attach_cost(tr, cost);
    const double target = 2.0 * beta * (-x0);
    const double inv = cost_invariance_check(tr, cost);
    const double att = ibssf_check(tr, ExtendedKFunction::identity(), LegendreFenchelPair::quadratic(1.0), lambda);
    const double ib = ibssf_check(tr, alpha, LegendreFenchelPair::quadratic(1.0), lambda);
    r.put("cost.selector", cost.selector);
    r.put("cost.value", c.value);
    r.put("cost.expected", target);
    r.put("cost.invariance", inv);
    r.put("attenuation.margin", att);
    r.put("ibssf.margin", ib);
    r.certify("no_escape", !tr.escape_time.has_value());
    r.certify("attenuation", att >= -1e-3);
    r.certify("ibssf", ib >= -1e-4);
    if (dist == "worst") {
        r.certify("cost_equals_2beta_h0", std::abs(c.value - target) <= 0.01 * std::abs(target) + 1e-3);
        r.certify("cost_invariance", inv <= 1e-3);
    }
    r.trajectories.emplace_back("trajectory", std::move(tr));
    return r;
}

}  // namespace

// dx = u dt + (1 - x) dw, h = ln(1 - x)
StochSpec make_log_barrier_example(double beta, bool safety_only, double r2) {
    ControlAffineSystem sys;
    sys.n = 1;
    sys.m1 = 1;
    sys.m2 = 1;
    sys.f = [](const Vec&) { return Vec::Zero(1); };
    sys.g1 = [](const Vec& x) { return mat1(1.0 - x(0)); };
    sys.g2 = [](const Vec&) { return mat1(1.0); };
    BarrierFunction bf(
        [](const Vec& x) {
            if (!(x(0) < 1.0)) throw DomainError("ln(1 - x) needs x < 1");
            return std::log(1.0 - x(0));
        },
        [](const Vec& x) { return RowVec::Constant(1, -1.0 / (1.0 - x(0))); },
        [](const Vec& x) { return mat1(-1.0 / ((1.0 - x(0)) * (1.0 - x(0)))); });
    StochSpec s{sys, bf, ExtendedKFunction::identity(), [](const Vec&, double) { return vec1(0.0); },
                LegendreFenchelPair::quadratic(0.25), [r2](const Vec&, const Vec&) { return mat1(r2); }, beta,
                safety_only};
    return s;
}

namespace {

ScenarioResult run_ex5(const ScenarioParams& p) {
    ScenarioResult r;
    const double beta = p.num("beta", 2.0);
    const double r2 = p.num("r2", 1.0);
    const double x0 = scalar_x0(p, -0.5);
    if (!(x0 < 1.0)) throw ConfigError(field("x0") + ": needs x0 < 1");
    if (!(r2 > 0.0)) throw ConfigError(field("r2") + ": must be positive");
    const SimConfig cfg = sim_config(p, 1e-3, 2.0, 10000, 1);

    // activation threshold of the beta = 1 filter
    const StochSpec qp1 = make_log_barrier_example(1.0, true, r2);
    auto active = [&](double x) { return stoch_qp_filter(qp1, vec1(x), 0.0)(0) < 0.0; };
    double lo = -2.0, hi = 0.5;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (active(mid) ? hi : lo) = mid;
    }
    const double threshold = 1.0 - std::sqrt(std::exp(1.0));
    r.put("activation.threshold", hi);
    r.put("activation.expected", threshold);
    r.certify("activation_threshold", std::abs(hi - threshold) <= 1e-9);

    // Monte Carlo value of the inverse-optimal filter
    const StochSpec io = guarded("beta", [&] {
        StochSpec s = make_log_barrier_example(beta, false, r2);
        stoch_inverse_optimal(s, vec1(x0), 0.0);
        return s;
    });
    ClosedLoop loop{io.sys, io.bf, [io](const Vec& x, double t) { return stoch_inverse_optimal(io, x, t); }, io.u0, {}};
    const CovarianceSchedule unit = CovarianceSchedule::constant(mat1(1.0));
    const MonteCarloReport mc = monte_carlo_cost(loop, unit, vec1(x0), cost_stochastic_mean(io), cfg);
    const double target = 2.0 * beta * std::log(1.0 - x0);
    r.put("mc.paths", static_cast<double>(mc.paths));
    r.put("mc.escaped", static_cast<double>(mc.escaped));
    r.put("mc.mean", mc.mean);
    r.put("mc.std_error", mc.std_error);
    r.put("mc.expected", target);
    r.certify("mean_value_function", mc.escaped == 0 && std::abs(mc.mean - target) <= 3.0 * mc.std_error);

    // generator inequality under the beta = 1 filter along a few sample paths
    ClosedLoop loop1{qp1.sys, qp1.bf, [qp1](const Vec& x, double t) { return stoch_qp_filter(qp1, x, t); }, qp1.u0, {}};
    SimConfig few = cfg;
    few.paths = std::min(cfg.paths, 5);
    double worst = kInf;
    for (const Trajectory& tr : integrate_sde(loop1, unit, vec1(x0), few))
        for (std::size_t k = 0; k < tr.size(); ++k) {
            const double Lh = generator_value(qp1.sys, qp1.bf, tr.states[k], tr.u[k], mat1(1.0));
            worst = std::min(worst, Lh + qp1.alpha(tr.h_values[k]));
        }
    r.put("generator.min_margin", worst);
    r.certify("generator_inequality", worst >= -1e-8);
    Trajectory first = integrate_sde_path(loop, unit, vec1(x0), cfg, 0);
    attach_cost(first, cost_stochastic_mean(io));
    r.trajectories.emplace_back("path0", std::move(first));
    return r;
}

}  // namespace

// dx = u dt + (1 + x^2) sigma dw, h = -x^3, alpha(h) = 3h
NssfSpec make_cubic_barrier_example(const KFunction& rho, const std::function<double(double)>& u0f, double beta, double lambda) {
    ControlAffineSystem sys = scalar_system(one_plus_x2());
    BarrierFunction bf([](const Vec& x) { return -x(0) * x(0) * x(0); },
                       [](const Vec& x) { return RowVec::Constant(1, -3.0 * x(0) * x(0)); },
                       [](const Vec& x) { return mat1(-6.0 * x(0)); });
    StochSpec base{sys, bf, ExtendedKFunction::linear(3.0), [u0f](const Vec& x, double) { return vec1(u0f(x(0))); },
                   LegendreFenchelPair::quadratic(0.25), [](const Vec&, const Vec&) { return mat1(1.0); }, beta,
                   false};
    return NssfSpec{base, rho, LegendreFenchelPair::quadratic(0.25), lambda};
}

namespace {

ScenarioResult run_ex6(const ScenarioParams& p) {
    ScenarioResult r;
    const KFunction rho = parse_k(p.str("rho", "identity"));
    const auto u0f = parse_scalar_law(p.str("u0", "const:1"), "u0");
    const double sigma = p.num("sigma", 0.5);
    const double x0 = scalar_x0(p, -1.0);
    const SimConfig cfg = sim_config(p, 1e-3, 5.0, 20, 1);
    const NssfSpec ns = make_cubic_barrier_example(rho, u0f, 2.0, 1.0);

    double gap = 0.0;
    for (int i = 0; i <= 400; ++i) {
        const double x = -2.0 + 4.0 * i / 400.0;
        if (std::abs(x) < 1e-9) continue;
        const double derived = nssf_qp_filter(ns, vec1(x), 0.0)(0);
        gap = std::max(gap, std::abs(derived - cubic_barrier_shortcut_filter(x, u0f(x), rho)));
    }
    r.put("shortcut_vs_derived.max_gap", gap);
    const CovarianceReport wc = worst_case_covariance(ns, vec1(-1.0));
    r.put("worst_covariance.x=-1", wc.value(0, 0));
    r.put("worst_covariance.psd", wc.psd ? "true" : "false");

    ClosedLoop loop{ns.base.sys, ns.base.bf, [ns](const Vec& x, double t) { return nssf_qp_filter(ns, x, t); },
                    ns.base.u0, {}};
    const CovarianceSchedule cov = CovarianceSchedule::constant(mat1(sigma));
    const Mat S = mat1(sigma);
    const double fro = (S * S.transpose()).norm();
    double worst = kInf;
    long checked = 0;
    std::vector<Trajectory> paths = integrate_sde(loop, cov, vec1(x0), cfg);
    for (const Trajectory& tr : paths)
        for (std::size_t k = 0; k < tr.size(); ++k) {
            if (std::min(0.0, tr.h_values[k]) > -rho(fro)) continue;
            ++checked;
            const double Lh = generator_value(ns.base.sys, ns.base.bf, tr.states[k], tr.u[k], S);
            worst = std::min(worst, Lh + ns.base.alpha(tr.h_values[k]));
        }
    r.put("nsbfc.checked_samples", static_cast<double>(checked));
    r.put("nsbfc.min_margin", checked ? worst : 0.0);
    r.certify("nsbfc_implication", checked == 0 || worst >= -1e-8);
    r.trajectories.emplace_back("path0", std::move(paths.front()));
    return r;
}

ScenarioResult run_proj(const ScenarioParams& p) {
    ScenarioResult r;
    const Vec theta0 = p.vec("x0", Vec::Zero(2));
    const Vec u0v = p.vec("u0", Vec::Ones(2));
    if (theta0.size() != 2 || u0v.size() != 2) throw ConfigError("x0 and u0 must have two entries");
    const double beta = p.num("beta", 2.0);
    if (!(beta >= 2.0)) throw ConfigError(field("beta") + ": must be >= 2");
    const ExtendedKFunction alpha = parse_alpha(p.str("alpha", "identity"));
    const SimConfig cfg = sim_config(p, 1e-3, 5.0);
    BarrierFunction h([](const Vec& t) { return 1.0 - t.squaredNorm(); },
                      [](const Vec& t) { return RowVec(-2.0 * t.transpose()); },
                      [](const Vec& t) { return Mat(-2.0 * Mat::Identity(t.size(), t.size())); });
    if (h(theta0) < 0.0) throw ConfigError(field("x0") + ": must lie in the unit ball");
    ProjectionSpec spec{h, alpha, [u0v](const Vec&, const Vec&, double) { return u0v; }, beta};

    const Vec e1 = (Vec(2) << 1.0, 0.0).finished();
    const double agree = (classic_projection(spec, e1, u0v) - qp_projection(spec, e1, u0v)).norm();
    r.put("boundary_agreement", agree);
    r.certify("boundary_agreement", agree <= 1e-12);

    // alpha(r) = r^eps / eps approaches the classic law inside the ball
    std::vector<Vec> interior;
    std::vector<double> radii;
    for (int i = 1; i < 20; ++i) radii.push_back(0.05 * i);
    for (int j = 2; j <= 12; ++j) radii.push_back(1.0 - std::pow(10.0, -j));
    for (int k = 0; k < 16; ++k) {
        const double a = 2.0 * M_PI * k / 16.0;
        for (double rad : radii) interior.push_back((Vec(2) << rad * std::cos(a), rad * std::sin(a)).finished());
    }
    double prev = kInf;
    bool decreasing = true;
    const std::pair<double, const char*> eps_grid[] = {{1.0, "1"}, {0.5, "0.5"}, {0.1, "0.1"}, {0.01, "0.01"}};
    for (const auto& [eps, label] : eps_grid) {
        ProjectionSpec se = spec;
        se.alpha = ExtendedKFunction::odd_power(eps, eps);
        const double g = projection_gap(se, interior, u0v);
        r.put(std::string("epsilon_gap.") + label, g);
        decreasing = decreasing && g < prev;
        prev = g;
    }
    r.certify("epsilon_family_decreasing", decreasing);

    const Vec aux(0);
    const std::pair<const char*, UpdateLaw> laws[] = {
        {"classic", UpdateLaw::Classic}, {"qp", UpdateLaw::Qp}, {"inverse_optimal", UpdateLaw::InverseOptimal}};
    for (const auto& [name, law] : laws) {
        const UpdatePath path = simulate_update(spec, law, theta0, aux, cfg.T, cfg.dt);
        r.put(std::string(name) + ".min_h", path.min_h);
        r.certify(std::string("invariance_") + name, path.min_h >= (law == UpdateLaw::Classic ? -1e-6 : -1e-8));
    }

    ControlAffineSystem sys;
    sys.n = 2;
    sys.m1 = 0;
    sys.m2 = 2;
    sys.f = [](const Vec&) { return Vec::Zero(2); };
    sys.g2 = [](const Vec&) { return Mat::Identity(2, 2); };
    ClosedLoop loop{sys, h, [spec](const Vec& t, double) { return inverse_optimal_update(spec, t, spec.u0(t, Vec(0), 0.0)); },
                    [u0v](const Vec&, double) { return u0v; }, {}};
    Trajectory tr = integrate_ode(loop, theta0, cfg);
    const CostSpec cost = cost_projection_min(spec);
    const CostResult c = attach_cost(tr, cost);
    const double inv = cost_invariance_check(tr, cost);
    r.put("cost.selector", cost.selector);
    r.put("cost.value", c.value);
    r.put("cost.expected", -2.0 * beta * h(theta0));
    r.put("cost.invariance", inv);
    r.certify("cost_invariance", inv <= 1e-3);
    r.trajectories.emplace_back("inverse_optimal", std::move(tr));
    return r;
}

ScenarioResult run_sandwich(const ScenarioParams& p) {
    ScenarioResult r;
    const double x0 = scalar_x0(p, -1.0);
    const double amp = p.num("amplitude", 0.3);
    const SimConfig cfg = sim_config(p, 1e-3, 10.0);
    auto u0 = [](const Vec& x) { return vec1(-x(0)); };
    for (const bool with_d : {true, false}) {
        const std::string tag = with_d ? "disturbed" : "disturbance_free";
        SandwichSpec spec = guarded("alpha", [&] {
            return make_sandwich_spec(scalar_system(with_d ? MatrixField([](const Vec&) { return mat1(1.0); }) : MatrixField{}),
                                      minus_x(), u0, KFunction::identity(), KFunction::identity(),
                                      ExtendedKFunction::identity(), ExtendedKFunction::linear(2.0));
        });
        const AssumptionReport a =
            check_assumptions(spec, Vec::Constant(1, -3.0), Vec::Constant(1, 3.0), 601);
        r.put(tag + ".assumption.max_omega0", a.max_omega0);
        r.put(tag + ".assumption.min_alpha_margin", a.min_alpha_margin);
        r.put(tag + ".assumption.ios_ok", a.ios_ok() ? "true" : "false");
        r.put(tag + ".assumption.alpha_ok", a.alpha_ok() ? "true" : "false");
        DisturbanceFn d;
        if (with_d) d = [amp](const Vec&, double t) { return vec1(amp * std::sin(t)); };
        ClosedLoop loop{spec.sys, spec.bf, [spec](const Vec& x, double) { return sandwich_filter(spec, x); },
                        [u0](const Vec& x, double) { return u0(x); }, d};
        Trajectory tr = integrate_ode(loop, vec1(x0), cfg);
        const SandwichReport s = certify_sandwich_bound(tr, spec.alpha, spec.rho, spec.alpha0, spec.rho0);
        r.put(tag + ".lower_margin", s.min_lower_margin);
        r.put(tag + ".upper_margin", s.min_upper_margin);
        r.certify("sandwich_" + tag, s.pass);
        r.trajectories.emplace_back(tag, std::move(tr));
    }
    return r;
}

const std::set<std::string> kSim = {"dt", "T"};

std::set<std::string> with_sim(std::initializer_list<std::string> extra, bool stochastic = false) {
    std::set<std::string> k = kSim;
    k.insert(extra.begin(), extra.end());
    if (stochastic) k.insert({"seed", "paths"});
    return k;
}

}  // namespace

const std::vector<ScenarioInfo>& builtin_scenarios() {
    static const std::vector<ScenarioInfo> reg = {
        {"intro-qp-optimal", "det_filters", "scalar integrator, doubled QP filter, optimal cost equals x0",
         "scalar integrator, constant nominal law", with_sim({"x0", "u0"})},
        {"intro-sontag", "det_filters", "scalar integrator, Sontag-type filter, optimal cost equals x0",
         "scalar integrator, constant nominal law", with_sim({"x0", "u0"})},
        {"ex1-dssf", "det_filters", "x' = u + (1+x^2)d, QP filter, disturbance-to-state bound", "scalar, disturbance gain 1+x^2",
         with_sim({"x0", "u0", "rho", "alpha", "disturbance"})},
        {"blowup", "sim", "QP filter with u0 = x^3 keeps finite escape", "scalar, cubic nominal law", with_sim({"x0"})},
        {"ex3-invopt", "det_filters", "inverse-optimal filter, worst-case disturbance, cost identity", "scalar, linear alpha, quadratic gamma",
         with_sim({"x0", "u0", "alpha", "beta", "lambda", "disturbance"})},
        {"ex4-invopt-qp", "det_filters", "beta-scaled QP filter on the 1+x^2 disturbance system", "scalar, disturbance gain 1+x^2",
         with_sim({"x0", "u0", "rho", "alpha", "disturbance", "beta"})},
        {"ex5-stoch", "stoch_filters", "stochastic QP activation and Monte Carlo value function", "scalar SDE, log barrier",
         with_sim({"x0", "beta", "r2"}, true)},
        {"ex6-nssf", "stoch_filters", "noise-to-state QP filter under unknown covariance", "scalar SDE, cubic barrier",
         with_sim({"x0", "u0", "rho", "sigma"}, true)},
        {"proj-ball", "estimator_safety", "unit-ball parameter projection: classic, QP and inverse-optimal",
         "unit ball in parameter space", with_sim({"x0", "u0", "beta", "alpha"})},
        {"sandwich-scalar", "nonovershoot", "two-sided KL bounds for regulation to the boundary",
         "scalar integrator, h = -x", with_sim({"x0", "amplitude"})},
    };
    return reg;
}

const ScenarioInfo& find_scenario(const std::string& id) {
    for (const ScenarioInfo& s : builtin_scenarios())
        if (s.id == id) return s;
    throw ConfigError("unknown scenario '" + id + "'");
}

ScenarioResult run_scenario(const std::string& id, const ScenarioParams& params) {
    const ScenarioInfo& info = find_scenario(id);
    for (const std::string& k : params.keys())
        if (k != "scenario" && !info.keys.count(k)) throw ConfigError(field(k) + ": not used by scenario " + id);
    ScenarioResult r;
    if (id == "intro-qp-optimal") r = intro_common(params, false);
    else if (id == "intro-sontag") r = intro_common(params, true);
    else if (id == "ex1-dssf") r = ex1_common(params, 1.0);
    else if (id == "blowup") r = run_blowup(params);
    else if (id == "ex3-invopt") r = run_ex3(params);
    else if (id == "ex4-invopt-qp") {
        const double beta = params.num("beta", 2.0);
        if (!(beta >= 2.0)) throw ConfigError(field("beta") + ": must be >= 2");
        r = ex1_common(params, beta);
    } else if (id == "ex5-stoch") r = run_ex5(params);
    else if (id == "ex6-nssf") r = run_ex6(params);
    else if (id == "proj-ball") r = run_proj(params);
    else r = run_sandwich(params);
    r.report.insert(r.report.begin(), {"scenario", id});
    return r;
}

}  // namespace safety
