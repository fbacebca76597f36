#pragma once

#include "safety/det_filters.hpp"
#include "safety/estimator_safety.hpp"
#include "safety/rcbf_filters.hpp"
#include "safety/stoch_filters.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace safety {

struct SimConfig {
    double dt = 1e-3;
    double T = 10.0;
    double escape_threshold = 1e6;
    std::uint64_t seed = 0;
    int paths = 1;

    void validate() const;
};

using Controller = std::function<Vec(const Vec& x, double t)>;
using DisturbanceFn = std::function<Vec(const Vec& x, double t)>;

/// Closed loop x' = f + g1 d + g2 u with u = control(x, t); u0 is recorded alongside.
struct ClosedLoop {
    ControlAffineSystem sys;
    BarrierFunction bf;
    Controller control;
    NominalController u0;
    DisturbanceFn disturbance;  // empty means d = 0
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> u;
    std::vector<Vec> u0;
    std::vector<Vec> d;  // disturbance, or the Brownian increment for SDE paths
    std::vector<double> h_values;
    std::vector<double> running_cost;  // cumulative integral, filled by evaluate_cost
    std::optional<double> escape_time;

    std::size_t size() const { return times.size(); }
};

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fixed-step RK4 with the controller evaluated at every stage.
Trajectory integrate_ode(const ClosedLoop& loop, const Vec& x0, const SimConfig& cfg);

/// Euler-Maruyama path; the noise stream depends only on (cfg.seed, path).
Trajectory integrate_sde_path(const ClosedLoop& loop, const CovarianceSchedule& cov, const Vec& x0,
                              const SimConfig& cfg, std::uint64_t path);
std::vector<Trajectory> integrate_sde(const ClosedLoop& loop, const CovarianceSchedule& cov, const Vec& x0,
                                      const SimConfig& cfg);

struct DssfReport {
    std::vector<double> margins;  // h(t) - [beta(h0, t) - rho(sup |d|)]
    double min_margin = kInf;
    bool pass = false;
};
DssfReport certify_dssf_bound(const Trajectory& traj, const ExtendedKFunction& alpha, const KFunction& rho);

struct SandwichReport {
    double min_lower_margin = kInf;  // h - [beta(h0,t) - rho(sup|d|)]
    double min_upper_margin = kInf;  // [beta0(h0,t) + rho0(sup|d|)] - h
    bool pass = false;
};
/// Two-sided bound with beta, beta0 from kl_curve under alpha and alpha0; PASS iff both margins >= -1e-4.
SandwichReport certify_sandwich_bound(const Trajectory& traj, const ExtendedKFunction& alpha, const KFunction& rho,
                                      const ExtendedKFunction& alpha0, const KFunction& rho0);

/** @brief Terminal term plus running integrand of a cost functional.
 *
 * maximize = false marks the min-forms. Running terms may be +-inf when an
 * infinite weight meets a nonzero numerator.
 */
struct CostSpec {
    std::string selector;
    bool maximize = true;
    double beta_gain = 2.0;
    double lambda = 1.0;
    std::function<double(const Vec& x)> terminal;
    std::function<double(const Vec& x, const Vec& u, const Vec& u0, const Vec& d, double t)> running;
};

CostSpec cost_general_game(const InverseOptimalSpec& io);
CostSpec cost_qp_game(const DssfCbfSpec& spec, double beta_gain, double lambda);
CostSpec cost_qp_undisturbed(const DssfCbfSpec& spec, double beta_gain);
CostSpec cost_reciprocal_min(const RcbfSpec& spec);
CostSpec cost_stochastic_mean(const StochSpec& spec);
CostSpec cost_noise_game(const NssfSpec& spec, const CovarianceSchedule& cov);
CostSpec cost_projection_min(const ProjectionSpec& spec);
// scalar example x' = u, h = -x
CostSpec cost_integrator_min();
CostSpec cost_integrator_sontag();

struct CostResult {
    double value = 0.0;
    double terminal = 0.0;
    double integral = 0.0;
    bool infinite = false;
    std::vector<double> cumulative;
};
CostResult evaluate_cost(const Trajectory& traj, const CostSpec& cost);
// Same, and stores the cumulative integral in traj.running_cost.
CostResult attach_cost(Trajectory& traj, const CostSpec& cost);

/// max over samples of |terminal(x(t)) + integral up to t - terminal(x0)|.
double cost_invariance_check(const Trajectory& traj, const CostSpec& cost);

/// h(T) + int alpha(h) + (lambda/2) int gamma(|d|/lambda); nonnegative under integral disturbance-to-state safety.
double ibssf_check(const Trajectory& traj, const ExtendedKFunction& alpha, const LegendreFenchelPair& gamma,
                   double lambda);

struct Perturbation {
    std::string name;
    std::function<Vec(double t)> delta;
};
/// constant, late step, sinusoid and decaying exponential, each of unit size.
std::vector<Perturbation> standard_perturbations(int m2, double T);
inline std::vector<double> standard_amplitudes() { return {-0.2, -0.05, 0.05, 0.2}; }

struct ProbeCase {
    std::string shape;
    double eps = 0.0;
    double J = 0.0;
    double margin = 0.0;  // J* - J for maximize, J - J* for minimize; must be >= -1e-6
};
struct ProbeReport {
    double J_star = 0.0;
    std::vector<ProbeCase> cases;
    double worst_margin = kInf;
    bool pass = false;
};
/// Reruns the loop with u* + eps delta(t). The disturbance stays the loop's feedback law.
ProbeReport optimality_probe(const ClosedLoop& loop, const CostSpec& cost, const Vec& x0, const SimConfig& cfg,
                             const std::vector<Perturbation>& family, const std::vector<double>& amplitudes);

struct MonteCarloReport {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;
    std::size_t escaped = 0;
};
/// Path-wise cost values without keeping the trajectories.
MonteCarloReport monte_carlo_cost(const ClosedLoop& loop, const CovarianceSchedule& cov, const Vec& x0,
                                  const CostSpec& cost, const SimConfig& cfg);

/// Columns t, x1..xn, u1.., u0_1.., d1.., h, running_cost; 17 significant digits.
void write_csv(const Trajectory& traj, std::ostream& os);

}  // namespace safety
