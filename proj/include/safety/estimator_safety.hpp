#pragma once

#include "safety/det_filters.hpp"

#include <vector>

namespace safety {

/// Parameter update dtheta/dt = u kept inside {h(theta) >= 0}.
struct ProjectionSpec {
    BarrierFunction h;
    ExtendedKFunction alpha;
    // nominal update law; aux is passed through untouched
    std::function<Vec(const Vec& theta, const Vec& aux, double t)> u0;
    double beta_gain = 2.0;
};

// Tangential projection, active only where |alpha(h)| <= 1e-12 and the nominal update points outward.
Vec classic_projection(const ProjectionSpec& spec, const Vec& theta, const Vec& u0);
Vec qp_projection(const ProjectionSpec& spec, const Vec& theta, const Vec& u0);
Vec inverse_optimal_update(const ProjectionSpec& spec, const Vec& theta, const Vec& u0);

// 2 beta dh u0 + beta^2 max{0, -dh u0 - alpha(h)}
double projection_state_penalty(const ProjectionSpec& spec, const Vec& theta, const Vec& u0);
// |dh|^2 / max{0, -dh u0 - alpha(h)}
Weight projection_cost_weight(const ProjectionSpec& spec, const Vec& theta, const Vec& u0);

/// sup over the given points of |classic_projection - qp_projection|.
double projection_gap(const ProjectionSpec& spec, const std::vector<Vec>& thetas, const Vec& u0);

enum class UpdateLaw { Classic, Qp, InverseOptimal };

struct UpdatePath {
    std::vector<double> t;
    std::vector<Vec> theta;
    double min_h = kInf;
    int boundary_events = 0;
};

/** @brief RK4 integration of the update law.
 *
 * The classic law has a discontinuous right-hand side; crossings of h = 0 are
 * located by bisection on the step length and the state is then kept on the
 * boundary by a gradient correction after each tangential step.
 */
UpdatePath simulate_update(const ProjectionSpec& spec, UpdateLaw law, const Vec& theta0, const Vec& aux, double T,
                           double dt);

}  // namespace safety
