#pragma once

#include "safety/sim.hpp"

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace safety {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key = value parameters.
class ScenarioParams {
public:
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string str(const std::string& key, const std::string& fallback) const;
    double num(const std::string& key, double fallback) const;
    long integer(const std::string& key, long fallback) const;
    Vec vec(const std::string& key, const Vec& fallback) const;
    std::vector<std::string> keys() const;

private:
    std::map<std::string, std::string> values_;
};

/// INI-style file without sections; full-line comments start with '#' or ';'.
ScenarioParams parse_config(std::istream& in);

// Named constructors used by configs.
ExtendedKFunction parse_alpha(const std::string& s);      // identity | linear:k | odd_power:p[:scale]
KFunction parse_k(const std::string& s);                  // identity | linear:k | power:p[:c]
LegendreFenchelPair parse_gamma(const std::string& s);    // quadratic[:c] | power:p
std::function<double(double)> parse_signal(const std::string& s);  // zero | const:c | sine:amp[:freq]

struct Certification {
    std::string name;
    bool pass = false;
};

struct ScenarioResult {
    std::vector<std::pair<std::string, std::string>> report;
    std::map<std::string, double> values;
    std::vector<Certification> certifications;
    std::vector<std::pair<std::string, Trajectory>> trajectories;

    void put(const std::string& key, double v);
    void put(const std::string& key, const std::string& v);
    void certify(const std::string& name, bool pass);
    bool all_pass() const;
};

struct ScenarioInfo {
    std::string id;
    std::string module;
    std::string description;
    std::string setting;  // short label of the system and barrier
    std::set<std::string> keys;  // accepted config keys besides "scenario"
};

const std::vector<ScenarioInfo>& builtin_scenarios();
const ScenarioInfo& find_scenario(const std::string& id);  // throws ConfigError

/// Runs a builtin with overrides; unknown keys and bad values raise ConfigError.
ScenarioResult run_scenario(const std::string& id, const ScenarioParams& params);

void write_report(const ScenarioResult& r, std::ostream& os);

// Example systems shared by the builtin scenarios and the test suites.

/// x' = u + g1(x) d with one input; g1 empty means no disturbance channel.
ControlAffineSystem scalar_system(MatrixField g1);
/// h(x) = -x on the scalar line.
BarrierFunction minus_x();

/** @brief x' = u + (1+x^2) d, h = -x, inverse-optimal filter with gamma(r) = r^2.
 *
 * R2 = 1/(max{0, u0 - alpha(h)} + (1+x^2)^2). u0_law is "alpha" (u0 = alpha(h))
 * or a scalar law const:c | linear:k | cubic; disturbance is "worst" or a signal.
 */
struct WorstCaseExample {
    InverseOptimalSpec io;
    ClosedLoop loop;
};
WorstCaseExample make_worst_case_example(double beta, double lambda, const ExtendedKFunction& alpha,
                                         const std::string& u0_law, const std::string& disturbance);

/// dx = u dt + (1-x) dw, h = ln(1-x), u0 = 0, alpha = id, gamma2(r) = r^2/4, constant R2 = r2.
StochSpec make_log_barrier_example(double beta, bool safety_only, double r2);

/// dx = u dt + (1+x^2) Sigma dw, h = -x^3, alpha(h) = 3h, gamma1 = gamma2 = r^2/4.
NssfSpec make_cubic_barrier_example(const KFunction& rho, const std::function<double(double)>& u0, double beta,
                                    double lambda);

}  // namespace safety
