#include "safety/scenarios.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace safety;

namespace {

struct Overrides {
    std::optional<double> dt, T;
    std::optional<long> seed, paths;
    std::string out_dir = ".";
};

template <class V>
void apply(ScenarioParams& p, const ScenarioInfo& info, const std::string& key, const std::optional<V>& v) {
    if (!v) return;
    if (!info.keys.count(key)) throw ConfigError("flag --" + key + ": not used by scenario " + info.id);
    std::ostringstream os;
    os.precision(17);
    os << *v;
    p.set(key, os.str());
}

int execute(const std::string& id, ScenarioParams params, const Overrides& o) {
    const ScenarioInfo& info = find_scenario(id);
    apply(params, info, "dt", o.dt);
    apply(params, info, "T", o.T);
    apply(params, info, "seed", o.seed);
    apply(params, info, "paths", o.paths);

    const ScenarioResult r = run_scenario(id, params);

    const fs::path dir = fs::path(o.out_dir) / id;
    fs::create_directories(dir);
    for (const auto& [name, traj] : r.trajectories) {
        std::ofstream csv(dir / (name + ".csv"));
        write_csv(traj, csv);
    }
    std::ofstream rep(dir / "report.txt");
    write_report(r, rep);
    write_report(r, std::cout);
    return r.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safety filter scenario runner"};
    app.require_subcommand(1);
    Overrides o;
    auto add_flags = [&o](CLI::App* sub) {
        sub->add_option("--dt", o.dt, "integration step");
        sub->add_option("--T", o.T, "horizon");
        sub->add_option("--seed", o.seed, "noise seed");
        sub->add_option("--paths", o.paths, "number of sample paths");
        sub->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
    };

    std::string config_path;
    auto* run = app.add_subcommand("run", "run a scenario described by a config file");
    run->add_option("config", config_path, "config file with scenario = <id> and overrides")->required();
    add_flags(run);

    std::string builtin;
    auto* run_builtin = app.add_subcommand("run-builtin", "run a builtin scenario with default parameters");
    run_builtin->add_option("id", builtin, "scenario id")->required();
    add_flags(run_builtin);

    std::string module;
    auto* list = app.add_subcommand("list", "list builtin scenarios");
    list->add_option("--module", module, "only scenarios of this module");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*list) {
            bool any = false;
            for (const ScenarioInfo& s : builtin_scenarios()) {
                if (!module.empty() && s.module != module) continue;
                any = true;
                std::cout << s.id << "  [" << s.module << "]  " << s.description << "  (" << s.setting << ")\n";
            }
            if (!module.empty() && !any) {
                std::cerr << "error: no scenarios for module '" << module << "'\n";
                return 2;
            }
            return 0;
        }
        if (*run_builtin) return execute(builtin, ScenarioParams{}, o);

        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config '" + config_path + "'");
        ScenarioParams params = parse_config(in);
        if (!params.has("scenario")) throw ConfigError(config_path + ": missing field 'scenario'");
        return execute(params.str("scenario", ""), params, o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
