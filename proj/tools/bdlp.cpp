#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bdlp/scenario.hpp"

namespace {

int run_subcommand(const std::string& experiment, const std::string& config_path, int jobs,
                   const std::string& out_dir, bool plots) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "bdlp: cannot open config file '" << config_path << "'\n";
        return 1;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();

    bdlp::Scenario scenario;
    try {
        scenario = bdlp::parse_scenario(buffer.str(), experiment);
    } catch (const bdlp::ParseError& e) {
        std::cerr << "bdlp: config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "bdlp: config error: " << e.what() << '\n';
        return 1;
    }
    if (!out_dir.empty()) scenario.out_dir = out_dir;
    if (plots) scenario.plots = true;
    scenario.jobs = jobs;

    const int code = bdlp::run_scenario(scenario);
    if (code == 2) std::cerr << "bdlp: numerical failure; details in run.json\n";
    if (code == 3) std::cerr << "bdlp: verification suite failed; see conditions.csv\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bdlp - spatial birth-and-death model laboratory"};
    app.require_subcommand(1);

    std::string config, out_dir;
    int jobs = 1;
    bool plots = false;

    std::vector<CLI::App*> subs;
    const struct {
        const char* name;
        const char* help;
    } commands[] = {
        {"simulate", "replicated stochastic simulation; writes density.csv and paircorr.csv"},
        {"moments", "deterministic correlation-function solve; writes k1.csv, q.csv, bounds.csv"},
        {"verify", "parameter conditions, operator bounds and harmonic oracles; writes conditions.csv"},
        {"compare", "simulation against the moment solution with per-bin z-scores"},
    };
    for (const auto& cmd : commands) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config,-c", config, "scenario config file (JSON)")->required();
        sub->add_option("--jobs,-j", jobs, "concurrent replicate workers (default 1)");
        sub->add_option("--out,-o", out_dir, "output directory (overrides config)");
        sub->add_flag("--plots", plots, "also write SVG line plots");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // exit-code contract: {0,1,2,3}
    }

    for (auto* sub : subs)
        if (sub->parsed()) return run_subcommand(sub->get_name(), config, jobs, out_dir, plots);
    return 1;
}
