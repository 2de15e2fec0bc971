#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bdlp/analysis.hpp"
#include "bdlp/estimators.hpp"
#include "bdlp/moments.hpp"
#include "bdlp/params.hpp"
#include "bdlp/simulator.hpp"
#include "bdlp/verify.hpp"

namespace bdlp {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KernelSpec {
    std::string family = "gaussian";
    double sigma = 1.0;
};

/// Fully resolved batch scenario; every field holds its final value and the
/// defaults that were applied are listed for the run metadata.
struct Scenario {
    std::string experiment;  // simulate | moments | verify | compare

    // model
    double m = 1.0;
    double kappa_plus = 0.0;
    double kappa_minus = 0.0;
    KernelSpec a_plus, a_minus;
    int d = 1;
    double L = 100.0;

    // init
    std::string init_type = "poisson";
    double init_z = 0.5;

    // run
    double t_end = 5.0;
    std::vector<double> record_times;
    int replicates = 100;
    std::uint64_t master_seed = 12345;
    std::uint64_t event_cap = 100000000;

    // moments
    int n_grid = 1024;
    double dt = 1e-3;
    std::string closure = "power1";
    double epsilon_k1 = 1e-8;
    double bound_C = 1.0;

    // estimators
    int bins = 50;
    double r_max = 0.0;  // resolved to min(L/2, 6 sigma+)

    // analysis
    double C = 4.0;
    double b = 1.0;
    double epsilon = 0.5;
    std::vector<double> box_sides;
    long mc = 800;

    // outputs / execution
    std::string out_dir = "out";
    bool write_positions = false;
    bool plots = false;
    int jobs = 1;

    std::vector<std::string> applied_defaults;

    ModelParams model() const {
        ModelParams p;
        p.m = m;
        p.kappa_plus = kappa_plus;
        p.kappa_minus = kappa_minus;
        p.a_plus = Kernel(family_from_name(a_plus.family), a_plus.sigma, d);
        p.a_minus = Kernel(family_from_name(a_minus.family), a_minus.sigma, d);
        p.space = SpaceSpec(d, L);
        p.validate();
        return p;
    }

    ClosureScheme closure_scheme() const {
        ClosureScheme c = closure == "kirkwood" ? ClosureScheme::kirkwood() : ClosureScheme::power1();
        c.epsilon_k1 = epsilon_k1;
        return c;
    }

    nlohmann::json resolved() const {
        nlohmann::json j;
        j["experiment"] = experiment;
        j["model"] = {{"m", m},
                      {"kappa_plus", kappa_plus},
                      {"kappa_minus", kappa_minus},
                      {"a_plus", {{"family", a_plus.family}, {"sigma", a_plus.sigma}}},
                      {"a_minus", {{"family", a_minus.family}, {"sigma", a_minus.sigma}}},
                      {"space", {{"d", d}, {"L", L}}}};
        j["init"] = {{"type", init_type}, {"z", init_z}};
        j["run"] = {{"t_end", t_end},
                    {"record_times", record_times},
                    {"replicates", replicates},
                    {"master_seed", master_seed},
                    {"event_cap", event_cap}};
        j["moments"] = {{"n_grid", n_grid}, {"dt", dt},       {"closure", closure},
                        {"epsilon_k1", epsilon_k1}, {"bound_C", bound_C}};
        j["estimators"] = {{"bins", bins}, {"r_max", r_max}};
        j["analysis"] = {{"C", C}, {"b", b}, {"epsilon", epsilon}, {"box_sides", box_sides}, {"mc", mc}};
        j["outputs"] = {{"dir", out_dir}, {"positions", write_positions}, {"plots", plots}};
        j["applied_defaults"] = applied_defaults;
        return j;
    }
};

namespace detail {

inline int levenshtein(const std::string& a, const std::string& b) {
    std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline void check_keys(const nlohmann::json& obj, const std::string& section,
                       const std::vector<std::string>& allowed) {
    if (!obj.is_object()) throw ParseError("config section '" + section + "' must be an object");
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) != allowed.end()) continue;
        std::string best;
        int best_d = 1000;
        for (const auto& k : allowed) {
            const int dd = levenshtein(item.key(), k);
            if (dd < best_d) {
                best_d = dd;
                best = k;
            }
        }
        std::string msg = "unknown key '" + item.key() + "' in " + section;
        if (best_d <= 3) msg += "; did you mean '" + best + "'?";
        throw ParseError(msg);
    }
}

inline double get_number(const nlohmann::json& obj, const std::string& section,
                         const std::string& key, std::optional<double> def, double lo, double hi,
                         std::vector<std::string>* defaults) {
    const std::string path = section.empty() ? key : section + "." + key;
    if (!obj.contains(key)) {
        if (!def) throw ParseError("missing required field '" + path + "'");
        if (defaults) defaults->push_back(path + " = " + std::to_string(*def));
        return *def;
    }
    if (!obj[key].is_number()) throw ParseError("field '" + path + "' must be a number");
    const double v = obj[key].get<double>();
    if (!(v >= lo) || !(v <= hi))
        throw ParseError("field '" + path + "' = " + std::to_string(v) + " out of range [" +
                         std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
}

inline std::string get_string(const nlohmann::json& obj, const std::string& section,
                              const std::string& key, std::optional<std::string> def,
                              const std::vector<std::string>& allowed,
                              std::vector<std::string>* defaults) {
    const std::string path = section.empty() ? key : section + "." + key;
    if (!obj.contains(key)) {
        if (!def) throw ParseError("missing required field '" + path + "'");
        if (defaults) defaults->push_back(path + " = " + *def);
        return *def;
    }
    if (!obj[key].is_string()) throw ParseError("field '" + path + "' must be a string");
    const std::string v = obj[key].get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
        std::string msg = "field '" + path + "' has invalid value '" + v + "'; expected one of {";
        for (std::size_t i = 0; i < allowed.size(); ++i)
            msg += (i ? ", " : "") + allowed[i];
        throw ParseError(msg + "}");
    }
    return v;
}

inline KernelSpec get_kernel(const nlohmann::json& parent, const std::string& key,
                             const KernelSpec& def, std::vector<std::string>* defaults) {
    KernelSpec spec;
    if (!parent.contains(key)) {
        if (defaults)
            defaults->push_back("model." + key + " = {family: " + def.family +
                                ", sigma: " + std::to_string(def.sigma) + "}");
        return def;
    }
    const auto& obj = parent[key];
    check_keys(obj, "model." + key, {"family", "sigma"});
    spec.family = get_string(obj, "model." + key, "family", std::string("gaussian"),
                             {"gaussian", "tophat", "laplace"}, defaults);
    spec.sigma = get_number(obj, "model." + key, "sigma", 1.0, 1e-9, 1e9, defaults);
    return spec;
}

inline std::string format_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace detail

/// Parse and validate a JSON scenario document. Unknown keys are rejected
/// with a nearest-key suggestion; every applied default is recorded.
inline Scenario parse_scenario(const std::string& text, const std::string& default_experiment = "") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config is not well-formed JSON: ") + e.what());
    }

    Scenario s;
    auto* defs = &s.applied_defaults;
    detail::check_keys(j, "config",
                       {"experiment", "model", "init", "run", "moments", "estimators", "analysis",
                        "outputs"});

    if (j.contains("experiment")) {
        s.experiment = detail::get_string(j, "", "experiment", std::nullopt,
                                          {"simulate", "moments", "verify", "compare"}, nullptr);
        if (!default_experiment.empty() && s.experiment != default_experiment)
            throw ParseError("config experiment '" + s.experiment +
                             "' does not match the requested subcommand '" + default_experiment + "'");
    } else if (!default_experiment.empty()) {
        s.experiment = default_experiment;
    } else {
        throw ParseError("missing required field 'experiment'");
    }

    if (!j.contains("model")) throw ParseError("missing required section 'model'");
    const auto& model = j["model"];
    detail::check_keys(model, "model", {"m", "kappa_plus", "kappa_minus", "a_plus", "a_minus", "space"});
    s.m = detail::get_number(model, "model", "m", std::nullopt, 0.0, 1e9, defs);
    s.kappa_plus = detail::get_number(model, "model", "kappa_plus", 0.0, 0.0, 1e9, defs);
    s.kappa_minus = detail::get_number(model, "model", "kappa_minus", 0.0, 0.0, 1e9, defs);
    s.a_plus = detail::get_kernel(model, "a_plus", KernelSpec{}, defs);
    s.a_minus = detail::get_kernel(model, "a_minus", s.a_plus, defs);
    if (model.contains("space")) {
        const auto& space = model["space"];
        detail::check_keys(space, "model.space", {"d", "L"});
        s.d = static_cast<int>(detail::get_number(space, "model.space", "d", 1.0, 1.0, 3.0, defs));
        s.L = detail::get_number(space, "model.space", "L", 100.0, 1e-6, 1e9, defs);
    } else {
        defs->push_back("model.space = {d: 1, L: 100}");
    }

    if (j.contains("init")) {
        const auto& init = j["init"];
        detail::check_keys(init, "init", {"type", "z"});
        s.init_type = detail::get_string(init, "init", "type", std::string("poisson"), {"poisson"}, defs);
        s.init_z = detail::get_number(init, "init", "z", 0.5, 0.0, 1e9, defs);
    } else {
        defs->push_back("init = {type: poisson, z: 0.5}");
    }

    if (j.contains("run")) {
        const auto& run = j["run"];
        detail::check_keys(run, "run", {"t_end", "record_times", "replicates", "master_seed", "event_cap"});
        s.t_end = detail::get_number(run, "run", "t_end", 5.0, 0.0, 1e9, defs);
        s.replicates = static_cast<int>(detail::get_number(run, "run", "replicates", 100.0, 1.0, 1e7, defs));
        s.master_seed = static_cast<std::uint64_t>(
            detail::get_number(run, "run", "master_seed", 12345.0, 0.0, 9e15, defs));
        s.event_cap = static_cast<std::uint64_t>(
            detail::get_number(run, "run", "event_cap", 1e8, 1.0, 1e15, defs));
        if (run.contains("record_times")) {
            if (!run["record_times"].is_array())
                throw ParseError("field 'run.record_times' must be an array of numbers");
            for (const auto& v : run["record_times"]) {
                if (!v.is_number()) throw ParseError("field 'run.record_times' must be an array of numbers");
                s.record_times.push_back(v.get<double>());
            }
            for (std::size_t i = 0; i < s.record_times.size(); ++i) {
                if (s.record_times[i] < 0.0 || s.record_times[i] > s.t_end)
                    throw ParseError("run.record_times must lie within [0, t_end]");
                if (i > 0 && !(s.record_times[i] > s.record_times[i - 1]))
                    throw ParseError("run.record_times must be strictly increasing");
            }
        }
    } else {
        defs->push_back("run = {t_end: 5, replicates: 100, master_seed: 12345, event_cap: 1e8}");
    }
    if (s.record_times.empty()) {
        for (int i = 0; i <= 10; ++i) s.record_times.push_back(s.t_end * i / 10.0);
        defs->push_back("run.record_times = 11 evenly spaced times on [0, t_end]");
    }

    if (j.contains("moments")) {
        const auto& mo = j["moments"];
        detail::check_keys(mo, "moments", {"n_grid", "dt", "closure", "epsilon_k1", "bound_C"});
        s.n_grid = static_cast<int>(detail::get_number(mo, "moments", "n_grid", 1024.0, 2.0, 1e7, defs));
        if ((s.n_grid & (s.n_grid - 1)) != 0)
            throw ParseError("field 'moments.n_grid' must be a power of two");
        s.dt = detail::get_number(mo, "moments", "dt", 1e-3, 1e-9, 1.0, defs);
        s.closure = detail::get_string(mo, "moments", "closure", std::string("power1"),
                                       {"power1", "kirkwood"}, defs);
        s.epsilon_k1 = detail::get_number(mo, "moments", "epsilon_k1", 1e-8, 1e-300, 1.0, defs);
        s.bound_C = detail::get_number(mo, "moments", "bound_C", 1.0, 1e-9, 1e9, defs);
    } else {
        defs->push_back("moments = {n_grid: 1024, dt: 0.001, closure: power1, epsilon_k1: 1e-8, bound_C: 1}");
    }

    const double default_r_max = std::min(s.L / 2.0, 6.0 * s.a_plus.sigma);
    if (j.contains("estimators")) {
        const auto& est = j["estimators"];
        detail::check_keys(est, "estimators", {"bins", "r_max"});
        s.bins = static_cast<int>(detail::get_number(est, "estimators", "bins", 50.0, 1.0, 1e6, defs));
        s.r_max = detail::get_number(est, "estimators", "r_max", default_r_max, 1e-9, s.L / 2.0, defs);
    } else {
        s.r_max = default_r_max;
        defs->push_back("estimators = {bins: 50, r_max: min(L/2, 6 sigma+)}");
    }

    if (j.contains("analysis")) {
        const auto& an = j["analysis"];
        detail::check_keys(an, "analysis", {"C", "b", "epsilon", "box_sides", "mc"});
        s.C = detail::get_number(an, "analysis", "C", 4.0, 1e-9, 1e9, defs);
        s.b = detail::get_number(an, "analysis", "b", 1.0, 0.0, 1e9, defs);
        s.epsilon = detail::get_number(an, "analysis", "epsilon", 0.5, 1e-9, 1.0 - 1e-9, defs);
        s.mc = static_cast<long>(detail::get_number(an, "analysis", "mc", 800.0, 2.0, 1e9, defs));
        if (an.contains("box_sides")) {
            if (!an["box_sides"].is_array())
                throw ParseError("field 'analysis.box_sides' must be an array of numbers");
            for (const auto& v : an["box_sides"]) s.box_sides.push_back(v.get<double>());
        }
    } else {
        defs->push_back("analysis = {C: 4, b: 1, epsilon: 0.5, mc: 800}");
    }
    if (s.box_sides.empty()) {
        for (double k : {2.0, 4.0, 8.0, 16.0, 32.0}) s.box_sides.push_back(k * s.a_minus.sigma);
        defs->push_back("analysis.box_sides = {2,4,8,16,32} sigma-");
    }

    if (j.contains("outputs")) {
        const auto& out = j["outputs"];
        if (out.is_string()) {
            s.out_dir = out.get<std::string>();
        } else {
            detail::check_keys(out, "outputs", {"dir", "positions", "plots"});
            s.out_dir = detail::get_string(out, "outputs", "dir", std::string("out"), {}, defs);
            if (out.contains("positions")) {
                if (!out["positions"].is_boolean())
                    throw ParseError("field 'outputs.positions' must be a boolean");
                s.write_positions = out["positions"].get<bool>();
            }
            if (out.contains("plots")) {
                if (!out["plots"].is_boolean())
                    throw ParseError("field 'outputs.plots' must be a boolean");
                s.plots = out["plots"].get<bool>();
            }
        }
    } else {
        defs->push_back("outputs = {dir: out}");
    }

    // environment override for the master seed
    if (const char* env = std::getenv("BDLP_SEED")) {
        s.master_seed = std::strtoull(env, nullptr, 10);
        s.applied_defaults.push_back("run.master_seed overridden by BDLP_SEED");
    }

    s.model();  // validates kernels against the space
    return s;
}

namespace detail {

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    for (const auto& line : lines) out << line << '\n';
}

/// Minimal SVG polyline chart; purely decorative output.
inline void write_lineplot(const std::string& path, const std::string& title,
                           const std::vector<double>& xs,
                           const std::vector<std::vector<double>>& series,
                           const std::vector<std::string>& names) {
    const int w = 640, h = 420, ml = 60, mr = 20, mt = 40, mb = 40;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (double x : xs) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
    }
    for (const auto& ys : series)
        for (double y : ys) {
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!(xmax > xmin)) xmax = xmin + 1.0;
    if (!(ymax > ymin)) ymax = ymin + 1.0;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
        << "</text>\n";
    svg << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
        << "' stroke='black'/>\n";
    svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
        << "' stroke='black'/>\n";
    svg << "<text x='" << ml << "' y='" << h - mb + 16 << "' font-size='10'>" << format_num(xmin)
        << "</text>\n";
    svg << "<text x='" << w - mr << "' y='" << h - mb + 16 << "' text-anchor='end' font-size='10'>"
        << format_num(xmax) << "</text>\n";
    svg << "<text x='" << ml - 4 << "' y='" << h - mb << "' text-anchor='end' font-size='10'>"
        << format_num(ymin) << "</text>\n";
    svg << "<text x='" << ml - 4 << "' y='" << mt + 8 << "' text-anchor='end' font-size='10'>"
        << format_num(ymax) << "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        svg << "<polyline fill='none' stroke='" << colors[si % 4] << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < xs.size() && i < series[si].size(); ++i)
            svg << px(xs[i]) << "," << py(series[si][i]) << " ";
        svg << "'/>\n";
        if (si < names.size())
            svg << "<text x='" << w - mr - 4 << "' y='" << mt + 14 * (si + 1)
                << "' text-anchor='end' fill='" << colors[si % 4] << "' font-size='11'>" << names[si]
                << "</text>\n";
    }
    svg << "</svg>\n";
    std::ofstream out(path);
    out << svg.str();
}

inline std::string witness_string(const ConditionReport& rep, int d) {
    if (!rep.has_witness) return rep.note;
    std::string s = "(" + format_num(rep.witness[0]);
    for (int i = 1; i < d; ++i) s += " " + format_num(rep.witness[i]);
    return s + ")";
}

/// Replicated simulation with per-replicate seeds derived from the master
/// seed; worker threads fill a preallocated slot per replicate, so the result
/// is independent of scheduling.
inline std::vector<Trajectory> run_replicates(const ModelParams& params, double z, double t_end,
                                              const std::vector<double>& record_times,
                                              int replicates, std::uint64_t master_seed,
                                              std::uint64_t event_cap, bool store_positions,
                                              int jobs) {
    std::vector<Trajectory> out(static_cast<std::size_t>(replicates));
    std::exception_ptr first_error = nullptr;
    std::mutex error_lock;
    auto work = [&](int begin, int stride) {
        try {
            for (int r = begin; r < replicates; r += stride) {
                Rng rng = make_rng(replicate_seed(master_seed, static_cast<std::uint64_t>(r)));
                auto init = sample_poisson_initial(params, z, rng);
                RunOptions opts;
                opts.event_cap = event_cap;
                opts.store_positions = store_positions;
                out[static_cast<std::size_t>(r)] = run(params, init, t_end, record_times, rng, opts);
                out[static_cast<std::size_t>(r)].seed = replicate_seed(master_seed, r);
            }
        } catch (...) {
            std::lock_guard<std::mutex> guard(error_lock);
            if (!first_error) first_error = std::current_exception();
        }
    };
    const int n_threads = std::max(1, jobs);
    if (n_threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work, t, n_threads);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

}  // namespace detail

/// Execute a scenario: runs the experiment, writes its CSV artifacts and
/// run.json under the output directory. Exit codes: 0 success, 2 numerical
/// failure (explosion / solver abort / grid too coarse), 3 verification
/// failure. Schema errors are thrown by parse_scenario before this point.
inline int run_scenario(const Scenario& s) {
    namespace fs = std::filesystem;
    using detail::format_num;
    const auto t_start = std::chrono::steady_clock::now();
    fs::create_directories(s.out_dir);
    auto path = [&](const std::string& name) { return (fs::path(s.out_dir) / name).string(); };
    std::vector<std::string> files;
    int exit_code = 0;
    std::string failure;

    const ModelParams params = s.model();

    try {
        if (s.experiment == "simulate" || s.experiment == "compare") {
            const auto trajs = detail::run_replicates(params, s.init_z, s.t_end, s.record_times,
                                                      s.replicates, s.master_seed, s.event_cap,
                                                      true, s.jobs);
            const auto density = density_estimate(trajs, params.space);
            std::vector<std::string> lines{
                "# replicate-mean population density; t in model time, densities in 1/length^d",
                "t,mean_density,stderr,replicates"};
            for (std::size_t i = 0; i < density.times.size(); ++i)
                lines.push_back(format_num(density.times[i]) + "," + format_num(density.mean[i]) +
                                "," + format_num(density.std_err[i]) + "," +
                                std::to_string(density.replicates));
            detail::write_lines(path("density.csv"), lines);
            files.push_back("density.csv");

            const auto edges = uniform_bins(s.r_max, s.bins);
            std::vector<PairCorrelationEstimate> pair_by_time;
            std::vector<std::string> pc{
                "# second correlation function from ordered-pair counts (torus minimal-image"
                " metric); r in length units, q in 1/length^(2d)",
                "t,r_lo,r_hi,q_mean,q_stderr,replicates"};
            for (std::size_t ti = 0; ti < s.record_times.size(); ++ti) {
                std::vector<std::vector<Vec>> snaps;
                snaps.reserve(trajs.size());
                for (const auto& tr : trajs) snaps.push_back(tr.snapshots[ti]);
                auto est = pair_correlation_estimate(snaps, params.space, edges);
                for (std::size_t b = 0; b < est.mean.size(); ++b)
                    pc.push_back(format_num(s.record_times[ti]) + "," + format_num(est.bin_lo[b]) +
                                 "," + format_num(est.bin_hi[b]) + "," + format_num(est.mean[b]) +
                                 "," + format_num(est.std_err[b]) + "," +
                                 std::to_string(est.replicates));
                pair_by_time.push_back(std::move(est));
            }
            detail::write_lines(path("paircorr.csv"), pc);
            files.push_back("paircorr.csv");

            if (s.write_positions && s.experiment == "simulate") {
                std::vector<std::string> pos;
                pos.push_back("# raw particle positions; coordinates in length units on [0,L)");
                std::string header = "replicate,t,particle_id,x1";
                if (s.d >= 2) header += ",x2";
                if (s.d >= 3) header += ",x3";
                pos.push_back(header);
                for (std::size_t r = 0; r < trajs.size(); ++r)
                    for (std::size_t ti = 0; ti < s.record_times.size(); ++ti)
                        for (std::size_t pi = 0; pi < trajs[r].snapshots[ti].size(); ++pi) {
                            std::string row = std::to_string(r) + "," +
                                              format_num(s.record_times[ti]) + "," +
                                              std::to_string(pi) + "," +
                                              format_num(trajs[r].snapshots[ti][pi][0]);
                            for (int c = 1; c < s.d; ++c)
                                row += "," + format_num(trajs[r].snapshots[ti][pi][c]);
                            pos.push_back(row);
                        }
                detail::write_lines(path("positions.csv"), pos);
                files.push_back("positions.csv");
            }

            if (s.plots) {
                detail::write_lineplot(path("density.svg"), "mean density vs t", density.times,
                                       {density.mean}, {"simulated"});
                files.push_back("density.svg");
                if (!pair_by_time.empty()) {
                    const auto& last = pair_by_time.back();
                    std::vector<double> mid(last.bin_lo.size());
                    for (std::size_t i = 0; i < mid.size(); ++i)
                        mid[i] = 0.5 * (last.bin_lo[i] + last.bin_hi[i]);
                    detail::write_lineplot(path("paircorr.svg"), "pair correlation at final time",
                                           mid, {last.mean}, {"simulated"});
                    files.push_back("paircorr.svg");
                }
            }

            if (s.experiment == "compare") {
                if (s.d != 1) throw ParseError("compare requires d = 1 (spectral grid)");
                PeriodicGrid grid(1, s.n_grid, s.L);
                std::vector<double> model_k1(s.record_times.size());
                std::vector<std::vector<double>> model_q(s.record_times.size());
                if (s.kappa_minus == 0.0) {
                    const auto sol = contact_pair_spectral(
                        params, grid, s.init_z, std::vector<double>(grid.size(), s.init_z * s.init_z),
                        s.t_end, s.dt, false);
                    for (std::size_t i = 0; i < s.record_times.size(); ++i) {
                        model_k1[i] = sol.k1(s.record_times[i]);
                        model_q[i] = sol.q(s.record_times[i]);
                    }
                } else {
                    const auto states = bdlp_hierarchy_solve(
                        params, s.closure_scheme(), grid, s.init_z,
                        std::vector<double>(grid.size(), s.init_z * s.init_z), s.t_end, s.dt,
                        s.record_times);
                    for (std::size_t i = 0; i < s.record_times.size(); ++i) {
                        model_k1[i] = states[i].k1;
                        model_q[i] = states[i].q;
                    }
                }

                std::vector<std::string> cd{
                    "# z_score from estimator stderr only; the moment solution is treated as exact",
                    "t,k1_sim,k1_stderr,k1_model,z_score"};
                for (std::size_t i = 0; i < s.record_times.size(); ++i) {
                    const double se = std::max(density.std_err[i], 1e-300);
                    cd.push_back(format_num(s.record_times[i]) + "," + format_num(density.mean[i]) +
                                 "," + format_num(density.std_err[i]) + "," +
                                 format_num(model_k1[i]) + "," +
                                 format_num((density.mean[i] - model_k1[i]) / se));
                }
                detail::write_lines(path("compare_density.csv"), cd);
                files.push_back("compare_density.csv");

                std::vector<std::string> cq{
                    "# per-bin z_score from estimator stderr only; model q is the bin average"
                    " of the spectral field",
                    "t,r_lo,r_hi,q_sim,q_stderr,q_model,z_score"};
                for (std::size_t ti = 0; ti < s.record_times.size(); ++ti) {
                    const auto& est = pair_by_time[ti];
                    for (std::size_t b = 0; b < est.mean.size(); ++b) {
                        // bin average of the model field over matching separations
                        double acc = 0.0;
                        int cnt = 0;
                        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
                            const double r = std::abs(grid.point(gi)[0]);
                            if (r >= est.bin_lo[b] && r < est.bin_hi[b]) {
                                acc += model_q[ti][gi];
                                ++cnt;
                            }
                        }
                        const double qm = cnt ? acc / cnt : 0.0;
                        const double se = std::max(est.std_err[b], 1e-300);
                        cq.push_back(format_num(s.record_times[ti]) + "," + format_num(est.bin_lo[b]) +
                                     "," + format_num(est.bin_hi[b]) + "," + format_num(est.mean[b]) +
                                     "," + format_num(est.std_err[b]) + "," + format_num(qm) + "," +
                                     format_num((est.mean[b] - qm) / se));
                    }
                }
                detail::write_lines(path("compare_paircorr.csv"), cq);
                files.push_back("compare_paircorr.csv");
            }
        } else if (s.experiment == "moments") {
            if (s.d != 1) throw ParseError("moments requires d = 1 (spectral grid)");
            PeriodicGrid grid(1, s.n_grid, s.L);
            const double k1_0 = s.init_z;
            std::vector<double> q0(grid.size(), k1_0 * k1_0);

            std::vector<double> k1_out(s.record_times.size());
            std::vector<std::vector<double>> q_out(s.record_times.size());
            if (s.kappa_minus == 0.0) {
                const auto sol = contact_pair_spectral(params, grid, k1_0, q0, s.t_end, s.dt, true);
                for (std::size_t i = 0; i < s.record_times.size(); ++i) {
                    k1_out[i] = sol.k1(s.record_times[i]);
                    q_out[i] = sol.q(s.record_times[i]);
                }
            } else {
                const auto states = bdlp_hierarchy_solve(params, s.closure_scheme(), grid, k1_0, q0,
                                                         s.t_end, s.dt, s.record_times);
                for (std::size_t i = 0; i < s.record_times.size(); ++i) {
                    k1_out[i] = states[i].k1;
                    q_out[i] = states[i].q;
                }
            }

            std::vector<std::string> k1_lines{"# hierarchy density; t in model time, k1 in 1/length^d",
                                              "t,k1"};
            for (std::size_t i = 0; i < s.record_times.size(); ++i)
                k1_lines.push_back(format_num(s.record_times[i]) + "," + format_num(k1_out[i]));
            detail::write_lines(path("k1.csv"), k1_lines);
            files.push_back("k1.csv");

            std::vector<std::string> q_lines{
                "# pair correlation on the radial grid; r in length units, q in 1/length^(2d)",
                "t,r,q"};
            for (std::size_t i = 0; i < s.record_times.size(); ++i)
                for (int gi = 0; gi <= grid.n / 2; ++gi)
                    q_lines.push_back(format_num(s.record_times[i]) + "," +
                                      format_num(gi * grid.h) + "," + format_num(q_out[i][gi]));
            detail::write_lines(path("q.csv"), q_lines);
            files.push_back("q.csv");

            if (s.kappa_minus == 0.0) {
                // contact bounds: factorial and clustering records per time
                std::vector<std::string> bl{
                    "# analytic comparison bounds for contact correlation functions, in the"
                    " units of k^(n)",
                    "name,t,n,value"};
                const double a0 = params.a_plus.radial_eval(0.0);
                const double probe = params.a_plus.sigma;
                for (double t : s.record_times) {
                    for (int n : {1, 2}) {
                        const auto bounds = analytic_bounds(params, s.bound_C, a0, t, n, probe);
                        bl.push_back("factorial," + format_num(t) + "," + std::to_string(n) + "," +
                                     format_num(bounds.factorial));
                        bl.push_back("cluster," + format_num(t) + "," + std::to_string(n) + "," +
                                     format_num(bounds.cluster));
                        if (n == 2)
                            bl.push_back("cluster_two_point," + format_num(t) + ",2," +
                                         format_num(bounds.cluster_two_point));
                        bl.push_back("factorial_squared," + format_num(t) + "," + std::to_string(n) +
                                     "," + format_num(bounds.nsq));
                    }
                }
                detail::write_lines(path("bounds.csv"), bl);
                files.push_back("bounds.csv");
            }

            if (s.plots) {
                detail::write_lineplot(path("k1.svg"), "hierarchy density", s.record_times, {k1_out},
                                       {"k1"});
                files.push_back("k1.svg");
                std::vector<double> rr(static_cast<std::size_t>(grid.n / 2 + 1));
                for (int gi = 0; gi <= grid.n / 2; ++gi) rr[gi] = gi * grid.h;
                std::vector<double> q_last(q_out.back().begin(),
                                           q_out.back().begin() + grid.n / 2 + 1);
                detail::write_lineplot(path("q.svg"), "pair correlation at final time", rr, {q_last},
                                       {"q"});
                files.push_back("q.svg");
            }
        } else if (s.experiment == "verify") {
            std::vector<ConditionReport> reports;
            reports.push_back(check_semigroup_conditions(params, s.C));
            reports.push_back(check_stationary_conditions(params, s.C));

            Rng rng = make_rng(s.master_seed);
            const auto suite = default_relative_bound_suite();
            for (std::size_t i = 0; i < suite.size(); ++i) {
                const auto rb = relative_bound_check(params, s.C, suite[i], s.mc, rng);
                for (const auto& ineq : rb.inequalities) {
                    ConditionReport rep = ineq;
                    rep.name = "relbound.G" + std::to_string(i + 1) + "." + ineq.name;
                    reports.push_back(rep);
                }
            }
            OracleOptions oracle;  // Monte-Carlo budgets scale with analysis.mc
            oracle.symbol_mc = std::max<long>(200, s.mc);
            oracle.adjoint_outer = std::max<long>(100, s.mc / 2);
            for (auto rep : harmonic_oracle_suite(oracle)) reports.push_back(rep);

            std::vector<std::string> lines{
                "# condition verdicts; margin in each condition's natural units",
                "condition,pass,margin,witness"};
            std::vector<std::string> human;
            bool any_fail = false;
            for (const auto& rep : reports) {
                if (rep.verdict == Verdict::fail) any_fail = true;
                lines.push_back(rep.name + "," + verdict_name(rep.verdict) + "," +
                                format_num(rep.margin) + "," + detail::witness_string(rep, s.d));
                human.push_back(std::string(rep.verdict == Verdict::pass          ? "[pass] "
                                            : rep.verdict == Verdict::fail        ? "[FAIL] "
                                                                                  : "[inconclusive] ") +
                                rep.name + "  margin = " + format_num(rep.margin) +
                                (rep.note.empty() ? "" : "  (" + rep.note + ")"));
            }
            detail::write_lines(path("conditions.csv"), lines);
            files.push_back("conditions.csv");
            detail::write_lines(path("verify_report.txt"), human);
            files.push_back("verify_report.txt");
            if (any_fail) exit_code = 3;
        } else {
            throw ParseError("unknown experiment '" + s.experiment + "'");
        }
    } catch (const ExplosionError& e) {
        exit_code = 2;
        failure = e.what();
    } catch (const HierarchyError& e) {
        exit_code = 2;
        failure = e.what();
    } catch (const GridTooCoarseError& e) {
        exit_code = 2;
        failure = e.what();
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    nlohmann::json meta;
    meta["config"] = s.resolved();
    meta["version"] = "bdlp 0.1.0";
    meta["wall_time_s"] = wall;
    meta["files"] = files;
    meta["exit_code"] = exit_code;
    if (!failure.empty()) meta["failure"] = failure;
    std::ofstream out(path("run.json"));
    out << meta.dump(2) << '\n';
    return exit_code;
}

}  // namespace bdlp
