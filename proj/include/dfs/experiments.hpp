#pragma once

// Config-driven experiment harness behind the dfsctl command-line tool.
// A run config is one JSON object; an optional "sweep" array expands it into
// the Cartesian product of the listed field values. Every command writes its
// CSV files and a JSON summary into an output directory, atomically.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dfs/adiabatic.hpp"
#include "dfs/dfs_eigen.hpp"
#include "dfs/dicke.hpp"
#include "dfs/errors.hpp"
#include "dfs/lindblad.hpp"
#include "dfs/physical_params.hpp"
#include "dfs/schedules.hpp"

namespace dfs::experiments {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Invalid configuration. `field()` names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument("config field '" + field + "': " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class UnknownFigure : public std::invalid_argument {
public:
    explicit UnknownFigure(int id)
        : std::invalid_argument("unknown figure id " + std::to_string(id) + " (expected 3-8)") {}
};

enum class ExitCode : int { Ok = 0, Failure = 1, ConfigInvalid = 2, IntegrationFailure = 3, UnknownFigure = 4 };

enum class Command { Simulate, AdiabaticityScan, BlochMap, OptimizeQ };

inline std::string to_string(Command c) {
    switch (c) {
        case Command::Simulate: return "simulate";
        case Command::AdiabaticityScan: return "adiabaticity-scan";
        case Command::BlochMap: return "bloch-map";
        case Command::OptimizeQ: return "optimize-q";
    }
    return "unknown";
}

inline const std::set<std::string>& known_outputs() {
    static const std::set<std::string> names{"trajectory", "adiabaticity", "bloch_map", "summary"};
    return names;
}

struct RunConfig {
    std::string name;
    int n_atoms = 1;
    int k = 0;
    ScheduleKind scheme = ScheduleKind::Linear;
    double t_f = 40.0;
    std::optional<double> q;
    std::vector<Breakpoint> breakpoints;
    double nu = 0.0;
    double gamma_c = 1.0;
    std::optional<double> dt;
    std::size_t sample_every = 100;
    bool convergence_check = false;
    std::vector<std::string> outputs{"trajectory", "summary"};
    std::vector<double> mu_grid;
    double mu = 1.0;
    int theta_steps = 91;
    int phi_steps = 180;
    std::vector<double> q_grid;
    std::optional<PhysicalParams> physical;

    bool wants(const std::string& output) const {
        return std::find(outputs.begin(), outputs.end(), output) != outputs.end();
    }

    Schedule schedule() const {
        switch (scheme) {
            case ScheduleKind::Linear: return linear_schedule(t_f, n_atoms, k);
            case ScheduleKind::Quench: return quench_schedule(t_f, n_atoms, k, *q);
            case ScheduleKind::Piecewise: return piecewise_schedule(breakpoints, n_atoms, k);
        }
        throw std::logic_error("unhandled schedule kind");
    }

    JumpParams base() const {
        JumpParams p;
        p.gamma_c = gamma_c;
        p.nu = nu;
        return p;
    }

    IntegratorConfig integrator() const {
        IntegratorConfig c;
        c.dt = dt.value_or(0.0);
        c.convergence_check = convergence_check;
        return c;
    }
};

namespace detail {

inline std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double number_field(const json& j, const std::string& field) {
    if (!j.is_number()) throw ConfigError(field, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
    return v;
}

inline int int_field(const json& j, const std::string& field) {
    if (j.is_number_integer()) return j.get<int>();
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (v == std::floor(v) && std::abs(v) < 1e9) return static_cast<int>(v);
    }
    throw ConfigError(field, "expected an integer");
}

inline bool bool_field(const json& j, const std::string& field) {
    if (!j.is_boolean()) throw ConfigError(field, "expected true or false");
    return j.get<bool>();
}

/// Either an explicit array or {"start", "stop", "count"} (inclusive, evenly spaced).
inline std::vector<double> grid_field(const json& j, const std::string& field) {
    std::vector<double> out;
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number_field(j[i], field + "[" + std::to_string(i) + "]"));
        return out;
    }
    if (j.is_object()) {
        for (const auto& [key, value] : j.items())
            if (key != "start" && key != "stop" && key != "count")
                throw ConfigError(field + "." + key, "unknown key (expected start, stop, count)");
        if (!j.contains("start") || !j.contains("stop") || !j.contains("count"))
            throw ConfigError(field, "range form needs start, stop and count");
        const double start = number_field(j["start"], field + ".start");
        const double stop = number_field(j["stop"], field + ".stop");
        const int count = int_field(j["count"], field + ".count");
        if (count < 1) throw ConfigError(field + ".count", "must be >= 1");
        for (int i = 0; i < count; ++i)
            out.push_back(count == 1 ? start : start + (stop - start) * i / (count - 1));
        return out;
    }
    throw ConfigError(field, "expected an array or a {start, stop, count} object");
}

inline PhysicalParams parse_physical(const json& j) {
    if (!j.is_object()) throw ConfigError("physical", "expected an object");
    PhysicalParams p;
    const std::map<std::string, double*> reals{
        {"g", &p.g},           {"omega_1_abs", &p.omega_1_abs}, {"omega_2_abs", &p.omega_2_abs},
        {"delta_l", &p.delta_l}, {"delta_r", &p.delta_r},       {"kappa", &p.kappa},
        {"delta_c", &p.delta_c}, {"eta", &p.eta},               {"delta_up", &p.delta_up},
        {"delta_d", &p.delta_d},
    };
    for (const auto& [key, value] : j.items()) {
        const std::string field = "physical." + key;
        if (auto it = reals.find(key); it != reals.end()) {
            *it->second = number_field(value, field);
        } else if (key == "n_atoms") {
            throw ConfigError(field, "set n_atoms at the top level");
        } else {
            throw ConfigError(field, "unknown key");
        }
    }
    return p;
}

}  // namespace detail

/// Parses and validates one (already sweep-expanded) run config for `cmd`.
inline RunConfig parse_run_config(const json& j, Command cmd) {
    if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
    static const std::set<std::string> allowed{
        "name",  "n_atoms",  "k",        "scheme",      "t_f",         "q",       "breakpoints",
        "nu",    "gamma_c",  "dt",       "sample_every", "convergence_check", "outputs", "mu_grid",
        "mu",    "theta_steps", "phi_steps", "q_grid",  "physical",    "sweep"};
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw ConfigError(key, "unknown key");
    if (j.contains("sweep")) throw ConfigError("sweep", "must be expanded before parsing");

    RunConfig c;
    c.name = to_string(cmd);
    if (j.contains("name")) {
        if (!j["name"].is_string() || j["name"].get<std::string>().empty())
            throw ConfigError("name", "expected a nonempty string");
        c.name = j["name"].get<std::string>();
        if (c.name.find_first_of("/\\") != std::string::npos) throw ConfigError("name", "must not contain path separators");
    }

    if (!j.contains("n_atoms")) throw ConfigError("n_atoms", "required");
    c.n_atoms = detail::int_field(j["n_atoms"], "n_atoms");
    if (c.n_atoms < 1) throw ConfigError("n_atoms", "must be >= 1");

    if (j.contains("k")) {
        const json& k = j["k"];
        if (k.is_string()) {
            if (k.get<std::string>() != "half") throw ConfigError("k", "expected an integer or \"half\"");
            c.k = c.n_atoms / 2;
        } else {
            c.k = detail::int_field(k, "k");
        }
    }
    if (c.k < 0 || c.k > c.n_atoms) throw ConfigError("k", "must lie in [0, n_atoms]");

    if (j.contains("scheme")) {
        if (!j["scheme"].is_string()) throw ConfigError("scheme", "expected a string");
        const auto s = j["scheme"].get<std::string>();
        if (s == "linear") c.scheme = ScheduleKind::Linear;
        else if (s == "quench") c.scheme = ScheduleKind::Quench;
        else if (s == "piecewise") c.scheme = ScheduleKind::Piecewise;
        else throw ConfigError("scheme", "expected linear, quench or piecewise");
    }
    if (cmd == Command::OptimizeQ) {
        if (j.contains("scheme") && c.scheme != ScheduleKind::Quench)
            throw ConfigError("scheme", "optimize-q always uses the quench scheme");
        c.scheme = ScheduleKind::Quench;
    }

    if (j.contains("t_f")) c.t_f = detail::number_field(j["t_f"], "t_f");
    if (!(c.t_f > 0.0)) throw ConfigError("t_f", "must be > 0");

    if (j.contains("q")) {
        const json& q = j["q"];
        if (q.is_string()) {
            if (q.get<std::string>() != "sqrtN") throw ConfigError("q", "expected a number or \"sqrtN\"");
            c.q = std::sqrt(static_cast<double>(c.n_atoms));
        } else {
            c.q = detail::number_field(q, "q");
        }
        if (c.scheme != ScheduleKind::Quench) throw ConfigError("q", "only valid with the quench scheme");
        if (cmd == Command::OptimizeQ) throw ConfigError("q", "optimize-q takes q_grid instead");
        if (!(*c.q > 0.0) || !(*c.q < c.n_atoms)) throw ConfigError("q", "must satisfy 0 < q < n_atoms");
    }
    if (c.scheme == ScheduleKind::Quench && cmd == Command::Simulate && !c.q)
        throw ConfigError("q", "required for the quench scheme");

    if (j.contains("breakpoints")) {
        if (c.scheme != ScheduleKind::Piecewise) throw ConfigError("breakpoints", "only valid with the piecewise scheme");
        const json& b = j["breakpoints"];
        if (!b.is_array()) throw ConfigError("breakpoints", "expected an array of [t, mu] pairs");
        for (std::size_t i = 0; i < b.size(); ++i) {
            const std::string f = "breakpoints[" + std::to_string(i) + "]";
            if (!b[i].is_array() || b[i].size() != 2) throw ConfigError(f, "expected a [t, mu] pair");
            c.breakpoints.push_back({detail::number_field(b[i][0], f), detail::number_field(b[i][1], f)});
        }
        try {
            c.t_f = piecewise_schedule(c.breakpoints, c.n_atoms, c.k).t_f;
        } catch (const std::invalid_argument& e) {
            throw ConfigError("breakpoints", e.what());
        }
        if (j.contains("t_f") && detail::number_field(j["t_f"], "t_f") != c.t_f)
            throw ConfigError("t_f", "must equal the last breakpoint time");
    } else if (c.scheme == ScheduleKind::Piecewise && cmd == Command::Simulate) {
        throw ConfigError("breakpoints", "required for the piecewise scheme");
    }

    if (j.contains("nu")) c.nu = detail::number_field(j["nu"], "nu");
    if (j.contains("gamma_c")) {
        c.gamma_c = detail::number_field(j["gamma_c"], "gamma_c");
        if (!(c.gamma_c > 0.0)) throw ConfigError("gamma_c", "must be > 0");
    }
    if (j.contains("physical")) {
        if (j.contains("gamma_c") || j.contains("nu"))
            throw ConfigError("physical", "gamma_c and nu follow from the physical block; do not set both");
        c.physical = detail::parse_physical(j["physical"]);
        c.physical->n_atoms = c.n_atoms;
        try {
            const JumpParams eff = effective_params(*c.physical);
            c.gamma_c = eff.gamma_c;
            c.nu = eff.nu;
        } catch (const std::invalid_argument& e) {
            throw ConfigError("physical", e.what());
        }
    }

    if (j.contains("dt") && !j["dt"].is_null()) {
        c.dt = detail::number_field(j["dt"], "dt");
        if (!(*c.dt > 0.0)) throw ConfigError("dt", "must be > 0");
    }
    if (j.contains("sample_every")) {
        const int every = detail::int_field(j["sample_every"], "sample_every");
        if (every < 1) throw ConfigError("sample_every", "must be >= 1");
        c.sample_every = static_cast<std::size_t>(every);
    }
    if (j.contains("convergence_check")) c.convergence_check = detail::bool_field(j["convergence_check"], "convergence_check");

    if (j.contains("outputs")) {
        const json& o = j["outputs"];
        if (!o.is_array()) throw ConfigError("outputs", "expected an array");
        c.outputs.clear();
        for (const auto& item : o) {
            if (!item.is_string() || !known_outputs().count(item.get<std::string>()))
                throw ConfigError("outputs", "entries must be trajectory, adiabaticity, bloch_map or summary");
            c.outputs.push_back(item.get<std::string>());
        }
    }

    if (j.contains("mu_grid")) {
        c.mu_grid = detail::grid_field(j["mu_grid"], "mu_grid");
        if (c.mu_grid.empty()) throw ConfigError("mu_grid", "must not be empty");
    } else {
        for (int i = 1; i <= 200; ++i) c.mu_grid.push_back(i / 200.0);
    }
    for (double mu : c.mu_grid) {
        if (!(mu >= 0.0)) throw ConfigError("mu_grid", "values must be >= 0");
        if (cmd == Command::AdiabaticityScan && c.n_atoms > 1 && mu < kXiMuMin)
            throw ConfigError("mu_grid", "values below 1e-6 are singular for n_atoms > 1");
    }

    if (j.contains("mu")) c.mu = detail::number_field(j["mu"], "mu");
    if (!(c.mu >= 0.0)) throw ConfigError("mu", "must be >= 0");
    if (j.contains("theta_steps")) c.theta_steps = detail::int_field(j["theta_steps"], "theta_steps");
    if (j.contains("phi_steps")) c.phi_steps = detail::int_field(j["phi_steps"], "phi_steps");
    if (c.theta_steps < 2) throw ConfigError("theta_steps", "must be >= 2");
    if (c.phi_steps < 2) throw ConfigError("phi_steps", "must be >= 2");

    if (j.contains("q_grid")) {
        const json& g = j["q_grid"];
        if (g.is_object() && g.contains("q_over_N_step")) {
            for (const auto& [key, value] : g.items())
                if (key != "q_over_N_start" && key != "q_over_N_stop" && key != "q_over_N_step")
                    throw ConfigError("q_grid." + key, "unknown key");
            const double start = detail::number_field(g.value("q_over_N_start", json(0.05)), "q_grid.q_over_N_start");
            const double stop = detail::number_field(g.value("q_over_N_stop", json(0.30)), "q_grid.q_over_N_stop");
            const double step = detail::number_field(g["q_over_N_step"], "q_grid.q_over_N_step");
            if (!(step > 0.0)) throw ConfigError("q_grid.q_over_N_step", "must be > 0");
            const auto count = static_cast<int>(std::floor((stop - start) / step + 1e-9)) + 1;
            for (int i = 0; i < count; ++i) c.q_grid.push_back((start + i * step) * c.n_atoms);
        } else {
            c.q_grid = detail::grid_field(g, "q_grid");
        }
        if (c.q_grid.empty()) throw ConfigError("q_grid", "must not be empty");
    } else if (cmd == Command::OptimizeQ) {
        for (int i = 0; i <= 25; ++i) c.q_grid.push_back((0.05 + 0.01 * i) * c.n_atoms);
    }
    for (double q : c.q_grid)
        if (!(q > 0.0) || !(q < c.n_atoms)) throw ConfigError("q_grid", "every q must satisfy 0 < q < n_atoms");

    return c;
}

/// Fully resolved config, as recorded in summaries.
inline json resolved_json(const RunConfig& c, Command cmd) {
    json j;
    j["name"] = c.name;
    j["n_atoms"] = c.n_atoms;
    j["k"] = c.k;
    switch (cmd) {
        case Command::Simulate:
        case Command::OptimizeQ: {
            j["scheme"] = to_string(c.scheme);
            j["t_f"] = c.t_f;
            if (c.q) j["q"] = *c.q;
            if (!c.breakpoints.empty()) {
                json b = json::array();
                for (const auto& p : c.breakpoints) b.push_back({p.t, p.mu});
                j["breakpoints"] = b;
            }
            j["nu"] = c.nu;
            j["gamma_c"] = c.gamma_c;
            j["dt"] = c.dt ? json(*c.dt) : json(nullptr);
            j["sample_every"] = c.sample_every;
            j["convergence_check"] = c.convergence_check;
            if (cmd == Command::OptimizeQ) j["q_grid"] = c.q_grid;
            break;
        }
        case Command::AdiabaticityScan:
            j["scheme"] = to_string(c.scheme);
            j["t_f"] = c.t_f;
            if (c.q) j["q"] = *c.q;
            j["nu"] = c.nu;
            j["gamma_c"] = c.gamma_c;
            j["mu_grid"] = c.mu_grid;
            break;
        case Command::BlochMap:
            j["mu"] = c.mu;
            j["theta_steps"] = c.theta_steps;
            j["phi_steps"] = c.phi_steps;
            break;
    }
    if (cmd == Command::Simulate && std::find(c.outputs.begin(), c.outputs.end(), "bloch_map") != c.outputs.end()) {
        j["theta_steps"] = c.theta_steps;
        j["phi_steps"] = c.phi_steps;
    }
    j["outputs"] = c.outputs;
    if (c.physical) {
        const auto& p = *c.physical;
        j["physical"] = {{"g", p.g},         {"omega_1_abs", p.omega_1_abs}, {"omega_2_abs", p.omega_2_abs},
                         {"delta_l", p.delta_l}, {"delta_r", p.delta_r},     {"kappa", p.kappa},
                         {"delta_c", p.delta_c}, {"eta", p.eta}};
    }
    return j;
}

/// One expanded run: a label suffix (empty without a sweep) and its config.
struct SweepEntry {
    std::string tag;
    json config;
};

/// Cartesian expansion of "sweep": [{"field": name, "values": [...]}, ...].
/// Later fields vary fastest.
inline std::vector<SweepEntry> expand_sweep(const json& root) {
    if (!root.is_object()) throw ConfigError("<root>", "expected a JSON object");
    if (!root.contains("sweep")) return {{"", root}};
    const json& sweep = root["sweep"];
    if (!sweep.is_array() || sweep.empty()) throw ConfigError("sweep", "expected a nonempty array");

    std::vector<std::pair<std::string, json>> axes;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const std::string f = "sweep[" + std::to_string(i) + "]";
        const json& axis = sweep[i];
        if (!axis.is_object() || !axis.contains("field") || !axis.contains("values") || axis.size() != 2)
            throw ConfigError(f, "expected {\"field\": name, \"values\": [...]}");
        if (!axis["field"].is_string()) throw ConfigError(f + ".field", "expected a string");
        const auto field = axis["field"].get<std::string>();
        if (field == "sweep" || field == "name") throw ConfigError(f + ".field", "cannot sweep '" + field + "'");
        if (!seen.insert(field).second) throw ConfigError(f + ".field", "'" + field + "' swept twice");
        if (!axis["values"].is_array() || axis["values"].empty())
            throw ConfigError(f + ".values", "expected a nonempty array");
        axes.emplace_back(field, axis["values"]);
    }

    auto label = [](const json& v) {
        std::string s = v.is_number() ? detail::shortest(v.get<double>()) : v.is_string() ? v.get<std::string>() : v.dump();
        for (char& ch : s)
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-') ch = '_';
        return s;
    };

    std::vector<SweepEntry> out;
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
        SweepEntry e{"", root};
        e.config.erase("sweep");
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const json& v = axes[a].second[idx[a]];
            e.config[axes[a].first] = v;
            e.tag += (e.tag.empty() ? "" : "_") + axes[a].first + "-" + label(v);
        }
        out.push_back(std::move(e));
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < axes[a].second.size()) break;
            idx[a] = 0;
            if (a == 0) return out;
        }
    }
}

/// Writes via a temporary sibling and renames, so readers never see partial files.
inline void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

struct Context {
    fs::path output_dir = ".";
    unsigned jobs = 1;
    std::optional<double> dt_override;
    std::ostream* log = &std::clog;
};

struct RunOutcome {
    std::string run;
    json summary;
};

namespace detail {

inline std::string run_name(const RunConfig& c, const std::string& tag) {
    return tag.empty() ? c.name : c.name + "_" + tag;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline json validity_json(const PhysicalParams& p) {
    json arr = json::array();
    for (const auto& v : validity_report(p))
        arr.push_back({{"condition", v.condition},
                       {"ratio", std::isinf(v.ratio) ? json("inf") : json(v.ratio)},
                       {"pass", v.pass}});
    return arr;
}

inline json evolution_json(const EvolutionResult& r) {
    json j;
    j["final_fidelity"] = r.final_fidelity();
    j["final_purity"] = r.final_purity();
    j["dt_used"] = r.dt_used;
    j["steps"] = r.steps;
    j["convergence_flag"] = r.half_step_fidelity_gap ? json(r.converged) : json(nullptr);
    j["half_step_fidelity_gap"] = r.half_step_fidelity_gap ? json(*r.half_step_fidelity_gap) : json(nullptr);
    j["max_trace_drift"] = r.max_trace_drift;
    j["max_hermiticity_error"] = r.max_hermiticity_error;
    j["min_eigenvalue"] = r.min_eigenvalue;
    j["symmetrizations"] = r.symmetrizations;
    return j;
}

/// Fills xi_k and Xi_k on samples where the criterion is defined.
inline void attach_adiabaticity(std::vector<ObservableSample>& samples, const Schedule& s, const JumpParams& base) {
    for (auto& sample : samples) {
        if (s.n_atoms > 1 && sample.mu < kXiMuMin) continue;
        const double xi = xi_k(s.n_atoms, s.k, sample.mu).value;
        sample.xi_k = xi;
        sample.Xi_k = Xi(xi, s.mu_dot(sample.t), base.gamma_c, base.nu);
    }
}

/// Calls fn(i) for i in [0, count) on up to `jobs` workers; results keep index order.
template <typename Fn>
std::vector<RunOutcome> run_indexed(std::size_t count, unsigned jobs, Fn&& fn) {
    std::vector<RunOutcome> results(count);
    jobs = std::max(1u, jobs);
    std::size_t next = 0;
    while (next < count) {
        std::vector<std::future<void>> batch;
        for (unsigned w = 0; w < jobs && next < count; ++w, ++next) {
            const std::size_t i = next;
            batch.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                       [&, i] { results[i] = fn(i); }));
        }
        // Drain the whole batch before rethrowing so no worker outlives `results`.
        std::exception_ptr first;
        for (auto& f : batch) {
            try {
                f.get();
            } catch (...) {
                if (!first) first = std::current_exception();
            }
        }
        if (first) std::rethrow_exception(first);
    }
    return results;
}

/// Parses every entry up front so a bad sweep value fails before any work starts.
inline std::vector<RunConfig> parse_all(const std::vector<SweepEntry>& entries, Command cmd,
                                        const Context& ctx) {
    std::vector<RunConfig> out;
    for (const auto& e : entries) {
        RunConfig c = parse_run_config(e.config, cmd);
        if (ctx.dt_override) c.dt = *ctx.dt_override;
        out.push_back(std::move(c));
    }
    return out;
}

inline void finish(const Context& ctx, const RunConfig& c, const std::string& run, json& summary) {
    if (c.wants("summary")) write_atomic(ctx.output_dir / (run + "_summary.json"), summary.dump(2) + "\n");
    *ctx.log << "[" << summary["command"].get<std::string>() << "] " << run << " done\n";
}

}  // namespace detail

inline std::vector<RunOutcome> cmd_simulate(const json& root, const Context& ctx) {
    const auto entries = expand_sweep(root);
    if (ctx.dt_override && !(*ctx.dt_override > 0.0)) throw ConfigError("dt", "must be > 0");
    const auto configs = detail::parse_all(entries, Command::Simulate, ctx);

    return detail::run_indexed(entries.size(), ctx.jobs, [&](std::size_t i) {
        const RunConfig& c = configs[i];
        const std::string run = detail::run_name(c, entries[i].tag);
        const auto start = std::chrono::steady_clock::now();
        const Schedule schedule = c.schedule();
        EvolutionResult r = evolve(DensityMatrix::pure(ground_state(c.n_atoms)), schedule, c.base(), c.integrator(),
                                   c.sample_every);
        if (r.symmetrizations > 0)
            *ctx.log << "[simulate] " << run << ": symmetrized rho " << r.symmetrizations << " time(s)\n";
        if (!r.converged)
            *ctx.log << "[simulate] " << run << ": warning, dt/2 rerun moved the final fidelity by "
                     << *r.half_step_fidelity_gap << "\n";

        json summary;
        summary["command"] = "simulate";
        summary["run"] = run;
        summary["config"] = resolved_json(c, Command::Simulate);
        json result = detail::evolution_json(r);
        json files = json::object();
        if (c.wants("trajectory")) {
            if (c.wants("adiabaticity")) detail::attach_adiabaticity(r.samples, schedule, c.base());
            std::ostringstream csv;
            write_trajectory_csv(csv, r.samples);
            files["trajectory"] = run + "_trajectory.csv";
            write_atomic(ctx.output_dir / files["trajectory"].get<std::string>(), csv.str());
        }
        if (c.wants("bloch_map")) {
            std::ostringstream csv;
            write_bloch_map_csv(csv, bloch_overlap_map(r.final_state.rho, c.theta_steps, c.phi_steps));
            files["bloch_map"] = run + "_bloch_map.csv";
            write_atomic(ctx.output_dir / files["bloch_map"].get<std::string>(), csv.str());
        }
        for (auto& [key, value] : result.items()) summary[key] = value;
        summary["wall_time"] = detail::seconds_since(start);
        if (c.physical) summary["validity"] = detail::validity_json(*c.physical);
        summary["files"] = files;
        detail::finish(ctx, c, run, summary);
        return RunOutcome{run, summary};
    });
}

inline std::vector<RunOutcome> cmd_adiabaticity_scan(const json& root, const Context& ctx) {
    const auto entries = expand_sweep(root);
    const auto configs = detail::parse_all(entries, Command::AdiabaticityScan, ctx);

    return detail::run_indexed(entries.size(), ctx.jobs, [&](std::size_t i) {
        const RunConfig& c = configs[i];
        const std::string run = detail::run_name(c, entries[i].tag);
        const auto start = std::chrono::steady_clock::now();
        // mu_dot of the configured schedule; the quench and linear slopes are constant.
        double mu_dot = 1.0 / c.t_f;
        if (c.scheme == ScheduleKind::Quench && c.q) mu_dot = *c.q / (c.t_f * c.n_atoms);
        const auto report = adiabaticity_scan(c.n_atoms, c.k, c.mu_grid, mu_dot, c.gamma_c, c.nu);

        json summary;
        summary["command"] = "adiabaticity-scan";
        summary["run"] = run;
        summary["config"] = resolved_json(c, Command::AdiabaticityScan);
        const auto peak = std::max_element(report.xi.begin(), report.xi.end());
        summary["xi_kf"] = xi_kf(c.n_atoms, c.k);
        summary["mu_dot"] = mu_dot;
        summary["max_xi"] = *peak;
        summary["argmax_mu"] = report.mu_grid[static_cast<std::size_t>(peak - report.xi.begin())];
        summary["max_Xi"] = *std::max_element(report.Xi.begin(), report.Xi.end());
        std::ostringstream csv;
        write_adiabaticity_csv(csv, report);
        const std::string file = run + "_adiabaticity.csv";
        write_atomic(ctx.output_dir / file, csv.str());
        summary["wall_time"] = detail::seconds_since(start);
        summary["files"] = {{"adiabaticity", file}};
        detail::finish(ctx, c, run, summary);
        return RunOutcome{run, summary};
    });
}

inline std::vector<RunOutcome> cmd_bloch_map(const json& root, const Context& ctx) {
    const auto entries = expand_sweep(root);
    const auto configs = detail::parse_all(entries, Command::BlochMap, ctx);

    return detail::run_indexed(entries.size(), ctx.jobs, [&](std::size_t i) {
        const RunConfig& c = configs[i];
        const std::string run = detail::run_name(c, entries[i].tag);
        const auto start = std::chrono::steady_clock::now();
        const BlochMap map = bloch_overlap_map(eigenstate(c.n_atoms, c.k, c.mu), c.theta_steps, c.phi_steps);

        Eigen::Index row = 0, col = 0;
        const double peak = map.overlap.maxCoeff(&row, &col);
        json summary;
        summary["command"] = "bloch-map";
        summary["run"] = run;
        summary["config"] = resolved_json(c, Command::BlochMap);
        summary["max_overlap"] = peak;
        summary["argmax_theta"] = map.theta(row);
        summary["argmax_phi"] = map.phi(col);
        std::ostringstream csv;
        write_bloch_map_csv(csv, map);
        const std::string file = run + "_bloch_map.csv";
        write_atomic(ctx.output_dir / file, csv.str());
        summary["wall_time"] = detail::seconds_since(start);
        summary["files"] = {{"bloch_map", file}};
        detail::finish(ctx, c, run, summary);
        return RunOutcome{run, summary};
    });
}

/// q scans run one sweep entry at a time; `jobs` parallelizes inside each scan.
inline std::vector<RunOutcome> cmd_optimize_q(const json& root, const Context& ctx) {
    const auto entries = expand_sweep(root);
    const auto configs = detail::parse_all(entries, Command::OptimizeQ, ctx);
    std::vector<RunOutcome> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const RunConfig& c = configs[i];
        const std::string run = detail::run_name(c, entries[i].tag);
        const auto start = std::chrono::steady_clock::now();
        std::vector<json> details(c.q_grid.size());
        std::vector<double> sorted = c.q_grid;
        std::sort(sorted.begin(), sorted.end());
        auto runner = [&](const Schedule& s) {
            const EvolutionResult r =
                evolve(DensityMatrix::pure(ground_state(c.n_atoms)), s, c.base(), c.integrator(), 1u << 30);
            const auto pos = std::lower_bound(sorted.begin(), sorted.end(), s.q) - sorted.begin();
            details[static_cast<std::size_t>(pos)] = detail::evolution_json(r);
            return r.final_fidelity();
        };
        const QScanResult scan = optimize_q(c.n_atoms, c.k, c.t_f, c.q_grid, runner, ctx.jobs);

        json summary;
        summary["command"] = "optimize-q";
        summary["run"] = run;
        summary["config"] = resolved_json(c, Command::OptimizeQ);
        summary["q_best"] = scan.q_best;
        summary["q_best_over_N"] = scan.q_best / c.n_atoms;
        summary["best_final_fidelity"] = scan.best_fidelity;
        json points = json::array();
        bool all_converged = true;
        for (std::size_t p = 0; p < scan.table.size(); ++p) {
            json point{{"q", scan.table[p].q}};
            if (scan.table[p].final_fidelity) {
                for (auto& [key, value] : details[p].items()) point[key] = value;
                if (point["convergence_flag"].is_boolean() && !point["convergence_flag"].get<bool>())
                    all_converged = false;
            } else {
                point["error"] = scan.table[p].error;
            }
            points.push_back(point);
        }
        summary["convergence_flag"] = c.convergence_check ? json(all_converged) : json(nullptr);
        summary["points"] = points;
        std::ostringstream csv;
        write_q_scan_csv(csv, scan, c.n_atoms);
        const std::string file = run + "_qscan.csv";
        write_atomic(ctx.output_dir / file, csv.str());
        summary["wall_time"] = detail::seconds_since(start);
        summary["files"] = {{"qscan", file}};
        detail::finish(ctx, c, run, summary);
        out.push_back({run, summary});
    }
    return out;
}

/// Canonical configs behind each figure's dataset, as (command, config) pairs.
inline std::vector<std::pair<Command, json>> figure_configs(int id) {
    const json large_n = json::array({1, 2, 10, 20, 40, 80});
    switch (id) {
        case 3:
            return {{Command::BlochMap,
                     {{"name", "fig3"}, {"n_atoms", 20}, {"mu", 1.0}, {"theta_steps", 91}, {"phi_steps", 180},
                      {"sweep", {{{"field", "k"}, {"values", {0, 1, 5, 10}}}}}}}};
        case 4:
            return {{Command::Simulate,
                     {{"name", "fig4"}, {"n_atoms", 20}, {"k", 0}, {"scheme", "linear"}, {"nu", 0.0},
                      {"sample_every", 200}, {"outputs", {"trajectory", "summary"}},
                      {"sweep", {{{"field", "t_f"}, {"values", {20, 40, 80}}}}}}}};
        case 5:
            return {{Command::Simulate,
                     {{"name", "fig5"}, {"scheme", "linear"}, {"t_f", 40}, {"nu", 0.0}, {"sample_every", 200},
                      {"outputs", {"trajectory", "summary"}},
                      {"sweep",
                       {{{"field", "n_atoms"}, {"values", large_n}}, {{"field", "k"}, {"values", {0, "half"}}}}}}}};
        case 6:
            return {{Command::AdiabaticityScan,
                     {{"name", "fig6"}, {"scheme", "linear"}, {"t_f", 40}, {"mu_grid", {{"start", 0.005}, {"stop", 1.0}, {"count", 200}}},
                      {"sweep",
                       {{{"field", "n_atoms"}, {"values", {1, 2, 10, 80}}}, {{"field", "k"}, {"values", {0, "half"}}}}}}}};
        case 7:
            // The quench needs 0 < q < N: q = sqrt(N) excludes N = 1 and q = 2 excludes N = 1, 2.
            return {{Command::Simulate,
                     {{"name", "fig7_k0"}, {"k", 0}, {"scheme", "quench"}, {"q", "sqrtN"}, {"t_f", 40}, {"nu", 0.0},
                      {"sample_every", 200}, {"outputs", {"trajectory", "summary"}},
                      {"sweep", {{{"field", "n_atoms"}, {"values", {2, 10, 20, 40, 80}}}}}}},
                    {Command::Simulate,
                     {{"name", "fig7_half"}, {"k", "half"}, {"scheme", "quench"}, {"q", 2}, {"t_f", 40}, {"nu", 0.0},
                      {"sample_every", 200}, {"outputs", {"trajectory", "summary"}},
                      {"sweep", {{{"field", "n_atoms"}, {"values", {10, 20, 40, 80}}}}}}}};
        case 8:
            return {{Command::OptimizeQ,
                     {{"name", "fig8_qscan"}, {"k", 0}, {"t_f", 40}, {"nu", 0.0},
                      {"q_grid", {{"q_over_N_start", 0.05}, {"q_over_N_stop", 0.30}, {"q_over_N_step", 0.01}}},
                      {"sweep", {{{"field", "n_atoms"}, {"values", {10, 20, 40}}}}}}},
                    {Command::Simulate,
                     {{"name", "fig8_final"}, {"k", 0}, {"scheme", "quench"}, {"t_f", 40}, {"nu", 0.0},
                      {"sample_every", 1000000}, {"outputs", {"summary"}},
                      {"sweep",
                       {{{"field", "q"}, {"values", {"sqrtN", 2}}}, {{"field", "n_atoms"}, {"values", {10, 20, 40}}}}}}}};
        default: throw UnknownFigure(id);
    }
}

inline std::vector<RunOutcome> run_command(Command cmd, const json& config, const Context& ctx) {
    switch (cmd) {
        case Command::Simulate: return cmd_simulate(config, ctx);
        case Command::AdiabaticityScan: return cmd_adiabaticity_scan(config, ctx);
        case Command::BlochMap: return cmd_bloch_map(config, ctx);
        case Command::OptimizeQ: return cmd_optimize_q(config, ctx);
    }
    throw std::logic_error("unhandled command");
}

/// Writes a figure's dataset under <output_dir>/fig<id>/ plus an index.json.
inline std::vector<RunOutcome> cmd_reproduce_figure(int id, const Context& ctx) {
    const auto configs = figure_configs(id);
    Context sub = ctx;
    sub.output_dir = ctx.output_dir / ("fig" + std::to_string(id));
    std::vector<RunOutcome> all;
    json index;
    index["figure"] = id;
    index["runs"] = json::array();
    for (const auto& [cmd, config] : configs) {
        auto outcomes = run_command(cmd, config, sub);
        for (auto& o : outcomes) {
            index["runs"].push_back({{"command", to_string(cmd)}, {"run", o.run}, {"summary", o.run + "_summary.json"}});
            all.push_back(std::move(o));
        }
    }
    write_atomic(sub.output_dir / "index.json", index.dump(2) + "\n");
    return all;
}

inline json load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace dfs::experiments
