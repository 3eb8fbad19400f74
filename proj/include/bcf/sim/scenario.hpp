#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bcf/comm.hpp"
#include "bcf/consensus.hpp"
#include "bcf/errors.hpp"
#include "bcf/network.hpp"

// Scenario files: ini-style sections of key = value lines describing one
// multi-agent filtering run. Parsing is strict: unknown sections or keys are
// errors, as are missing required keys, so a typo cannot silently fall back
// to a default.

namespace bcf::sim {

enum class RunMode { Bcf, Hbcf };
enum class DynamicsModel { IdentityWalk, LinearGaussian, RevolveDrift };
enum class KernelBuild { Analytic, MonteCarlo };
enum class VisibilityKind { Always, RotatingArc, Intervals };
enum class TopologyKind { Ring, Complete, Path, Star, Random, Edges };

struct ScenarioConfig {
    // [scenario]
    std::size_t steps = 1;
    std::uint64_t seed = 0;
    RunMode mode = RunMode::Bcf;
    PoolKind pool = PoolKind::LogOP;
    std::string out_dir = "out";
    bool dump_densities = false;

    // [grid]
    std::vector<double> lower, upper;
    std::vector<std::size_t> cells;

    // [dynamics]
    DynamicsModel dynamics = DynamicsModel::IdentityWalk;
    KernelBuild kernel_build = KernelBuild::Analytic;
    std::vector<double> process_noise_std;
    std::size_t mc_samples = 256;
    double drift_a = 1.0; // linear-gaussian: x' = a x + c + noise
    double drift_c = 0.0;
    double dt = 1.0; // revolve-drift: phase' = phase + rate * dt + noise

    // [truth]
    std::vector<double> truth_initial;
    bool truth_stochastic = true;

    // [agents]
    std::size_t count = 1;
    double noise_variance_base = 1.0;
    double noise_variance_step = 0.0;
    double noise_variance_scale = 1.0;
    bool measurement_exchange = true;

    // [visibility]
    VisibilityKind visibility = VisibilityKind::Always;
    std::size_t arc_width = 1;
    double arc_rate = 1.0;
    std::map<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>> intervals;

    // [topology]
    TopologyKind topology = TopologyKind::Complete;
    WeightMethod weight_method = WeightMethod::Metropolis;
    double edge_prob = 0.3; // random topology: extra-edge probability
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    bool edges_symmetric = true;

    // [consensus]
    int n_loop = 1;
    bool n_loop_auto = false;
    double eps_cons = 0.1;
    double eps_comm_budget = 0.0;

    // [channel]
    ChannelConfig channel;
};

namespace detail {

struct RawScenario {
    // section -> (key -> (value, line number)), insertion-ordered sections
    std::map<std::string, std::map<std::string, std::pair<std::string, int>>> sections;
};

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline RawScenario tokenize(std::istream& in) {
    RawScenario raw;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("scenario line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("scenario line " + std::to_string(lineno) + ": empty section name");
            raw.sections.try_emplace(section);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("scenario line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw ConfigError("scenario line " + std::to_string(lineno) + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("scenario line " + std::to_string(lineno) + ": empty key");
        auto& sec = raw.sections[section];
        if (!sec.emplace(key, std::make_pair(value, lineno)).second)
            throw ConfigError("scenario line " + std::to_string(lineno) + ": duplicate key [" +
                              section + "] " + key);
    }
    return raw;
}

// Tracks key consumption inside one section so leftovers can be reported.
class SectionReader {
public:
    SectionReader(const RawScenario& raw, std::string name) : name_(std::move(name)) {
        const auto it = raw.sections.find(name_);
        if (it != raw.sections.end()) entries_ = &it->second;
    }

    bool present() const { return entries_ != nullptr; }

    bool has(const std::string& key) const {
        return entries_ && entries_->count(key) > 0;
    }

    std::string raw_value(const std::string& key) {
        const auto it = entries_->find(key);
        used_.insert(key);
        return it->second.first;
    }

    std::string get_string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        return raw_value(key);
    }

    std::string require_string(const std::string& key) {
        if (!has(key)) throw ConfigError(where(key) + ": required key missing");
        return raw_value(key);
    }

    double get_double(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        return parse_double(key, raw_value(key));
    }

    double require_double(const std::string& key) {
        return parse_double(key, require_string(key));
    }

    std::size_t get_size(const std::string& key, std::size_t fallback) {
        if (!has(key)) return fallback;
        return parse_size(key, raw_value(key));
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const std::string v = raw_value(key);
        try {
            std::size_t pos = 0;
            const auto out = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing");
            return out;
        } catch (const std::exception&) {
            throw ConfigError(where(key) + ": expected an unsigned integer, got '" + v + "'");
        }
    }

    int get_int(const std::string& key, int fallback) {
        if (!has(key)) return fallback;
        const std::string v = raw_value(key);
        try {
            std::size_t pos = 0;
            const int out = std::stoi(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing");
            return out;
        } catch (const std::exception&) {
            throw ConfigError(where(key) + ": expected an integer, got '" + v + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const std::string v = raw_value(key);
        if (v == "true") return true;
        if (v == "false") return false;
        throw ConfigError(where(key) + ": expected true or false, got '" + v + "'");
    }

    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) {
        if (!has(key)) return fallback;
        std::vector<double> out;
        for (const auto& item : split_list(raw_value(key)))
            out.push_back(parse_double(key, item));
        return out;
    }

    std::vector<std::size_t> get_sizes(const std::string& key, std::vector<std::size_t> fallback) {
        if (!has(key)) return fallback;
        std::vector<std::size_t> out;
        for (const auto& item : split_list(raw_value(key)))
            out.push_back(parse_size(key, item));
        return out;
    }

    // Pairs like "0-1,3-2": used for edges and visibility intervals.
    std::vector<std::pair<std::size_t, std::size_t>> get_pairs(const std::string& key) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& item : split_list(raw_value(key))) {
            const auto dash = item.find('-');
            if (dash == std::string::npos)
                throw ConfigError(where(key) + ": expected a-b pairs, got '" + item + "'");
            out.emplace_back(parse_size(key, trim(item.substr(0, dash))),
                             parse_size(key, trim(item.substr(dash + 1))));
        }
        return out;
    }

    // Remaining (unconsumed) keys, optionally those starting with a prefix.
    std::vector<std::string> unused_keys() const {
        std::vector<std::string> out;
        if (!entries_) return out;
        for (const auto& [k, v] : *entries_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

    void finish() const {
        const auto leftover = unused_keys();
        if (!leftover.empty())
            throw ConfigError("[" + name_ + "] unknown or inapplicable key '" + leftover.front() + "'");
    }

    std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

private:
    std::vector<std::string> split_list(const std::string& v) const {
        std::vector<std::string> out;
        std::string item;
        std::istringstream ss(v);
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    double parse_double(const std::string& key, const std::string& v) const {
        try {
            std::size_t pos = 0;
            const double out = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing");
            return out;
        } catch (const std::exception&) {
            throw ConfigError(where(key) + ": expected a number, got '" + v + "'");
        }
    }

    std::size_t parse_size(const std::string& key, const std::string& v) const {
        try {
            std::size_t pos = 0;
            const auto out = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing");
            return static_cast<std::size_t>(out);
        } catch (const std::exception&) {
            throw ConfigError(where(key) + ": expected a nonnegative integer, got '" + v + "'");
        }
    }

    std::string name_;
    const std::map<std::string, std::pair<std::string, int>>* entries_ = nullptr;
    std::set<std::string> used_;
};

} // namespace detail

inline ScenarioConfig parse_scenario(std::istream& in) {
    const auto raw = detail::tokenize(in);
    static const std::set<std::string> known = {"scenario", "grid",       "dynamics", "truth",
                                                "agents",   "visibility", "topology", "consensus",
                                                "channel"};
    for (const auto& [name, _] : raw.sections)
        if (!known.count(name)) throw ConfigError("unknown section [" + name + "]");

    ScenarioConfig cfg;

    {
        detail::SectionReader s(raw, "scenario");
        cfg.steps = s.get_size("steps", 1);
        if (cfg.steps == 0) throw ConfigError("[scenario] steps: must be at least 1");
        cfg.seed = s.get_u64("seed", 0);
        const std::string mode = s.get_string("mode", "bcf");
        if (mode == "bcf")
            cfg.mode = RunMode::Bcf;
        else if (mode == "hbcf")
            cfg.mode = RunMode::Hbcf;
        else
            throw ConfigError("[scenario] mode: expected bcf or hbcf, got '" + mode + "'");
        const std::string pool = s.get_string("pool", "logop");
        if (pool == "linop")
            cfg.pool = PoolKind::LinOP;
        else if (pool == "logop")
            cfg.pool = PoolKind::LogOP;
        else
            throw ConfigError("[scenario] pool: expected linop or logop, got '" + pool + "'");
        cfg.out_dir = s.get_string("out_dir", cfg.out_dir);
        cfg.dump_densities = s.get_bool("dump_densities", false);
        s.finish();
    }

    {
        detail::SectionReader s(raw, "grid");
        if (!s.present()) throw ConfigError("missing required section [grid]");
        cfg.lower = s.get_doubles("lower", {});
        cfg.upper = s.get_doubles("upper", {});
        cfg.cells = s.get_sizes("cells", {});
        if (cfg.lower.empty() || cfg.lower.size() != cfg.upper.size() ||
            cfg.lower.size() != cfg.cells.size())
            throw ConfigError("[grid] lower/upper/cells: must be present with equal lengths");
        s.finish();
    }
    const std::size_t dims = cfg.lower.size();

    {
        detail::SectionReader s(raw, "dynamics");
        const std::string model = s.get_string("model", "identity-walk");
        if (model == "identity-walk")
            cfg.dynamics = DynamicsModel::IdentityWalk;
        else if (model == "linear-gaussian")
            cfg.dynamics = DynamicsModel::LinearGaussian;
        else if (model == "revolve-drift")
            cfg.dynamics = DynamicsModel::RevolveDrift;
        else
            throw ConfigError("[dynamics] model: unknown model '" + model + "'");
        const std::string kb = s.get_string("kernel", "analytic");
        if (kb == "analytic")
            cfg.kernel_build = KernelBuild::Analytic;
        else if (kb == "monte-carlo")
            cfg.kernel_build = KernelBuild::MonteCarlo;
        else
            throw ConfigError("[dynamics] kernel: expected analytic or monte-carlo, got '" + kb + "'");
        cfg.process_noise_std = s.get_doubles("process_noise_std", {});
        if (cfg.process_noise_std.size() == 1 && dims > 1)
            cfg.process_noise_std.assign(dims, cfg.process_noise_std[0]);
        if (cfg.process_noise_std.size() != dims)
            throw ConfigError("[dynamics] process_noise_std: need one value (or one per dimension)");
        for (double v : cfg.process_noise_std)
            if (!(v > 0.0))
                throw ConfigError("[dynamics] process_noise_std: values must be positive");
        cfg.mc_samples = s.get_size("mc_samples", 256);
        if (cfg.mc_samples == 0) throw ConfigError("[dynamics] mc_samples: must be at least 1");
        cfg.drift_a = s.get_double("drift_a", 1.0);
        cfg.drift_c = s.get_double("drift_c", 0.0);
        cfg.dt = s.get_double("dt", 1.0);
        if (cfg.dynamics == DynamicsModel::LinearGaussian && dims != 1)
            throw ConfigError("[dynamics] model: linear-gaussian needs a 1-D grid");
        if (cfg.dynamics == DynamicsModel::RevolveDrift && dims != 2)
            throw ConfigError("[dynamics] model: revolve-drift needs a 2-D (phase, rate) grid");
        s.finish();
    }

    {
        detail::SectionReader s(raw, "truth");
        if (!s.present()) throw ConfigError("missing required section [truth]");
        cfg.truth_initial = s.get_doubles("initial", {});
        if (cfg.truth_initial.size() != dims)
            throw ConfigError("[truth] initial: need one coordinate per grid dimension");
        for (std::size_t d = 0; d < dims; ++d)
            if (cfg.truth_initial[d] < cfg.lower[d] || cfg.truth_initial[d] > cfg.upper[d])
                throw ConfigError("[truth] initial: coordinate outside the grid box");
        cfg.truth_stochastic = s.get_bool("stochastic", true);
        s.finish();
    }

    {
        detail::SectionReader s(raw, "agents");
        if (!s.present()) throw ConfigError("missing required section [agents]");
        cfg.count = s.get_size("count", 0);
        if (cfg.count == 0) throw ConfigError("[agents] count: must be at least 1");
        cfg.noise_variance_base = s.get_double("noise_variance_base", 1.0);
        cfg.noise_variance_step = s.get_double("noise_variance_step", 0.0);
        cfg.noise_variance_scale = s.get_double("noise_variance_scale", 1.0);
        if (!(cfg.noise_variance_base > 0.0) || !(cfg.noise_variance_scale > 0.0) ||
            cfg.noise_variance_step < 0.0)
            throw ConfigError("[agents] noise_variance_*: base and scale must be positive, step nonnegative");
        cfg.measurement_exchange = s.get_bool("measurement_exchange", true);
        s.finish();
    }

    {
        detail::SectionReader s(raw, "visibility");
        const std::string kind = s.get_string("kind", "always");
        if (kind == "always")
            cfg.visibility = VisibilityKind::Always;
        else if (kind == "rotating-arc")
            cfg.visibility = VisibilityKind::RotatingArc;
        else if (kind == "intervals")
            cfg.visibility = VisibilityKind::Intervals;
        else
            throw ConfigError("[visibility] kind: unknown kind '" + kind + "'");
        if (cfg.visibility == VisibilityKind::RotatingArc) {
            cfg.arc_width = s.get_size("arc_width", 0);
            if (cfg.arc_width == 0 || cfg.arc_width > cfg.count)
                throw ConfigError("[visibility] arc_width: need 1 <= arc_width <= agent count");
            cfg.arc_rate = s.get_double("arc_rate", 1.0);
        }
        if (cfg.visibility == VisibilityKind::Intervals) {
            for (const std::string& key : s.unused_keys()) {
                if (key.rfind("agent.", 0) != 0)
                    throw ConfigError("[visibility] unknown key '" + key + "'");
                std::size_t id = 0;
                try {
                    id = std::stoull(key.substr(6));
                } catch (const std::exception&) {
                    throw ConfigError("[visibility] " + key + ": bad agent id");
                }
                if (id >= cfg.count)
                    throw ConfigError("[visibility] " + key + ": agent id out of range");
                cfg.intervals[id] = s.get_pairs(key);
                for (const auto& [from, to] : cfg.intervals[id])
                    if (to < from)
                        throw ConfigError("[visibility] " + key + ": interval end before start");
            }
        }
        s.finish();
    }

    {
        detail::SectionReader s(raw, "topology");
        const std::string kind = s.get_string("kind", "complete");
        if (kind == "ring")
            cfg.topology = TopologyKind::Ring;
        else if (kind == "complete")
            cfg.topology = TopologyKind::Complete;
        else if (kind == "path")
            cfg.topology = TopologyKind::Path;
        else if (kind == "star")
            cfg.topology = TopologyKind::Star;
        else if (kind == "random")
            cfg.topology = TopologyKind::Random;
        else if (kind == "edges")
            cfg.topology = TopologyKind::Edges;
        else
            throw ConfigError("[topology] kind: unknown kind '" + kind + "'");
        const std::string wm = s.get_string("weights", "metropolis");
        if (wm == "metropolis")
            cfg.weight_method = WeightMethod::Metropolis;
        else if (wm == "uniform-inclusive")
            cfg.weight_method = WeightMethod::UniformInclusive;
        else
            throw ConfigError("[topology] weights: expected metropolis or uniform-inclusive");
        cfg.edge_prob = s.get_double("edge_prob", 0.3);
        if (cfg.topology == TopologyKind::Edges) {
            if (!s.has("list")) throw ConfigError("[topology] list: required for kind=edges");
            cfg.edges = s.get_pairs("list");
            cfg.edges_symmetric = s.get_bool("symmetric", true);
            for (const auto& [a, b] : cfg.edges)
                if (a >= cfg.count || b >= cfg.count)
                    throw ConfigError("[topology] list: edge endpoint out of range");
        }
        s.finish();
    }

    {
        detail::SectionReader s(raw, "consensus");
        const std::string nl = s.get_string("n_loop", "1");
        if (nl == "auto") {
            cfg.n_loop_auto = true;
            cfg.n_loop = 0;
        } else {
            try {
                cfg.n_loop = std::stoi(nl);
            } catch (const std::exception&) {
                throw ConfigError("[consensus] n_loop: expected an integer or auto");
            }
            if (cfg.n_loop < 0) throw ConfigError("[consensus] n_loop: must be nonnegative");
        }
        cfg.eps_cons = s.get_double("eps_cons", 0.1);
        if (!(cfg.eps_cons > 0.0)) throw ConfigError("[consensus] eps_cons: must be positive");
        cfg.eps_comm_budget = s.get_double("eps_comm_budget", 0.0);
        if (cfg.eps_comm_budget < 0.0)
            throw ConfigError("[consensus] eps_comm_budget: must be nonnegative");
        s.finish();
    }

    {
        detail::SectionReader s(raw, "channel");
        const std::string codec = s.get_string("codec", "lossless");
        if (codec == "lossless")
            cfg.channel.codec = Codec::Lossless;
        else if (codec == "gaussian-sum")
            cfg.channel.codec = Codec::GaussianSum;
        else if (codec == "particles")
            cfg.channel.codec = Codec::Particles;
        else
            throw ConfigError("[channel] codec: unknown codec '" + codec + "'");
        cfg.channel.eps_comm = s.get_double("eps_comm", 0.0);
        cfg.channel.n_g = s.get_int("n_g", 2);
        cfg.channel.n_g_cap = s.get_int("n_g_cap", 8);
        cfg.channel.particles = s.get_int("particles", 1000);
        try {
            cfg.channel.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("[channel] ") + e.what());
        }
        s.finish();
    }

    return cfg;
}

inline ScenarioConfig parse_scenario_text(const std::string& text) {
    std::istringstream in(text);
    return parse_scenario(in);
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    return parse_scenario(in);
}

} // namespace bcf::sim
