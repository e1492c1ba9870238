#include "qmfg/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace qmfg {

using nlohmann::json;

namespace {

std::vector<std::string> split_dotted(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    std::string item;
    while (std::getline(ss, item, '.')) parts.push_back(item);
    return parts;
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the last component of a dotted key, found by walking the quoted key
// names in order. Good enough for hand-written configs; 0 when not found.
std::size_t locate_key(const std::string& text, const std::string& dotted) {
    std::size_t pos = 0;
    for (const std::string& part : split_dotted(dotted)) {
        const std::string quoted = "\"" + part + "\"";
        for (;;) {
            pos = text.find(quoted, pos);
            if (pos == std::string::npos) return 0;
            std::size_t after = pos + quoted.size();
            while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
            if (after < text.size() && text[after] == ':') break;
            pos += quoted.size();
        }
        pos += quoted.size();
    }
    return line_of_offset(text, pos);
}

class Reader {
public:
    Reader(const std::string& text, std::string source, std::map<std::string, std::string> overridden)
        : text_(text), source_(std::move(source)), overridden_(std::move(overridden)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        std::ostringstream msg;
        if (auto it = overridden_.find(key); it != overridden_.end()) {
            msg << "--set " << it->second << ": " << key << ": " << message;
        } else if (const std::size_t line = key.empty() ? 0 : locate_key(text_, key); line > 0) {
            msg << source_ << ":" << line << ": " << key << ": " << message;
        } else {
            msg << source_ << ": " << (key.empty() ? "" : key + ": ") << message;
        }
        throw ConfigError(msg.str());
    }

    void require_keys(const json& obj, const std::string& prefix, std::initializer_list<const char*> allowed) const {
        if (!obj.is_object()) fail(prefix, "expected an object");
        for (const auto& [k, v] : obj.items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
                fail(prefix.empty() ? k : prefix + "." + k, "unknown key");
            }
        }
    }

    double number(const json& obj, const std::string& prefix, const char* key, std::optional<double> fallback) const {
        const std::string full = prefix + "." + key;
        if (!obj.contains(key)) {
            if (fallback) return *fallback;
            fail(full, "missing required number");
        }
        const json& v = obj.at(key);
        if (!v.is_number()) fail(full, "expected a number");
        return v.get<double>();
    }

    std::size_t count(const json& obj, const std::string& prefix, const char* key, std::size_t fallback) const {
        const std::string full = prefix.empty() ? key : prefix + "." + key;
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) fail(full, "expected a nonnegative integer");
        return v.get<std::size_t>();
    }

private:
    const std::string& text_;
    std::string source_;
    std::map<std::string, std::string> overridden_;
};

void apply_override(json& root, const std::string& assignment, std::map<std::string, std::string>& overridden,
                    const std::string& source) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set " + assignment + ": expected key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &root;
    const auto parts = split_dotted(key);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].empty()) throw ConfigError("--set " + assignment + ": empty key component");
        if (node->is_null()) *node = json::object();  // a missing section is created
        if (!node->is_object()) throw ConfigError("--set " + assignment + ": " + key + " does not name an object path in " + source);
        if (i + 1 == parts.size()) (*node)[parts[i]] = value;
        else node = &(*node)[parts[i]];
    }
    overridden[key] = assignment;
}

Emit parse_emit(const Reader& rd, const std::string& name) {
    if (name == "paths_csv") return Emit::PathsCsv;
    if (name == "summary_json") return Emit::SummaryJson;
    if (name == "gap_csv") return Emit::GapCsv;
    if (name == "plotdata") return Emit::PlotData;
    rd.fail("emit", "unknown emit kind '" + name + "' (expected paths_csv, summary_json, gap_csv, plotdata)");
}

// Validation messages from the library start with the dotted key they concern.
std::string leading_key(const std::string& message) {
    const std::size_t space = message.find(' ');
    const std::string head = message.substr(0, space);
    return head.find('.') != std::string::npos ? head : std::string{};
}

// The message without its leading key, which the anchor already shows.
std::string without_key(const std::string& message) {
    const std::string key = leading_key(message);
    return key.empty() ? message : message.substr(key.size() + 1);
}

}  // namespace

SimulationConfig RunConfig::simulation_config() const {
    SimulationConfig c;
    c.grid = solver.grid;
    c.seed = seed;
    if (simulation) {
        c.n_agents = simulation->n_agents;
        c.n_trials = simulation->n_trials;
        c.workers = simulation->workers;
        c.substeps = simulation->substeps;
    }
    return c;
}

MGrid parse_m_grid(const std::string& text) {
    MGrid g;
    char c1 = 0;
    char c2 = 0;
    std::istringstream in(text);
    if (!(in >> g.start >> c1 >> g.stop >> c2 >> g.step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
        throw ConfigError("m grid '" + text + "': expected start:stop:step");
    }
    if (!(g.step > 0.0) || !(g.stop >= g.start) || !(g.start >= 0.0)) {
        throw ConfigError("m grid '" + text + "': need 0 <= start <= stop and step > 0");
    }
    return g;
}

RunConfig parse_config(const std::string& text, const std::string& source, const std::vector<std::string>& overrides) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
        const std::size_t line = line_of_offset(text, offset);
        const std::size_t line_start = text.rfind('\n', offset == 0 ? 0 : offset - 1);
        const std::size_t col = offset - (line_start == std::string::npos ? 0 : line_start + 1) + 1;
        std::ostringstream msg;
        msg << source << ":" << line << ":" << col << ": invalid JSON (" << e.what() << ")";
        throw ConfigError(msg.str());
    }
    std::map<std::string, std::string> overridden;
    for (const std::string& o : overrides) apply_override(root, o, overridden, source);
    const Reader rd(text, source, overridden);

    rd.require_keys(root, "",
                    {"schema_version", "model", "solver", "simulation", "study", "check", "seed", "output_dir", "emit",
                     "max_cells"});
    if (!root.contains("schema_version")) rd.fail("", "missing schema_version");
    if (!root["schema_version"].is_number_integer() || root["schema_version"].get<int>() != kConfigSchemaVersion) {
        rd.fail("schema_version", "unsupported schema version (expected " + std::to_string(kConfigSchemaVersion) + ")");
    }

    RunConfig cfg;
    if (!root.contains("model")) rd.fail("", "missing model section");
    const json& m = root["model"];
    rd.require_keys(m, "model", {"a", "b", "r", "sigma", "q", "alpha", "mu0", "V0", "T"});
    ModelParams& p = cfg.model;
    p.a = rd.number(m, "model", "a", std::nullopt);
    p.b = rd.number(m, "model", "b", std::nullopt);
    p.r = rd.number(m, "model", "r", std::nullopt);
    p.sigma = rd.number(m, "model", "sigma", std::nullopt);
    p.q = rd.number(m, "model", "q", std::nullopt);
    p.mu0 = rd.number(m, "model", "mu0", std::nullopt);
    p.V0 = rd.number(m, "model", "V0", std::nullopt);
    p.T = rd.number(m, "model", "T", std::nullopt);
    try {
        p.alpha = QuantileLevel(rd.number(m, "model", "alpha", std::nullopt));
    } catch (const DomainError& e) {
        rd.fail("model.alpha", e.what());
    }
    try {
        validate(p);
    } catch (const ValidationError& e) {
        rd.fail(leading_key(e.what()), without_key(e.what()));
    }

    const json solver = root.value("solver", json::object());
    rd.require_keys(solver, "solver", {"n_steps", "picard_tol", "max_iters", "damping"});
    const std::size_t n_steps = rd.count(solver, "solver", "n_steps", 2000);
    if (n_steps < 2) rd.fail("solver.n_steps", "must be >= 2");
    cfg.solver.grid = TimeGrid(p.T, n_steps);
    cfg.solver.picard_tol = rd.number(solver, "solver", "picard_tol", 1e-10);
    cfg.solver.max_iters = rd.count(solver, "solver", "max_iters", 200);
    cfg.solver.damping = rd.number(solver, "solver", "damping", 0.0);
    try {
        validate(cfg.solver, p);
    } catch (const std::invalid_argument& e) {
        rd.fail(leading_key(e.what()), without_key(e.what()));
    }

    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned()) rd.fail("seed", "expected a nonnegative integer");
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    if (root.contains("output_dir")) {
        if (!root["output_dir"].is_string()) rd.fail("output_dir", "expected a string");
        cfg.output_dir = root["output_dir"].get<std::string>();
    }
    if (root.contains("max_cells")) {
        if (!root["max_cells"].is_number() || !(root["max_cells"].get<double>() > 0.0)) {
            rd.fail("max_cells", "expected a positive number");
        }
        cfg.max_cells = root["max_cells"].get<double>();
    }
    if (root.contains("emit")) {
        if (!root["emit"].is_array()) rd.fail("emit", "expected an array of strings");
        cfg.emit.clear();
        for (const json& e : root["emit"]) {
            if (!e.is_string()) rd.fail("emit", "expected an array of strings");
            cfg.emit.insert(parse_emit(rd, e.get<std::string>()));
        }
    }

    if (root.contains("simulation")) {
        const json& s = root["simulation"];
        rd.require_keys(s, "simulation", {"n_agents", "n_trials", "workers", "substeps"});
        SimulationSection sec;
        sec.n_agents = rd.count(s, "simulation", "n_agents", 2);
        sec.n_trials = rd.count(s, "simulation", "n_trials", 1);
        sec.workers = rd.count(s, "simulation", "workers", 1);
        sec.substeps = rd.count(s, "simulation", "substeps", 1);
        cfg.simulation = sec;
        try {
            validate(cfg.simulation_config());
        } catch (const ValidationError& e) {
            rd.fail(leading_key(e.what()), without_key(e.what()));
        }
    }

    if (root.contains("study")) {
        const json& s = root["study"];
        rd.require_keys(s, "study", {"n_list", "trials"});
        StudySection sec;
        if (!s.contains("n_list") || !s["n_list"].is_array()) rd.fail("study.n_list", "expected an array of integers");
        for (const json& v : s["n_list"]) {
            if (!v.is_number_integer() || v.get<long long>() < 2) rd.fail("study.n_list", "entries must be integers >= 2");
            sec.n_list.push_back(v.get<std::size_t>());
        }
        if (sec.n_list.empty()) rd.fail("study.n_list", "must not be empty");
        for (std::size_t i = 1; i < sec.n_list.size(); ++i) {
            if (!(sec.n_list[i] > sec.n_list[i - 1])) rd.fail("study.n_list", "must be strictly increasing");
        }
        sec.trials = rd.count(s, "study", "trials", 1);
        if (sec.trials < 1) rd.fail("study.trials", "must be >= 1");
        cfg.study = sec;
    }

    if (root.contains("check")) {
        const json& c = root["check"];
        rd.require_keys(c, "check", {"m", "m_grid"});
        if (c.contains("m")) {
            const double mv = rd.number(c, "check", "m", std::nullopt);
            if (!(mv >= 0.0)) rd.fail("check.m", "must be nonnegative");
            cfg.check.m = mv;
        }
        if (c.contains("m_grid")) {
            const json& g = c["m_grid"];
            try {
                if (g.is_string()) {
                    cfg.check.grid = parse_m_grid(g.get<std::string>());
                } else {
                    rd.require_keys(g, "check.m_grid", {"start", "stop", "step"});
                    MGrid mg{rd.number(g, "check.m_grid", "start", std::nullopt),
                             rd.number(g, "check.m_grid", "stop", std::nullopt),
                             rd.number(g, "check.m_grid", "step", std::nullopt)};
                    if (!(mg.step > 0.0) || !(mg.stop >= mg.start) || !(mg.start >= 0.0)) {
                        rd.fail("check.m_grid", "need 0 <= start <= stop and step > 0");
                    }
                    cfg.check.grid = mg;
                }
            } catch (const ConfigError& e) {
                if (g.is_string()) rd.fail("check.m_grid", e.what());
                throw;
            }
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string(), overrides);
}

}  // namespace qmfg
