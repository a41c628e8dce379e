#include <smpc/config.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace smpc {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

KeyValueConfig parse_lines(std::istream& in, const std::string& origin) {
    KeyValueConfig kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected `key = value`, got `" + stripped + "`");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
        kv.set(key, value);
    }
    return kv;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        out.push_back(std::stod(t));
    }
    return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return parse_lines(in, path);
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
    std::istringstream in(text);
    return parse_lines(in, "<string>");
}

bool KeyValueConfig::has(const std::string& key) const {
    return entries_.count(key) > 0;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config key `" + key + "`: not a number: " + it->second);
    }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config key `" + key + "`: not an integer: " + it->second);
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config key `" + key + "`: not a boolean: " + v);
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key,
                                              const std::vector<int>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        try {
            out.push_back(std::stoi(t));
        } catch (const std::exception&) {
            throw std::runtime_error("config key `" + key + "`: not an integer list: " +
                                     it->second);
        }
    }
    return out;
}

std::uint64_t KeyValueConfig::hash() const {
    // FNV-1a, 64-bit.  entries_ is a std::map, so iteration is already in
    // sorted key order.
    std::uint64_t h = 14695981039346656037ULL;
    const auto mix = [&h](const std::string& s) {
        for (const char c : s) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [key, value] : entries_) {
        mix(key);
        mix("=");
        mix(value);
        mix("\n");
    }
    return h;
}

int ExperimentConfig::num_nodes() const {
    return static_cast<int>(std::llround(t_end / tau)) + 1;
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& kv) {
    ExperimentConfig ec;

    ec.benchmark.target_h = kv.get_double("mesh.h", ec.benchmark.target_h);
    ec.benchmark.gamma_out = kv.get_double("benchmark.gamma_out", ec.benchmark.gamma_out);
    ec.benchmark.wind_x = kv.get_double("benchmark.wind_x", ec.benchmark.wind_x);
    ec.benchmark.reaction = kv.get_double("benchmark.reaction", ec.benchmark.reaction);
    ec.benchmark.num_inputs = kv.get_int("benchmark.num_inputs", ec.benchmark.num_inputs);

    ec.tau = kv.get_double("time.tau", ec.tau);
    ec.t_end = kv.get_double("time.t_end", ec.t_end);
    ec.switch_period = kv.get_double("switching.period", ec.switch_period);
    ec.first_mode = kv.get_int("switching.first_mode", ec.first_mode);

    ec.cost_template.lambda = kv.get_double("cost.lambda", ec.cost_template.lambda);
    ec.cost_template.c_l1 = kv.get_double("cost.c_l1", ec.cost_template.c_l1);
    ec.cost_template.mu = kv.get_double("cost.mu", ec.cost_template.mu);
    ec.cost_template.u_lo = kv.get_double("cost.u_lo", ec.cost_template.u_lo);
    ec.cost_template.u_hi = kv.get_double("cost.u_hi", ec.cost_template.u_hi);

    ec.mpc.horizon_steps = kv.get_int("mpc.horizon_steps", ec.mpc.horizon_steps);
    ec.mpc.shift_steps = kv.get_int("mpc.shift_steps", ec.mpc.shift_steps);
    ec.mpc.num_steps = kv.get_int("mpc.num_steps", ec.mpc.num_steps);
    ec.mpc.pod_window = kv.get_int("mpc.pod_window", ec.mpc.pod_window);
    ec.mpc.pod_energy = kv.get_double("mpc.pod_energy", ec.mpc.pod_energy);
    ec.mpc.pod_max_rank = kv.get_int("mpc.pod_max_rank", ec.mpc.pod_max_rank);
    ec.mpc.certify = kv.get_bool("mpc.certify", ec.mpc.certify);
    ec.mpc.certify_slack = kv.get_double("mpc.certify_slack", ec.mpc.certify_slack);

    ec.mpc.tol_control.base = kv.get_double("mpc.tol_control.base", ec.mpc.tol_control.base);
    ec.mpc.tol_control.decay = kv.get_double("mpc.tol_control.decay", ec.mpc.tol_control.decay);
    ec.mpc.tol_control.floor = kv.get_double("mpc.tol_control.floor", ec.mpc.tol_control.floor);
    ec.mpc.tol_state.base = kv.get_double("mpc.tol_state.base", ec.mpc.tol_state.base);
    ec.mpc.tol_state.decay = kv.get_double("mpc.tol_state.decay", ec.mpc.tol_state.decay);
    ec.mpc.tol_state.floor = kv.get_double("mpc.tol_state.floor", ec.mpc.tol_state.floor);

    ec.mpc.optimizer.abs_tol = kv.get_double("optimizer.abs_tol", ec.mpc.optimizer.abs_tol);
    ec.mpc.optimizer.rel_tol = kv.get_double("optimizer.rel_tol", ec.mpc.optimizer.rel_tol);
    ec.mpc.optimizer.max_iterations =
        kv.get_int("optimizer.max_iterations", ec.mpc.optimizer.max_iterations);

    ec.estimator_fom_rom =
        parse_estimator(kv.get_string("mpc.estimator.fom_rom", estimator_name(ec.estimator_fom_rom)));
    ec.estimator_rom_rom =
        parse_estimator(kv.get_string("mpc.estimator.rom_rom", estimator_name(ec.estimator_rom_rom)));

    if (kv.has("mpc.tolerances"))
        ec.tolerances = parse_double_list(kv.get_string("mpc.tolerances", ""));

    ec.openloop_ranks = kv.get_int_list("openloop.ranks", ec.openloop_ranks);
    ec.openloop_start_node = kv.get_int("openloop.start_node", ec.openloop_start_node);
    ec.openloop_num_steps = kv.get_int("openloop.num_steps", ec.openloop_num_steps);

    ec.seed = static_cast<unsigned int>(kv.get_int("seed", static_cast<int>(ec.seed)));
    ec.out_dir = kv.get_string("out_dir", ec.out_dir);
    return ec;
}

ControlEstimator parse_estimator(const std::string& name) {
    if (name == "delta_a") return ControlEstimator::DeltaA;
    if (name == "delta_b") return ControlEstimator::DeltaB;
    if (name == "tilde_delta_b") return ControlEstimator::TildeDeltaB;
    throw std::runtime_error("unknown estimator name: " + name +
                             " (expected delta_a, delta_b, or tilde_delta_b)");
}

std::string estimator_name(ControlEstimator est) {
    switch (est) {
        case ControlEstimator::DeltaA: return "delta_a";
        case ControlEstimator::DeltaB: return "delta_b";
        case ControlEstimator::TildeDeltaB: return "tilde_delta_b";
    }
    return "delta_a";
}

}  // namespace smpc
