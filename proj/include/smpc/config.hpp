#ifndef SMPC_CONFIG_HPP
#define SMPC_CONFIG_HPP

// Flat key-value configuration with dotted section keys, e.g.
//
//     # benchmark discretization
//     mesh.h = 0.2
//     time.tau = 0.05
//     cost.lambda = 1e-2
//     mpc.estimator.rom_rom = tilde_delta_b
//
// Lines are `key = value`; `#` starts a comment; whitespace is trimmed.
// Later assignments override earlier ones, so CLI overrides can simply be
// applied after parsing the file.  A stable FNV-1a hash over the sorted
// entries identifies a configuration in output artifacts.

#include <smpc/mpc.hpp>
#include <smpc/two_rooms.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace smpc {

/// Ordered flat string map with typed accessors.
class KeyValueConfig {
public:
    /// Parses `key = value` lines from a file.  Throws std::runtime_error on
    /// unreadable files or malformed lines.
    static KeyValueConfig from_file(const std::string& path);

    /// Parses the same syntax from a string (used by tests and defaults).
    static KeyValueConfig from_string(const std::string& text);

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated list of integers.
    std::vector<int> get_int_list(const std::string& key,
                                  const std::vector<int>& fallback) const;

    /// FNV-1a 64-bit hash over the sorted `key=value\n` serialization.
    std::uint64_t hash() const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

/// All experiment knobs with benchmark defaults; every field can be
/// overridden through the key-value file (keys documented in the README).
struct ExperimentConfig {
    BenchmarkConfig benchmark;      ///< geometry/coefficients; mesh.h overrides target_h.
    double tau = 0.05;              ///< time-step size.
    double t_end = 10.0;            ///< simulation end time.
    double switch_period = 1.25;    ///< alternating switching period.
    int first_mode = 1;

    CostConfig cost_template;       ///< scalar cost parameters (tracking data filled later).

    MPCConfig mpc;                  ///< shared MPC settings (estimator set per scheme).
    ControlEstimator estimator_fom_rom = ControlEstimator::DeltaA;
    ControlEstimator estimator_rom_rom = ControlEstimator::TildeDeltaB;
    std::vector<double> tolerances = {1e-2, 1e-3};  ///< epsilon sweep for the comparison.

    std::vector<int> openloop_ranks = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60};
    int openloop_start_node = 0;   ///< subwindow start for the open-loop study.
    int openloop_num_steps = -1;   ///< subwindow length; -1 = whole grid.

    unsigned int seed = 0;
    std::string out_dir = "out";

    /// Number of grid nodes for [0, t_end] with step tau.
    int num_nodes() const;

    /// Builds the config from parsed keys (missing keys keep defaults).
    static ExperimentConfig from_config(const KeyValueConfig& kv);
};

/// Parses an estimator name: "delta_a", "delta_b", "tilde_delta_b".
ControlEstimator parse_estimator(const std::string& name);
std::string estimator_name(ControlEstimator est);

}  // namespace smpc

#endif  // SMPC_CONFIG_HPP
