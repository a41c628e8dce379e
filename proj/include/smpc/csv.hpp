#ifndef SMPC_CSV_HPP
#define SMPC_CSV_HPP

// Minimal CSV emission/ingestion used by the CLI artifacts.  Doubles are
// written with "%.17g" so that a read-back reproduces the exact binary value
// and reruns with identical configs diff clean.

#include <smpc/trajectory.hpp>
#include <smpc/types.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace smpc {

/// Round-trip-exact formatting for doubles ("%.17g").
std::string format_double(double v);

/// Streaming CSV writer: header first, then rows of preformatted cells.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    /// Writes one row; size must match the header.
    void write_row(const std::vector<std::string>& cells);

    /// Convenience: formats doubles with format_double.
    void write_row(const std::vector<double>& cells);

private:
    std::ofstream out_;
    std::size_t width_ = 0;
};

/// Fully parsed CSV file.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  ///< -1 when absent.
};

CsvTable read_csv(const std::string& path);

/// Writes a trajectory as one row per node: step, t, v_0 ... v_{d-1},
/// config_hash, seed.
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          std::uint64_t config_hash, unsigned int seed);

/// Reads a trajectory written by write_trajectory_csv.
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace smpc

#endif  // SMPC_CSV_HPP
