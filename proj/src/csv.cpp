#include <smpc/csv.hpp>

#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace smpc {

namespace {

// std::stod throws out_of_range when strtod flags ERANGE, which includes
// correctly rounded subnormal results; strtod's value is what we want for an
// exact round trip, so only a completely unparsable cell is an error.
double parse_double(const std::string& cell) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw std::runtime_error("CSV: not a number: " + cell);
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), width_(header.size()) {
    if (!out_) throw std::runtime_error("cannot open CSV for writing: " + path);
    write_row(header);
}

void CsvWriter::write_row(const std::vector<std::string>& cells) {
    if (cells.size() != width_)
        throw std::runtime_error("CSV row width mismatch: expected " +
                                 std::to_string(width_) + ", got " +
                                 std::to_string(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
}

void CsvWriter::write_row(const std::vector<double>& cells) {
    std::vector<std::string> text;
    text.reserve(cells.size());
    for (const double v : cells) text.push_back(format_double(v));
    write_row(text);
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV for reading: " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          std::uint64_t config_hash, unsigned int seed) {
    std::vector<std::string> header = {"step", "t"};
    for (int i = 0; i < traj.dim(); ++i) header.push_back("v_" + std::to_string(i));
    header.push_back("config_hash");
    header.push_back("seed");
    CsvWriter w(path, header);
    for (int k = 0; k < traj.num_nodes(); ++k) {
        std::vector<std::string> row;
        row.reserve(header.size());
        row.push_back(std::to_string(k));
        row.push_back(format_double(traj.grid.node(k)));
        const Vec& v = traj.values[static_cast<std::size_t>(k)];
        for (int i = 0; i < traj.dim(); ++i) row.push_back(format_double(v[i]));
        row.push_back(std::to_string(config_hash));
        row.push_back(std::to_string(seed));
        w.write_row(row);
    }
}

Trajectory read_trajectory_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.rows.empty())
        throw std::runtime_error("trajectory CSV has no data rows: " + path);
    const int col_t = table.column("t");
    if (col_t < 0) throw std::runtime_error("trajectory CSV missing `t` column: " + path);
    int dim = 0;
    while (table.column("v_" + std::to_string(dim)) >= 0) ++dim;
    if (dim == 0) throw std::runtime_error("trajectory CSV has no value columns: " + path);
    const int col_v0 = table.column("v_0");

    TimeGrid grid;
    grid.t_start = parse_double(table.rows.front()[static_cast<std::size_t>(col_t)]);
    grid.t_end = parse_double(table.rows.back()[static_cast<std::size_t>(col_t)]);
    grid.num_nodes = static_cast<int>(table.rows.size());

    Trajectory traj(grid, dim);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (int i = 0; i < dim; ++i)
            traj.values[r][i] =
                parse_double(table.rows[r][static_cast<std::size_t>(col_v0 + i)]);
    }
    return traj;
}

}  // namespace smpc
