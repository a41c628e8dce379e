#include "smpc/switching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace smpc {

TimeGrid::TimeGrid(double a, double b, int K) : t_start(a), t_end(b), num_nodes(K) {
  if (K < 2) throw std::invalid_argument("TimeGrid: need at least two nodes");
  if (!(b > a)) throw std::invalid_argument("TimeGrid: t_end must exceed t_start");
}

double TimeGrid::node(int k) const {
  if (k < 0 || k >= num_nodes) throw std::out_of_range("TimeGrid::node: index " + std::to_string(k));
  if (k == num_nodes - 1) return t_end; // avoid roundoff at the right end
  return t_start + k * tau();
}

int TimeGrid::index_of(double t, double rel_tol) const {
  const double k_real = (t - t_start) / tau();
  const int k = static_cast<int>(std::lround(k_real));
  if (k < 0 || k >= num_nodes || std::abs(k_real - k) > rel_tol * std::max(1.0, std::abs(k_real)))
    throw std::domain_error("TimeGrid::index_of: t=" + std::to_string(t) + " is not a grid node");
  return k;
}

TimeGrid TimeGrid::window(int k0, int k1) const {
  if (k0 < 0 || k1 >= num_nodes || k1 <= k0)
    throw std::out_of_range("TimeGrid::window: bad node range");
  return TimeGrid(node(k0), node(k1), k1 - k0 + 1);
}

SwitchingSignal::SwitchingSignal(double t_begin, double t_end,
                                 std::vector<double> jumps, std::vector<int> modes)
    : t_begin_(t_begin), t_end_(t_end), jumps_(std::move(jumps)), modes_(std::move(modes)) {
  if (!(t_end_ > t_begin_)) throw std::invalid_argument("SwitchingSignal: empty time interval");
  if (modes_.size() != jumps_.size() + 1)
    throw std::invalid_argument("SwitchingSignal: need one mode per interval (jumps+1)");
  double prev = t_begin_;
  for (double s : jumps_) {
    if (!(s > prev)) throw std::invalid_argument("SwitchingSignal: breakpoints must be strictly increasing and interior");
    prev = s;
  }
  if (!jumps_.empty() && !(jumps_.back() < t_end_))
    throw std::invalid_argument("SwitchingSignal: breakpoints must lie strictly inside the interval");
  for (int m : modes_)
    if (m < 1) throw std::invalid_argument("SwitchingSignal: mode indices are 1-based");
}

double SwitchingSignal::time_tolerance() const {
  // Grid nodes are accumulated as t_start + k*tau and may drift a few ulp off
  // a breakpoint that is mathematically equal; treat times this close to a
  // breakpoint as sitting exactly on it.
  return 1e-9 * (t_end_ - t_begin_);
}

int SwitchingSignal::mode_at(double t, Side side) const {
  const double tol = time_tolerance();
  if (t < t_begin_ - tol || t > t_end_ + tol)
    throw std::domain_error("SwitchingSignal::mode_at: t outside signal domain");
  // Number of breakpoints strictly before t (Left) resp. at or before t
  // (Right), counting breakpoints within the tolerance as equal to t.
  std::size_t idx;
  if (side == Side::Left)
    idx = std::upper_bound(jumps_.begin(), jumps_.end(), t - tol) - jumps_.begin();
  else
    idx = std::upper_bound(jumps_.begin(), jumps_.end(), t + tol) - jumps_.begin();
  return modes_[idx];
}

int SwitchingSignal::max_mode() const {
  return *std::max_element(modes_.begin(), modes_.end());
}

SwitchingSignal SwitchingSignal::restrict(double a, double b) const {
  const double tol = time_tolerance();
  if (a < t_begin_ - tol || b > t_end_ + tol || !(b > a))
    throw std::domain_error("SwitchingSignal::restrict: window not contained in domain");
  std::vector<double> jumps;
  std::vector<int> modes;
  modes.push_back(mode_right(a)); // a breakpoint at `a` belongs to the past
  for (std::size_t j = 0; j < jumps_.size(); ++j) {
    if (jumps_[j] > a + tol && jumps_[j] < b - tol) {
      jumps.push_back(jumps_[j]);
      modes.push_back(modes_[j + 1]);
    }
  }
  return SwitchingSignal(a, b, std::move(jumps), std::move(modes));
}

void SwitchingSignal::validate_against(const TimeGrid& grid) const {
  for (double s : jumps_) {
    const int k = grid.index_of(s); // throws if off-grid
    if (k == 0 || k == grid.num_nodes - 1)
      throw std::domain_error("SwitchingSignal: breakpoint coincides with a grid endpoint");
  }
}

std::vector<int> SwitchingSignal::jump_node_indices(const TimeGrid& grid) const {
  std::vector<int> idx;
  idx.reserve(jumps_.size());
  for (double s : jumps_) idx.push_back(grid.index_of(s));
  return idx;
}

SwitchingSignal make_alternating_signal(double t_begin, double t_end,
                                        double period, int first_mode, int num_modes) {
  if (!(period > 0)) throw std::invalid_argument("make_alternating_signal: period must be positive");
  std::vector<double> jumps;
  std::vector<int> modes;
  int m = first_mode;
  modes.push_back(m);
  const double eps = 1e-12 * std::max(1.0, std::abs(t_end));
  for (double s = t_begin + period; s < t_end - eps; s += period) {
    jumps.push_back(s);
    m = (m % num_modes) + 1;
    modes.push_back(m);
  }
  return SwitchingSignal(t_begin, t_end, std::move(jumps), std::move(modes));
}

} // namespace smpc
