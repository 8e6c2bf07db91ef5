#include "mfg/simplex_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfg/errors.hpp"

namespace mfg::hjb {

namespace {

void enumerate(std::size_t states, int remaining, std::vector<int>& prefix,
               std::vector<std::vector<int>>& out) {
  if (prefix.size() + 1 == states) {
    prefix.push_back(remaining);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int c = remaining; c >= 0; --c) {
    prefix.push_back(c);
    enumerate(states, remaining - c, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

SimplexGrid::SimplexGrid(std::size_t states, std::size_t resolution)
    : states_(states), k_(resolution) {
  if (states == 0) fail(ErrorCode::InvalidArgument, "simplex grid needs at least one state");
  if (states > kMaxStates) {
    fail(ErrorCode::StateTooLarge, "simplex grid supports at most " + std::to_string(kMaxStates) +
                                       " states, got " + std::to_string(states));
  }
  if (resolution == 0) fail(ErrorCode::InvalidArgument, "grid resolution must be >= 1");
  std::vector<int> prefix;
  enumerate(states, static_cast<int>(resolution), prefix, counts_);
  for (std::size_t i = 0; i < counts_.size(); ++i) index_.emplace(key(counts_[i]), i);
}

std::size_t SimplexGrid::expected_size(std::size_t states, std::size_t resolution) {
  // C(k + d - 1, d - 1)
  std::size_t num = 1;
  std::size_t den = 1;
  for (std::size_t i = 1; i < states; ++i) {
    num *= resolution + i;
    den *= i;
  }
  return num / den;
}

long SimplexGrid::key(std::span<const int> counts) const {
  long code = 0;
  for (std::size_t i = counts.size(); i-- > 0;) code = code * static_cast<long>(k_ + 1) + counts[i];
  return code;
}

std::vector<double> SimplexGrid::point(std::size_t i) const {
  std::vector<double> m(states_);
  for (std::size_t x = 0; x < states_; ++x)
    m[x] = static_cast<double>(counts_[i][x]) / static_cast<double>(k_);
  return m;
}

long SimplexGrid::index_of(std::span<const int> counts) const {
  if (counts.size() != states_) return -1;
  for (int c : counts)
    if (c < 0) return -1;
  if (std::accumulate(counts.begin(), counts.end(), 0) != static_cast<int>(k_)) return -1;
  const auto it = index_.find(key(counts));
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

SimplexGrid::Stencil SimplexGrid::locate(std::span<const double> m) const {
  if (m.size() != states_) fail(ErrorCode::ShapeMismatch, "profile does not match the grid");
  Stencil st;
  const std::size_t d = states_ - 1;
  const int k = static_cast<int>(k_);
  if (d == 0) {
    st.vertex[0] = 0;
    st.weight[0] = 1.0;
    st.size = 1;
    return st;
  }
  // Cumulative coordinates s_i = k Σ_{j>=i} m_j, i = 1..d, nonincreasing in i.
  std::array<double, kMaxStates> s{};
  double tail = 0.0;
  for (std::size_t i = d; i >= 1; --i) {
    tail += std::max(0.0, m[i]);
    s[i - 1] = std::clamp(static_cast<double>(k) * tail, 0.0, static_cast<double>(k));
  }
  std::array<int, kMaxStates> base{};
  std::array<double, kMaxStates> frac{};
  for (std::size_t i = 0; i < d; ++i) {
    base[i] = std::min(static_cast<int>(std::floor(s[i])), k - 1);
    frac[i] = std::clamp(s[i] - base[i], 0.0, 1.0);
  }
  std::array<std::size_t, kMaxStates> order{};
  std::iota(order.begin(), order.begin() + static_cast<long>(d), std::size_t{0});
  std::stable_sort(order.begin(), order.begin() + static_cast<long>(d),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });

  auto to_counts = [&](const std::array<int, kMaxStates>& cum) {
    std::array<int, kMaxStates> c{};
    c[0] = k - cum[0];
    for (std::size_t i = 1; i < d; ++i) c[i] = cum[i - 1] - cum[i];
    c[d] = cum[d - 1];
    return c;
  };
  auto add_vertex = [&](const std::array<int, kMaxStates>& cum, double w) {
    const auto c = to_counts(cum);
    const long idx = index_of(std::span<const int>(c.data(), states_));
    if (idx < 0) fail(ErrorCode::GridMismatch, "interpolation vertex outside the simplex grid");
    st.vertex[st.size] = static_cast<std::size_t>(idx);
    st.weight[st.size] = w;
    ++st.size;
  };

  std::array<int, kMaxStates> vertex = base;
  add_vertex(vertex, 1.0 - frac[order[0]]);
  for (std::size_t j = 0; j < d; ++j) {
    vertex[order[j]] += 1;
    const double next = j + 1 < d ? frac[order[j + 1]] : 0.0;
    add_vertex(vertex, frac[order[j]] - next);
  }
  return st;
}

double SimplexGrid::interpolate(std::span<const double> values, std::span<const double> m) const {
  if (values.size() != size()) fail(ErrorCode::ShapeMismatch, "value vector does not match the grid");
  const Stencil st = locate(m);
  double acc = 0.0;
  for (std::size_t i = 0; i < st.size; ++i) acc += st.weight[i] * values[st.vertex[i]];
  return acc;
}

double ControlSolution::value_at(std::size_t t, std::span<const double> m) const {
  return grid.interpolate(values.at(t), m);
}

}  // namespace mfg::hjb
