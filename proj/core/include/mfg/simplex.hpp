#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfg {

/// Absolute slack allowed on the total mass of a distribution.
inline constexpr double kSimplexTolerance = 1e-9;
/// Negative masses above -kClampTolerance are read as zero.
inline constexpr double kClampTolerance = 1e-12;

/// Row-major dense matrix for the small kernels used throughout.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double value);
  void resize(std::size_t rows, std::size_t cols, double fill = 0.0);

  const std::vector<double>& data() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A validated probability vector over a finite state space.
///
/// Construction rejects entries below -kClampTolerance and totals further than
/// `tolerance` from one; tiny negatives are clamped to zero on read.
class SimplexVector {
 public:
  SimplexVector() = default;
  explicit SimplexVector(std::vector<double> mass, double tolerance = kSimplexTolerance);

  static SimplexVector uniform(std::size_t states);
  static SimplexVector point_mass(std::size_t states, std::size_t at);

  std::size_t size() const noexcept { return mass_.size(); }
  double operator[](std::size_t x) const noexcept { return mass_[x] < 0.0 ? 0.0 : mass_[x]; }
  double tolerance() const noexcept { return tolerance_; }
  std::span<const double> raw() const noexcept { return mass_; }
  std::vector<double> values() const;

 private:
  std::vector<double> mass_;
  double tolerance_ = kSimplexTolerance;
};

/// Throws InvalidDistribution unless `mass` satisfies the simplex invariants.
void check_simplex(std::span<const double> mass, double tolerance = kSimplexTolerance);
bool is_on_simplex(std::span<const double> mass, double tolerance = kSimplexTolerance,
                   double negative_slack = kClampTolerance);

double l1_distance(std::span<const double> a, std::span<const double> b);
double linf_norm(std::span<const double> a);
double sum(std::span<const double> a);

/// Clamp negatives to zero and rescale to unit mass.
void renormalize(std::span<double> mass);

/// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> point);

/// Per-type table of state-indexed reals: population profiles, value slices.
class StateTable {
 public:
  StateTable() = default;
  StateTable(std::size_t types, std::size_t states, double fill = 0.0)
      : types_(types), states_(states), data_(types * states, fill) {}

  static StateTable from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t types() const noexcept { return types_; }
  std::size_t states() const noexcept { return states_; }
  std::size_t flat_size() const noexcept { return data_.size(); }

  double& operator()(std::size_t type, std::size_t x) { return data_[type * states_ + x]; }
  double operator()(std::size_t type, std::size_t x) const { return data_[type * states_ + x]; }

  std::span<double> row(std::size_t type) { return {data_.data() + type * states_, states_}; }
  std::span<const double> row(std::size_t type) const {
    return {data_.data() + type * states_, states_};
  }
  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  bool operator==(const StateTable&) const = default;

 private:
  std::size_t types_ = 0;
  std::size_t states_ = 0;
  std::vector<double> data_;
};

/// A population profile: one distribution per type.
using Population = StateTable;

/// Sum over types of the per-type L1 distances.
double l1_distance(const StateTable& a, const StateTable& b);

}  // namespace mfg
