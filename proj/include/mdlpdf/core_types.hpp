#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mdlpdf/error.hpp"

namespace mdlpdf {

/// Tolerance used for every simplex check after renormalization.
inline constexpr double kSimplexTol = 1e-12;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

  std::vector<double> column(std::size_t j) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Unvalidated rectangular input. An empty `observed` means every cell is present.
struct RawTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> observed;
  std::vector<std::string> dim_names;
};

/// T x N observations with a presence mask. Only constructible through
/// validate_sample_matrix, so every instance satisfies the finiteness rule.
class SampleMatrix {
 public:
  SampleMatrix() = default;

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double value(std::size_t t, std::size_t n) const noexcept { return values_[t * cols_ + n]; }
  bool observed(std::size_t t, std::size_t n) const noexcept { return observed_[t * cols_ + n] != 0; }
  std::span<const double> row(std::size_t t) const noexcept { return {values_.data() + t * cols_, cols_}; }
  bool fully_observed() const noexcept;

  /// Observed values of column n in row order.
  std::vector<double> observed_column(std::size_t n) const;

  const std::vector<std::string>& dim_names() const noexcept { return dim_names_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<std::uint8_t>& mask() const noexcept { return observed_; }

 private:
  friend SampleMatrix validate_sample_matrix(RawTable raw, bool require_two_distinct);

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> observed_;
  std::vector<std::string> dim_names_;
};

/// Rejects empty input and non-finite observed cells. When
/// `require_two_distinct` is set, every column must also carry at least two
/// distinct observed values (needed before binning; held-out data skips it).
/// Missing cells are zeroed so stored values are always finite.
SampleMatrix validate_sample_matrix(RawTable raw, bool require_two_distinct = true);

/// Row subset of an existing matrix (used for train/test splits).
SampleMatrix select_rows(const SampleMatrix& m, std::span<const std::size_t> rows,
                         bool require_two_distinct = false);

/// Column subset of an existing matrix.
SampleMatrix select_columns(const SampleMatrix& m, std::span<const std::size_t> cols,
                            bool require_two_distinct = false);

/// Per-dimension histogram. Bins are right-closed: bin k covers
/// (edge_k, edge_{k+1}], and the first bin also includes lo.
struct Histogram {
  std::vector<double> cuts;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> probabilities;
  std::vector<std::int64_t> counts;
  double sc_score = 0.0;

  std::size_t bins() const noexcept { return cuts.size() + 1; }
  /// lo, cuts..., hi.
  std::vector<double> edges() const;
  /// 1-based bin index of x; values outside [lo, hi] are clamped into the boundary bins.
  std::uint32_t bin_of(double x) const noexcept;

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

void validate_histogram(const Histogram& h);

/// T x N table of 1-based bin indices.
class DiscretizedDataset {
 public:
  DiscretizedDataset() = default;
  DiscretizedDataset(std::size_t rows, std::vector<std::uint32_t> cardinalities,
                     std::vector<std::uint32_t> indices, std::vector<std::uint8_t> observed);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cardinalities_.size(); }
  std::uint32_t index(std::size_t t, std::size_t n) const noexcept { return indices_[t * cols() + n]; }
  bool observed(std::size_t t, std::size_t n) const noexcept { return observed_[t * cols() + n] != 0; }
  const std::vector<std::uint32_t>& cardinalities() const noexcept { return cardinalities_; }
  std::span<const std::uint32_t> row_indices(std::size_t t) const noexcept {
    return {indices_.data() + t * cols(), cols()};
  }
  std::span<const std::uint8_t> row_mask(std::size_t t) const noexcept {
    return {observed_.data() + t * cols(), cols()};
  }

 private:
  std::size_t rows_ = 0;
  std::vector<std::uint32_t> cardinalities_;
  std::vector<std::uint32_t> indices_;
  std::vector<std::uint8_t> observed_;
};

/// Rank-R CPD of a joint PMF: loading vector and column-stochastic factors.
struct PmfModel {
  std::vector<double> lambda;
  std::vector<Matrix> factors;

  std::size_t rank() const noexcept { return lambda.size(); }
  std::size_t dims() const noexcept { return factors.size(); }

  friend bool operator==(const PmfModel&, const PmfModel&) = default;
};

/// Throws NotSimplex unless `p` is nonnegative and sums to 1 within kSimplexTol.
void check_simplex(std::span<const double> p, const std::string& what);
void validate_pmf(const PmfModel& m);

/// One cubic piece a + b*t + c*t^2 + d*t^3 with t measured from the left knot.
struct SplineSegment {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  friend bool operator==(const SplineSegment&, const SplineSegment&) = default;
};

struct CubicSpline {
  std::vector<double> knots;
  std::vector<SplineSegment> segments;

  friend bool operator==(const CubicSpline&, const CubicSpline&) = default;
};

/// Continuous estimator: PMF factors plus one CDF spline per (dimension, component).
struct DensityModel {
  PmfModel pmf;
  std::vector<std::vector<double>> edges;
  std::vector<std::vector<CubicSpline>> splines;  // [n][r]
  /// Negative area removed by clipping each conditional PDF; derived, not serialized.
  std::vector<std::vector<double>> clipped_mass;  // [n][r]

  std::size_t dims() const noexcept { return edges.size(); }
  std::size_t rank() const noexcept { return pmf.rank(); }
};

struct GaussianFactor {
  double mean = 0.0;
  double sd = 1.0;
  friend bool operator==(const GaussianFactor&, const GaussianFactor&) = default;
};

/// Mixture of diagonal-Gaussian products; components[r][n].
struct MixtureSpec {
  std::vector<double> weights;
  std::vector<std::vector<GaussianFactor>> components;

  std::size_t rank() const noexcept { return weights.size(); }
  std::size_t dims() const noexcept { return components.empty() ? 0 : components.front().size(); }

  friend bool operator==(const MixtureSpec&, const MixtureSpec&) = default;
};

void validate_mixture(const MixtureSpec& spec);

}  // namespace mdlpdf
