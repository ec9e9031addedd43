#include "mdlpdf/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mdlpdf {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DegenerateDimension: return "DegenerateDimension";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotSimplex: return "NotSimplex";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TooFewDistinctValues: return "TooFewDistinctValues";
    case ErrorCode::WidthNonPositive: return "WidthNonPositive";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EdgesNotIncreasing: return "EdgesNotIncreasing";
    case ErrorCode::DegenerateKnots: return "DegenerateKnots";
    case ErrorCode::UnseenClassInTest: return "UnseenClassInTest";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::vector<double> Matrix::column(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

bool SampleMatrix::fully_observed() const noexcept {
  return std::all_of(observed_.begin(), observed_.end(), [](std::uint8_t m) { return m != 0; });
}

std::vector<double> SampleMatrix::observed_column(std::size_t n) const {
  std::vector<double> out;
  out.reserve(rows_);
  for (std::size_t t = 0; t < rows_; ++t)
    if (observed(t, n)) out.push_back(value(t, n));
  return out;
}

SampleMatrix validate_sample_matrix(RawTable raw, bool require_two_distinct) {
  if (raw.rows == 0 || raw.cols == 0) fail(ErrorCode::EmptyInput, "sample matrix has no rows or no columns");
  const std::size_t cells = raw.rows * raw.cols;
  if (raw.values.size() != cells) fail(ErrorCode::ShapeMismatch, "value count does not match rows*cols");
  if (raw.observed.empty()) raw.observed.assign(cells, 1);
  if (raw.observed.size() != cells) fail(ErrorCode::ShapeMismatch, "mask size does not match rows*cols");
  if (!raw.dim_names.empty() && raw.dim_names.size() != raw.cols)
    fail(ErrorCode::ShapeMismatch, "dimension name count does not match column count");

  for (std::size_t i = 0; i < cells; ++i) {
    if (raw.observed[i] == 0) {
      raw.values[i] = 0.0;
    } else if (!std::isfinite(raw.values[i])) {
      fail(ErrorCode::NonFinite, "non-finite observed value at row " + std::to_string(i / raw.cols) +
                                     ", column " + std::to_string(i % raw.cols));
    }
  }

  if (require_two_distinct) {
    for (std::size_t n = 0; n < raw.cols; ++n) {
      bool seen = false;
      bool distinct = false;
      double first = 0.0;
      for (std::size_t t = 0; t < raw.rows && !distinct; ++t) {
        const std::size_t i = t * raw.cols + n;
        if (raw.observed[i] == 0) continue;
        if (!seen) {
          first = raw.values[i];
          seen = true;
        } else if (raw.values[i] != first) {
          distinct = true;
        }
      }
      if (!distinct)
        fail(ErrorCode::DegenerateDimension,
             "column " + std::to_string(n) + " has fewer than 2 distinct observed values");
    }
  }

  SampleMatrix m;
  m.rows_ = raw.rows;
  m.cols_ = raw.cols;
  m.values_ = std::move(raw.values);
  m.observed_ = std::move(raw.observed);
  m.dim_names_ = std::move(raw.dim_names);
  return m;
}

SampleMatrix select_rows(const SampleMatrix& m, std::span<const std::size_t> rows, bool require_two_distinct) {
  RawTable raw;
  raw.rows = rows.size();
  raw.cols = m.cols();
  raw.dim_names = m.dim_names();
  raw.values.reserve(raw.rows * raw.cols);
  raw.observed.reserve(raw.rows * raw.cols);
  for (std::size_t t : rows) {
    if (t >= m.rows()) fail(ErrorCode::InvalidArgument, "row index out of range");
    for (std::size_t n = 0; n < m.cols(); ++n) {
      raw.values.push_back(m.value(t, n));
      raw.observed.push_back(m.observed(t, n) ? 1 : 0);
    }
  }
  return validate_sample_matrix(std::move(raw), require_two_distinct);
}

SampleMatrix select_columns(const SampleMatrix& m, std::span<const std::size_t> cols, bool require_two_distinct) {
  RawTable raw;
  raw.rows = m.rows();
  raw.cols = cols.size();
  for (std::size_t n : cols) {
    if (n >= m.cols()) fail(ErrorCode::InvalidArgument, "column index out of range");
    if (!m.dim_names().empty()) raw.dim_names.push_back(m.dim_names()[n]);
  }
  for (std::size_t t = 0; t < m.rows(); ++t) {
    for (std::size_t n : cols) {
      raw.values.push_back(m.value(t, n));
      raw.observed.push_back(m.observed(t, n) ? 1 : 0);
    }
  }
  return validate_sample_matrix(std::move(raw), require_two_distinct);
}

std::vector<double> Histogram::edges() const {
  std::vector<double> e;
  e.reserve(cuts.size() + 2);
  e.push_back(lo);
  e.insert(e.end(), cuts.begin(), cuts.end());
  e.push_back(hi);
  return e;
}

std::uint32_t Histogram::bin_of(double x) const noexcept {
  // Number of cuts strictly below x: a value equal to a cut stays in the left bin.
  const auto it = std::lower_bound(cuts.begin(), cuts.end(), x);
  return static_cast<std::uint32_t>(it - cuts.begin()) + 1;
}

void validate_histogram(const Histogram& h) {
  if (!(h.lo < h.hi)) fail(ErrorCode::EdgesNotIncreasing, "histogram requires lo < hi");
  double prev = h.lo;
  for (double c : h.cuts) {
    if (!(c > prev)) fail(ErrorCode::EdgesNotIncreasing, "histogram cuts must be strictly increasing inside (lo, hi)");
    prev = c;
  }
  if (!(h.hi > prev)) fail(ErrorCode::EdgesNotIncreasing, "last cut must be below hi");
  if (h.probabilities.size() != h.bins() || h.counts.size() != h.bins())
    fail(ErrorCode::ShapeMismatch, "histogram probabilities/counts must have one entry per bin");
  for (auto c : h.counts)
    if (c < 0) fail(ErrorCode::InvalidArgument, "negative histogram count");
  check_simplex(h.probabilities, "histogram probabilities");
}

DiscretizedDataset::DiscretizedDataset(std::size_t rows, std::vector<std::uint32_t> cardinalities,
                                       std::vector<std::uint32_t> indices, std::vector<std::uint8_t> observed)
    : rows_(rows),
      cardinalities_(std::move(cardinalities)),
      indices_(std::move(indices)),
      observed_(std::move(observed)) {
  const std::size_t cells = rows_ * cardinalities_.size();
  if (indices_.size() != cells || observed_.size() != cells)
    fail(ErrorCode::ShapeMismatch, "discretized dataset arrays do not match rows*dims");
  for (auto c : cardinalities_)
    if (c == 0) fail(ErrorCode::InvalidArgument, "cardinality must be positive");
  for (std::size_t t = 0; t < rows_; ++t) {
    for (std::size_t n = 0; n < cardinalities_.size(); ++n) {
      const std::size_t i = t * cardinalities_.size() + n;
      if (observed_[i] == 0) continue;
      if (indices_[i] < 1 || indices_[i] > cardinalities_[n])
        fail(ErrorCode::InvalidArgument, "bin index out of range at row " + std::to_string(t));
    }
  }
}

void check_simplex(std::span<const double> p, const std::string& what) {
  if (p.empty()) fail(ErrorCode::NotSimplex, what + " is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) fail(ErrorCode::NotSimplex, what + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) fail(ErrorCode::NotSimplex, what + " does not sum to 1");
}

void validate_pmf(const PmfModel& m) {
  check_simplex(m.lambda, "lambda");
  for (double l : m.lambda)
    if (!(l > 0.0)) fail(ErrorCode::NotSimplex, "lambda entries must be strictly positive");
  if (m.factors.empty()) fail(ErrorCode::ShapeMismatch, "PMF model has no factors");
  for (std::size_t n = 0; n < m.factors.size(); ++n) {
    const Matrix& a = m.factors[n];
    if (a.cols() != m.rank() || a.rows() == 0)
      fail(ErrorCode::ShapeMismatch, "factor " + std::to_string(n) + " has the wrong shape");
    for (std::size_t r = 0; r < a.cols(); ++r)
      check_simplex(a.column(r), "factor " + std::to_string(n) + " column " + std::to_string(r));
  }
}

void validate_mixture(const MixtureSpec& spec) {
  check_simplex(spec.weights, "mixture weights");
  if (spec.components.size() != spec.weights.size())
    fail(ErrorCode::ShapeMismatch, "mixture needs one component per weight");
  const std::size_t dims = spec.dims();
  if (dims == 0) fail(ErrorCode::ShapeMismatch, "mixture components have no dimensions");
  for (std::size_t r = 0; r < spec.components.size(); ++r) {
    if (spec.components[r].size() != dims)
      fail(ErrorCode::ShapeMismatch, "component " + std::to_string(r) + " has the wrong dimension count");
    for (std::size_t n = 0; n < dims; ++n) {
      const auto& g = spec.components[r][n];
      if (!std::isfinite(g.mean)) fail(ErrorCode::InvalidArgument, "components[" + std::to_string(r) + "][" +
                                                                        std::to_string(n) + "].mean is not finite");
      if (!(g.sd > 0.0) || !std::isfinite(g.sd))
        fail(ErrorCode::InvalidArgument,
             "components[" + std::to_string(r) + "][" + std::to_string(n) + "].sd must be positive");
    }
  }
}

}  // namespace mdlpdf
