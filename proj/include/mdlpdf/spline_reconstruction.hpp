#pragma once

#include <span>
#include <vector>

#include "mdlpdf/core_types.hpp"
#include "mdlpdf/rng.hpp"

namespace mdlpdf {

struct Knot {
  double x = 0.0;
  double y = 0.0;
};

/// (edges[0], 0), (edges[j], column[0] + ... + column[j-1]), ...
std::vector<Knot> cdf_knots(std::span<const double> column, std::span<const double> edges);

enum class SplineBoundary {
  Clamped,  // zero first derivative at both ends
  Natural,  // zero second derivative at both ends (experimental)
};

/// C2 piecewise cubic through every knot (tridiagonal solve on nonuniform spacing).
CubicSpline fit_clamped_cubic(std::span<const Knot> knots, SplineBoundary boundary = SplineBoundary::Clamped);

/// Spline value; constant continuation outside the knot range.
double eval_spline(const CubicSpline& s, double x);
/// Raw first derivative; 0 outside the knot range.
double eval_spline_derivative(const CubicSpline& s, double x);

/// max(0, S'(x)) inside the domain, 0 outside.
double eval_conditional_pdf(const CubicSpline& s, double x);

/// Area of the negative part of S' over the whole domain (exact, via the
/// roots of each segment's quadratic derivative).
double clipped_mass(const CubicSpline& s);

/// Integral of max(0, S') over one segment's local interval [0, t].
double segment_positive_area(const SplineSegment& seg, double t);

struct PdfOptions {
  /// Divide each clipped conditional PDF by its clipped total 1 + clipped_mass.
  bool renormalize = false;
};

DensityModel build_density_model(const PmfModel& pmf, std::span<const Histogram> histograms,
                                 SplineBoundary boundary = SplineBoundary::Clamped);

/// Recomputes clipped masses and checks shapes (used after deserialization).
void finalize_density_model(DensityModel& model);

/// log(lambda_r) + sum_n log pdf_{n,r}(x_n) for each r; dimensions with
/// observed[n] == 0 are skipped. Entries are -inf where a factor is zero.
std::vector<double> component_log_terms(const DensityModel& model, std::span<const double> x,
                                        std::span<const std::uint8_t> observed = {}, PdfOptions opts = {});

double eval_joint_pdf(const DensityModel& model, std::span<const double> x, PdfOptions opts = {});
double eval_joint_log_pdf(const DensityModel& model, std::span<const double> x, PdfOptions opts = {});

/// Draws from the normalized clipped density of a DensityModel.
class DensitySampler {
 public:
  explicit DensitySampler(const DensityModel& model);
  void sample(Rng& rng, std::span<double> out) const;
  std::size_t dims() const noexcept { return model_->dims(); }

 private:
  double sample_conditional(Rng& rng, std::size_t n, std::size_t r) const;

  const DensityModel* model_;
  std::vector<std::vector<std::vector<double>>> cumulative_;  // [n][r][segment]
};

}  // namespace mdlpdf
