#include "mdlpdf/spline_reconstruction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mdlpdf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t segment_index(const CubicSpline& s, double x) {
  const auto it = std::upper_bound(s.knots.begin(), s.knots.end(), x);
  std::size_t i = it == s.knots.begin() ? 0 : static_cast<std::size_t>(it - s.knots.begin()) - 1;
  return std::min(i, s.segments.size() - 1);
}

double poly(const SplineSegment& g, double t) { return g.a + t * (g.b + t * (g.c + t * g.d)); }
double dpoly(const SplineSegment& g, double t) { return g.b + t * (2.0 * g.c + t * 3.0 * g.d); }
double ipoly(const SplineSegment& g, double t) { return t * (g.b + t * (g.c + t * g.d)); }

/// Sorted roots of b + 2c t + 3d t^2 inside (0, h).
std::vector<double> derivative_roots(const SplineSegment& g, double h) {
  std::vector<double> roots;
  auto keep = [&](double t) {
    if (t > 0.0 && t < h) roots.push_back(t);
  };
  const double A = 3.0 * g.d, B = 2.0 * g.c, C = g.b;
  if (A == 0.0) {
    if (B != 0.0) keep(-C / B);
  } else {
    const double disc = B * B - 4.0 * A * C;
    if (disc >= 0.0) {
      const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
      if (q != 0.0) {
        keep(q / A);
        keep(C / q);
      } else {
        keep(0.0);
      }
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

/// Negative and positive parts of the derivative's integral over [0, t].
std::array<double, 2> signed_areas(const SplineSegment& g, double t) {
  std::vector<double> pts{0.0};
  for (double r : derivative_roots(g, t)) pts.push_back(r);
  pts.push_back(t);
  double neg = 0.0, pos = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    if (pts[k + 1] <= pts[k]) continue;
    const double area = ipoly(g, pts[k + 1]) - ipoly(g, pts[k]);
    const double mid = 0.5 * (pts[k] + pts[k + 1]);
    if (dpoly(g, mid) < 0.0)
      neg -= area;
    else
      pos += area;
  }
  return {std::max(neg, 0.0), std::max(pos, 0.0)};
}

}  // namespace

std::vector<Knot> cdf_knots(std::span<const double> column, std::span<const double> edges) {
  check_simplex(column, "conditional PMF column");
  if (edges.size() != column.size() + 1)
    fail(ErrorCode::ShapeMismatch, "need one more edge than PMF entries");
  for (std::size_t j = 1; j < edges.size(); ++j)
    if (!(edges[j] > edges[j - 1])) fail(ErrorCode::EdgesNotIncreasing, "bin edges must be strictly increasing");
  std::vector<Knot> knots;
  knots.reserve(edges.size());
  double c = 0.0;
  knots.push_back({edges[0], 0.0});
  for (std::size_t i = 0; i < column.size(); ++i) {
    c += column[i];
    knots.push_back({edges[i + 1], c});
  }
  return knots;
}

CubicSpline fit_clamped_cubic(std::span<const Knot> knots, SplineBoundary boundary) {
  if (knots.size() < 2) fail(ErrorCode::DegenerateKnots, "spline needs at least two knots");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i].x > knots[i - 1].x)) fail(ErrorCode::DegenerateKnots, "knot positions must strictly increase");
  for (const auto& k : knots)
    if (!std::isfinite(k.x) || !std::isfinite(k.y)) fail(ErrorCode::DegenerateKnots, "knots must be finite");

  const std::size_t n = knots.size() - 1;  // segment count
  std::vector<double> h(n), slope(n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = knots[i + 1].x - knots[i].x;
    slope[i] = (knots[i + 1].y - knots[i].y) / h[i];
  }

  // Second-derivative moments M_0..M_n from a tridiagonal system.
  std::vector<double> sub(n + 1, 0.0), diag(n + 1, 0.0), sup(n + 1, 0.0), rhs(n + 1, 0.0);
  if (boundary == SplineBoundary::Clamped) {
    diag[0] = 2.0 * h[0];
    sup[0] = h[0];
    rhs[0] = 6.0 * slope[0];
    sub[n] = h[n - 1];
    diag[n] = 2.0 * h[n - 1];
    rhs[n] = -6.0 * slope[n - 1];
  } else {
    diag[0] = 1.0;
    diag[n] = 1.0;
  }
  for (std::size_t i = 1; i < n; ++i) {
    sub[i] = h[i - 1];
    diag[i] = 2.0 * (h[i - 1] + h[i]);
    sup[i] = h[i];
    rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
  }
  // Thomas algorithm; the system is strictly diagonally dominant.
  for (std::size_t i = 1; i <= n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> m(n + 1);
  m[n] = rhs[n] / diag[n];
  for (std::size_t i = n; i-- > 0;) m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];

  CubicSpline s;
  s.knots.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) s.knots[i] = knots[i].x;
  s.segments.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& g = s.segments[i];
    g.a = knots[i].y;
    g.b = slope[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
    g.c = 0.5 * m[i];
    g.d = (m[i + 1] - m[i]) / (6.0 * h[i]);
  }
  return s;
}

double eval_spline(const CubicSpline& s, double x) {
  if (x <= s.knots.front()) return s.segments.front().a;
  if (x >= s.knots.back()) {
    const auto& g = s.segments.back();
    return poly(g, s.knots.back() - s.knots[s.knots.size() - 2]);
  }
  const std::size_t i = segment_index(s, x);
  return poly(s.segments[i], x - s.knots[i]);
}

double eval_spline_derivative(const CubicSpline& s, double x) {
  if (x < s.knots.front() || x > s.knots.back()) return 0.0;
  const std::size_t i = segment_index(s, x);
  return dpoly(s.segments[i], x - s.knots[i]);
}

double eval_conditional_pdf(const CubicSpline& s, double x) { return std::max(0.0, eval_spline_derivative(s, x)); }

double clipped_mass(const CubicSpline& s) {
  double neg = 0.0;
  for (std::size_t i = 0; i < s.segments.size(); ++i)
    neg += signed_areas(s.segments[i], s.knots[i + 1] - s.knots[i])[0];
  return neg;
}

double segment_positive_area(const SplineSegment& seg, double t) { return signed_areas(seg, t)[1]; }

void finalize_density_model(DensityModel& model) {
  validate_pmf(model.pmf);
  const std::size_t N = model.pmf.dims();
  const std::size_t R = model.pmf.rank();
  if (model.edges.size() != N || model.splines.size() != N)
    fail(ErrorCode::ShapeMismatch, "density model needs edges and splines for every dimension");
  model.clipped_mass.assign(N, std::vector<double>(R, 0.0));
  for (std::size_t n = 0; n < N; ++n) {
    const auto& e = model.edges[n];
    if (e.size() != model.pmf.factors[n].rows() + 1)
      fail(ErrorCode::ShapeMismatch, "edge count must be bins + 1 in dimension " + std::to_string(n));
    for (std::size_t j = 1; j < e.size(); ++j)
      if (!(e[j] > e[j - 1])) fail(ErrorCode::EdgesNotIncreasing, "edges must strictly increase");
    if (model.splines[n].size() != R) fail(ErrorCode::ShapeMismatch, "need one spline per component");
    for (std::size_t r = 0; r < R; ++r) {
      const auto& s = model.splines[n][r];
      if (s.knots != e || s.segments.size() + 1 != s.knots.size())
        fail(ErrorCode::ShapeMismatch, "spline knots must equal the dimension's edges");
      model.clipped_mass[n][r] = clipped_mass(s);
    }
  }
}

DensityModel build_density_model(const PmfModel& pmf, std::span<const Histogram> histograms,
                                 SplineBoundary boundary) {
  validate_pmf(pmf);
  if (histograms.size() != pmf.dims()) fail(ErrorCode::DimensionMismatch, "need one histogram per PMF dimension");
  DensityModel model;
  model.pmf = pmf;
  for (std::size_t n = 0; n < pmf.dims(); ++n) {
    if (histograms[n].bins() != pmf.factors[n].rows())
      fail(ErrorCode::DimensionMismatch, "histogram bin count differs from factor rows in dimension " +
                                             std::to_string(n));
    model.edges.push_back(histograms[n].edges());
    std::vector<CubicSpline> per_component;
    for (std::size_t r = 0; r < pmf.rank(); ++r) {
      const auto column = pmf.factors[n].column(r);
      per_component.push_back(fit_clamped_cubic(cdf_knots(column, model.edges[n]), boundary));
    }
    model.splines.push_back(std::move(per_component));
  }
  finalize_density_model(model);
  return model;
}

std::vector<double> component_log_terms(const DensityModel& model, std::span<const double> x,
                                        std::span<const std::uint8_t> observed, PdfOptions opts) {
  const std::size_t N = model.dims();
  const std::size_t R = model.rank();
  if (x.size() != N) fail(ErrorCode::DimensionMismatch, "point has the wrong number of coordinates");
  if (!observed.empty() && observed.size() != N) fail(ErrorCode::DimensionMismatch, "mask has the wrong length");
  std::vector<double> terms(R);
  for (std::size_t r = 0; r < R; ++r) terms[r] = std::log(model.pmf.lambda[r]);
  for (std::size_t n = 0; n < N; ++n) {
    if (!observed.empty() && !observed[n]) continue;
    const auto& e = model.edges[n];
    const double xn = x[n];
    if (!(xn >= e.front() && xn <= e.back())) return std::vector<double>(R, kNegInf);
    auto it = std::upper_bound(e.begin(), e.end(), xn);
    std::size_t seg = it == e.begin() ? 0 : static_cast<std::size_t>(it - e.begin()) - 1;
    seg = std::min(seg, e.size() - 2);
    const double t = xn - e[seg];
    for (std::size_t r = 0; r < R; ++r) {
      double p = std::max(0.0, dpoly(model.splines[n][r].segments[seg], t));
      if (opts.renormalize) p /= 1.0 + model.clipped_mass[n][r];
      terms[r] += p > 0.0 ? std::log(p) : kNegInf;
    }
  }
  return terms;
}

double eval_joint_log_pdf(const DensityModel& model, std::span<const double> x, PdfOptions opts) {
  const auto terms = component_log_terms(model, x, {}, opts);
  const double mx = *std::max_element(terms.begin(), terms.end());
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double l : terms) s += std::exp(l - mx);
  return mx + std::log(s);
}

double eval_joint_pdf(const DensityModel& model, std::span<const double> x, PdfOptions opts) {
  return std::exp(eval_joint_log_pdf(model, x, opts));
}

DensitySampler::DensitySampler(const DensityModel& model) : model_(&model) {
  cumulative_.resize(model.dims());
  for (std::size_t n = 0; n < model.dims(); ++n) {
    for (std::size_t r = 0; r < model.rank(); ++r) {
      const auto& s = model.splines[n][r];
      std::vector<double> cum;
      double acc = 0.0;
      for (std::size_t i = 0; i < s.segments.size(); ++i) {
        acc += segment_positive_area(s.segments[i], s.knots[i + 1] - s.knots[i]);
        cum.push_back(acc);
      }
      cumulative_[n].push_back(std::move(cum));
    }
  }
}

double DensitySampler::sample_conditional(Rng& rng, std::size_t n, std::size_t r) const {
  const auto& s = model_->splines[n][r];
  const auto& cum = cumulative_[n][r];
  const double u = rng.uniform_open() * cum.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  const std::size_t seg = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
  const double before = seg == 0 ? 0.0 : cum[seg - 1];
  const double target = u - before;
  const auto& g = s.segments[seg];
  double lo = 0.0, hi = s.knots[seg + 1] - s.knots[seg];
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (segment_positive_area(g, mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return s.knots[seg] + 0.5 * (lo + hi);
}

void DensitySampler::sample(Rng& rng, std::span<double> out) const {
  if (out.size() != model_->dims()) fail(ErrorCode::DimensionMismatch, "output buffer has the wrong length");
  const std::size_t r = rng.categorical(model_->pmf.lambda);
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = sample_conditional(rng, n, r);
}

}  // namespace mdlpdf
