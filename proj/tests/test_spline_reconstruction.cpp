#include <doctest.h>

#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mdlpdf/mdl_binning.hpp"
#include "mdlpdf/pmf_factorization.hpp"
#include "mdlpdf/spline_reconstruction.hpp"
#include "test_util.hpp"

using namespace mdlpdf;
namespace bq = boost::math::quadrature;

namespace {

// Clamped cubic by a dense solve of the 4m interpolation/continuity
// conditions in the local power basis (no tridiagonal structure used).
std::vector<SplineSegment> dense_clamped(const std::vector<Knot>& k) {
  const std::size_t m = k.size() - 1;
  const std::size_t N = 4 * m;
  std::vector<std::vector<double>> A(N, std::vector<double>(N + 1, 0.0));
  std::size_t row = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double h = k[i + 1].x - k[i].x;
    A[row][4 * i] = 1.0;
    A[row++][N] = k[i].y;
    A[row][4 * i] = 1.0;
    A[row][4 * i + 1] = h;
    A[row][4 * i + 2] = h * h;
    A[row][4 * i + 3] = h * h * h;
    A[row++][N] = k[i + 1].y;
    if (i + 1 < m) {
      A[row][4 * i + 1] = 1.0;
      A[row][4 * i + 2] = 2 * h;
      A[row][4 * i + 3] = 3 * h * h;
      A[row++][4 * (i + 1) + 1] = -1.0;
      A[row][4 * i + 2] = 2.0;
      A[row][4 * i + 3] = 6 * h;
      A[row++][4 * (i + 1) + 2] = -2.0;
    }
  }
  A[row++][1] = 1.0;
  const double hl = k[m].x - k[m - 1].x;
  A[row][4 * (m - 1) + 1] = 1.0;
  A[row][4 * (m - 1) + 2] = 2 * hl;
  A[row++][4 * (m - 1) + 3] = 3 * hl * hl;
  for (std::size_t c = 0; c < N; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < N; ++r)
      if (std::abs(A[r][c]) > std::abs(A[p][c])) p = r;
    std::swap(A[c], A[p]);
    for (std::size_t r = 0; r < N; ++r) {
      if (r == c) continue;
      const double f = A[r][c] / A[c][c];
      for (std::size_t j = c; j <= N; ++j) A[r][j] -= f * A[c][j];
    }
  }
  std::vector<SplineSegment> out(m);
  for (std::size_t i = 0; i < m; ++i)
    out[i] = {A[4 * i][N] / A[4 * i][4 * i], A[4 * i + 1][N] / A[4 * i + 1][4 * i + 1],
              A[4 * i + 2][N] / A[4 * i + 2][4 * i + 2], A[4 * i + 3][N] / A[4 * i + 3][4 * i + 3]};
  return out;
}

std::vector<double> random_simplex(std::size_t I, mdlpdf::Rng& rng, double sparsity = 0.0) {
  std::vector<double> p(I);
  double s = 0.0;
  for (double& v : p) s += v = (rng.uniform_open() < sparsity ? 1e-6 : 0.0) + rng.exponential();
  for (double& v : p) v /= s;
  return p;
}

std::vector<double> random_edges(std::size_t I, mdlpdf::Rng& rng) {
  std::vector<double> e{-1.0 + rng.uniform_open()};
  for (std::size_t i = 0; i < I; ++i) e.push_back(e.back() + 0.05 + 3.0 * rng.uniform_open());
  return e;
}

// Negative area of S' on [a, b]: sign changes located by a grid scan and
// bisection, then Gauss-Legendre on each sign-constant piece (exact there).
double signed_part(const CubicSpline& s, double a, double b, bool negative) {
  const auto d = [&](double x) { return eval_spline_derivative(s, x); };
  std::vector<double> pts{a};
  const int grid = 400;
  for (int g = 0; g < grid; ++g) {
    double lo = a + (b - a) * g / grid, hi = a + (b - a) * (g + 1) / grid;
    if ((d(lo) < 0) == (d(hi) < 0)) continue;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      ((d(mid) < 0) == (d(lo) < 0) ? lo : hi) = mid;
    }
    pts.push_back(0.5 * (lo + hi));
  }
  pts.push_back(b);
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double v = bq::gauss<double, 32>::integrate(d, pts[i], pts[i + 1]);
    if (negative && v < 0) area -= v;
    if (!negative && v > 0) area += v;
  }
  return area;
}

double negative_part(const CubicSpline& s, double a, double b) { return signed_part(s, a, b, true); }

}  // namespace

TEST_CASE("cdf knots") {
  {
    const double col[] = {1.0};
    const double e[] = {0.0, 1.0};
    const auto k = cdf_knots(col, e);
    REQUIRE(k.size() == 2);
    CHECK(k[0].x == 0.0);
    CHECK(k[0].y == 0.0);
    CHECK(k[1].y == 1.0);
  }
  {
    const double col[] = {0.5, 0.5};
    const double e[] = {0, 1, 2};
    const auto k = cdf_knots(col, e);
    CHECK(k[1].y == 0.5);
    CHECK(k[2].x == 2.0);
    CHECK(k[2].y == 1.0);
  }
  {
    const double col[] = {0.2, 0.3, 0.5};
    const double e[] = {0, 1, 4, 10};
    const auto k = cdf_knots(col, e);
    CHECK(k[1].y == doctest::Approx(0.2));
    CHECK(k[2].y == doctest::Approx(0.5));
    CHECK(k[3].y == 1.0);
    CHECK(k[2].x == 4.0);
  }
  const double bad[] = {0.2, 0.3};
  const double e2[] = {0, 1, 2};
  try {
    cdf_knots(bad, e2);
    FAIL("expected NotSimplex");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSimplex);
  }
  const double ok[] = {0.5, 0.5};
  const double dec[] = {0, 2, 1};
  try {
    cdf_knots(ok, dec);
    FAIL("expected EdgesNotIncreasing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EdgesNotIncreasing);
  }
}

TEST_CASE("two knots give smoothstep") {
  const std::vector<Knot> k{{0, 0}, {1, 1}};
  const auto s = fit_clamped_cubic(k);
  REQUIRE(s.segments.size() == 1);
  CHECK(std::abs(s.segments[0].a) < 1e-15);
  CHECK(std::abs(s.segments[0].b) < 1e-15);
  CHECK(s.segments[0].c == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(s.segments[0].d == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(eval_conditional_pdf(s, 0.5) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(eval_conditional_pdf(s, -0.1) == 0.0);
  CHECK(eval_conditional_pdf(s, 1.1) == 0.0);
  CHECK(std::abs(eval_conditional_pdf(s, 0.0)) < 1e-15);
  CHECK(std::abs(eval_conditional_pdf(s, 1.0)) < 1e-14);
  CHECK(clipped_mass(s) == 0.0);
}

TEST_CASE("constant knots give zero polynomials") {
  const std::vector<Knot> k{{0, 0.3}, {1, 0.3}, {2.5, 0.3}, {3, 0.3}};
  const auto s = fit_clamped_cubic(k);
  for (const auto& g : s.segments) {
    CHECK(g.a == doctest::Approx(0.3));
    CHECK(std::abs(g.b) < 1e-15);
    CHECK(std::abs(g.c) < 1e-15);
    CHECK(std::abs(g.d) < 1e-15);
  }
}

TEST_CASE("three knots: hand-solved clamped spline") {
  // (0,0),(1,0.5),(2,1): M0 = 1.5, M1 = 0, so S = 0.75x^2 - 0.25x^3 on [0,1].
  const std::vector<Knot> k{{0, 0}, {1, 0.5}, {2, 1}};
  const auto s = fit_clamped_cubic(k);
  CHECK(s.segments[0].c == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(s.segments[0].d == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(eval_conditional_pdf(s, 0.5) == doctest::Approx(0.5625).epsilon(1e-14));
  CHECK(eval_conditional_pdf(s, 1.5) == doctest::Approx(0.5625).epsilon(1e-14));
}

TEST_CASE("matches a dense linear solve on random nonuniform knots") {
  mdlpdf::Rng rng(10);
  for (int inst = 0; inst < 40; ++inst) {
    const std::size_t I = 1 + rng.below(12);
    const auto col = random_simplex(I, rng);
    const auto e = random_edges(I, rng);
    const auto knots = cdf_knots(col, e);
    const auto s = fit_clamped_cubic(knots);
    const auto ref = dense_clamped(knots);
    for (std::size_t i = 0; i < I; ++i) {
      CHECK(std::abs(s.segments[i].a - ref[i].a) < 1e-12);
      CHECK(std::abs(s.segments[i].b - ref[i].b) < 1e-10);
      CHECK(std::abs(s.segments[i].c - ref[i].c) < 1e-9);
      CHECK(std::abs(s.segments[i].d - ref[i].d) < 1e-9);
    }
  }
}

TEST_CASE("knot exactness, end slopes, continuity and bin masses") {
  mdlpdf::Rng rng(11);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t I = 1 + rng.below(40);
    const auto col = random_simplex(I, rng, 0.5);
    const auto e = random_edges(I, rng);
    const auto knots = cdf_knots(col, e);
    const auto s = fit_clamped_cubic(knots);
    for (const auto& k : knots) CHECK(std::abs(eval_spline(s, k.x) - k.y) <= 1e-12);
    CHECK(std::abs(eval_spline_derivative(s, e.front())) <= 1e-10);
    CHECK(std::abs(eval_spline_derivative(s, e.back())) <= 1e-10);
    for (std::size_t i = 0; i < I; ++i) {
      const double mass = eval_spline(s, e[i + 1]) - eval_spline(s, e[i]);
      CHECK(std::abs(mass - col[i]) <= 1e-10);
    }
    for (std::size_t i = 1; i < I; ++i) {
      const auto& L = s.segments[i - 1];
      const auto& R = s.segments[i];
      const double h = e[i] - e[i - 1];
      const double dl = L.b + 2 * L.c * h + 3 * L.d * h * h;
      CHECK(std::abs(dl - R.b) <= 1e-9);
      const double sl = 2 * L.c + 6 * L.d * h;
      CHECK(std::abs(sl - 2 * R.c) <= 1e-6 * std::max(1.0, std::abs(sl)));
    }
  }
}

TEST_CASE("clipped mass agrees with quadrature") {
  mdlpdf::Rng rng(12);
  std::size_t with_negative = 0;
  for (int inst = 0; inst < 60; ++inst) {
    const std::size_t I = 2 + rng.below(20);
    const auto col = random_simplex(I, rng, 0.6);
    const auto e = random_edges(I, rng);
    const auto s = fit_clamped_cubic(cdf_knots(col, e));
    double quad = 0.0, raw = 0.0, positive = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
      quad += negative_part(s, e[i], e[i + 1]);
      // 32-point Gauss-Legendre is exact for the quadratic derivative
      raw += bq::gauss<double, 32>::integrate([&](double x) { return eval_spline_derivative(s, x); }, e[i], e[i + 1]);
      positive += signed_part(s, e[i], e[i + 1], false);
    }
    const double cm = clipped_mass(s);
    if (cm > 0.0) ++with_negative;
    CHECK(std::abs(cm - quad) < 1e-9);
    CHECK(std::abs(raw - 1.0) < 1e-10);
    CHECK(std::abs(positive - (1.0 + cm)) < 1e-9);
  }
  CHECK(with_negative > 10);
}

TEST_CASE("renormalized conditional PDFs integrate to one") {
  mdlpdf::Rng rng(13);
  const auto col = random_simplex(8, rng, 0.7);
  const auto e = random_edges(8, rng);
  std::vector<double> values;
  for (int t = 0; t < 50; ++t) values.push_back(e.front() + (e.back() - e.front()) * rng.uniform_open());
  PmfModel pmf;
  pmf.lambda = {1.0};
  Matrix a(8, 1);
  for (std::size_t i = 0; i < 8; ++i) a(i, 0) = col[i];
  pmf.factors = {a};
  Histogram h;
  h.lo = e.front();
  h.hi = e.back();
  h.cuts.assign(e.begin() + 1, e.end() - 1);
  h.probabilities = col;
  h.counts.assign(8, 0);
  const Histogram hs[] = {h};
  const DensityModel dm = build_density_model(pmf, hs);
  for (bool renorm : {false, true}) {
    double total = 0.0;
    for (std::size_t i = 0; i < 8; ++i)
      total += bq::gauss_kronrod<double, 31>::integrate(
          [&](double x) {
            const double xs[] = {x};
            return eval_joint_pdf(dm, xs, PdfOptions{renorm});
          },
          e[i], e[i + 1], 15, 1e-13);
    if (renorm)
      CHECK(std::abs(total - 1.0) < 1e-8);
    else
      CHECK(std::abs(total - (1.0 + dm.clipped_mass[0][0])) < 1e-8);
  }
}

TEST_CASE("density model from a fitted PMF") {
  std::vector<std::vector<double>> rows;
  mdlpdf::Rng rng(14);
  for (int t = 0; t < 2000; ++t) {
    const bool c = rng.uniform_open() < 0.4;
    rows.push_back({rng.normal(c ? -2 : 2, 0.7), rng.normal(c ? 1 : -1, 1.0)});
  }
  const auto m = testutil::samples(rows);
  const auto hists = fit_histograms(m, {});
  const auto data = discretize(m, hists);
  FitConfig cfg;
  cfg.rank = 2;
  cfg.seed = 1;
  const auto fit = fit_pmf(data, cfg);
  const DensityModel dm = build_density_model(fit.model, hists);
  REQUIRE(dm.dims() == 2);
  for (std::size_t n = 0; n < 2; ++n) {
    CHECK(dm.edges[n] == hists[n].edges());
    for (std::size_t r = 0; r < 2; ++r) {
      const auto& s = dm.splines[n][r];
      for (std::size_t j = 0; j < dm.edges[n].size(); ++j) {
        double cum = 0.0;
        for (std::size_t i = 0; i < j; ++i) cum += fit.model.factors[n](i, r);
        CHECK(std::abs(eval_spline(s, dm.edges[n][j]) - cum) <= 1e-12);
      }
      CHECK(std::abs(eval_spline(s, dm.edges[n].front())) <= 1e-10);
      CHECK(std::abs(eval_spline(s, dm.edges[n].back()) - 1.0) <= 1e-10);
      CHECK(dm.clipped_mass[n][r] == clipped_mass(s));
    }
  }
  // outside every domain
  const double far[] = {1e6, 1e6};
  CHECK(eval_joint_pdf(dm, far) == 0.0);
  CHECK(eval_joint_log_pdf(dm, far) == -std::numeric_limits<double>::infinity());
  // nonnegative everywhere on a grid
  for (double x = -6; x <= 6; x += 0.05) {
    const double p[] = {x, 0.3 * x};
    CHECK(eval_joint_pdf(dm, p) >= 0.0);
  }
}

TEST_CASE("joint density equals the manual mixture expansion") {
  PmfModel pmf;
  pmf.lambda = {0.3, 0.7};
  Matrix a(2, 2), b(3, 2);
  a(0, 0) = 0.2;
  a(1, 0) = 0.8;
  a(0, 1) = 0.6;
  a(1, 1) = 0.4;
  b(0, 0) = 0.1;
  b(1, 0) = 0.3;
  b(2, 0) = 0.6;
  b(0, 1) = 0.5;
  b(1, 1) = 0.25;
  b(2, 1) = 0.25;
  pmf.factors = {a, b};
  Histogram h0, h1;
  h0.lo = 0;
  h0.hi = 2;
  h0.cuts = {0.5};
  h0.probabilities = {0.5, 0.5};
  h0.counts = {1, 1};
  h1.lo = -1;
  h1.hi = 4;
  h1.cuts = {1, 1.5};
  h1.probabilities = {0.3, 0.3, 0.4};
  h1.counts = {1, 1, 1};
  const Histogram hs[] = {h0, h1};
  const DensityModel dm = build_density_model(pmf, hs);
  mdlpdf::Rng rng(15);
  for (int k = 0; k < 50; ++k) {
    const double x[] = {2 * rng.uniform_open(), -1 + 5 * rng.uniform_open()};
    double expect = 0.0;
    for (std::size_t r = 0; r < 2; ++r)
      expect += pmf.lambda[r] * eval_conditional_pdf(dm.splines[0][r], x[0]) *
                eval_conditional_pdf(dm.splines[1][r], x[1]);
    CHECK(eval_joint_pdf(dm, x) == doctest::Approx(expect).epsilon(1e-12));
  }
  // a missing dimension is marginalized
  const double x[] = {0.7, 100.0};
  const std::uint8_t obs[] = {1, 0};
  const auto terms = component_log_terms(dm, x, obs);
  for (std::size_t r = 0; r < 2; ++r)
    CHECK(std::exp(terms[r]) ==
          doctest::Approx(pmf.lambda[r] * eval_conditional_pdf(dm.splines[0][r], 0.7)).epsilon(1e-12));
}

TEST_CASE("single-bin histograms give a scaled smoothstep") {
  PmfModel pmf;
  pmf.lambda = {1.0};
  pmf.factors = {Matrix(1, 1, 1.0)};
  Histogram h;
  h.lo = 2;
  h.hi = 6;
  h.probabilities = {1.0};
  h.counts = {4};
  const Histogram hs[] = {h};
  const DensityModel dm = build_density_model(pmf, hs);
  for (double u : {0.1, 0.25, 0.5, 0.9}) {
    const double x[] = {2 + 4 * u};
    CHECK(eval_joint_pdf(dm, x) == doctest::Approx((6 * u - 6 * u * u) / 4).epsilon(1e-13));
  }
}

TEST_CASE("R = 1, N = 1: joint equals the conditional PDF") {
  PmfModel pmf;
  pmf.lambda = {1.0};
  Matrix a(2, 1);
  a(0, 0) = 0.5;
  a(1, 0) = 0.5;
  pmf.factors = {a};
  Histogram h;
  h.lo = 0;
  h.hi = 2;
  h.cuts = {1};
  h.probabilities = {0.5, 0.5};
  h.counts = {1, 1};
  const Histogram hs[] = {h};
  const DensityModel dm = build_density_model(pmf, hs);
  for (double x : {-1.0, 0.0, 0.3, 1.0, 1.7, 2.0, 3.0}) {
    const double xs[] = {x};
    CHECK(eval_joint_pdf(dm, xs) == doctest::Approx(eval_conditional_pdf(dm.splines[0][0], x)).epsilon(1e-14));
  }
  const double mid[] = {0.5};
  CHECK(eval_joint_pdf(dm, mid) == doctest::Approx(0.5625).epsilon(1e-14));
}

TEST_CASE("sampler follows the clipped density") {
  mdlpdf::Rng rng(16);
  const auto col = random_simplex(6, rng, 0.5);
  const auto e = random_edges(6, rng);
  PmfModel pmf;
  pmf.lambda = {1.0};
  Matrix a(6, 1);
  for (std::size_t i = 0; i < 6; ++i) a(i, 0) = col[i];
  pmf.factors = {a};
  Histogram h;
  h.lo = e.front();
  h.hi = e.back();
  h.cuts.assign(e.begin() + 1, e.end() - 1);
  h.probabilities = col;
  h.counts.assign(6, 0);
  const Histogram hs[] = {h};
  const DensityModel dm = build_density_model(pmf, hs);
  const auto& s = dm.splines[0][0];
  const double total = 1.0 + dm.clipped_mass[0][0];
  DensitySampler sampler(dm);
  const std::size_t M = 200000;
  std::vector<double> freq(6, 0.0);
  mdlpdf::Rng draw(17);
  double x[1];
  for (std::size_t m = 0; m < M; ++m) {
    sampler.sample(draw, x);
    REQUIRE(x[0] >= e.front());
    REQUIRE(x[0] <= e.back());
    freq[h.bin_of(x[0]) - 1] += 1.0 / M;
  }
  for (std::size_t i = 0; i < 6; ++i) {
    const double p = (col[i] + negative_part(s, e[i], e[i + 1])) / total;
    CHECK(std::abs(freq[i] - p) < 5 * std::sqrt(p * (1 - p) / M) + 1e-12);
  }
}

TEST_CASE("degenerate knots are rejected") {
  const std::vector<Knot> one{{0, 0}};
  CHECK_THROWS_AS(fit_clamped_cubic(one), Error);
  const std::vector<Knot> dup{{0, 0}, {0, 1}};
  try {
    fit_clamped_cubic(dup);
    FAIL("expected DegenerateKnots");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateKnots);
  }
}
