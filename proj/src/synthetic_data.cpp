#include "mdlpdf/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mdlpdf {

namespace {

constexpr std::size_t kChunk = 4096;

MixtureSpec univariate(std::vector<double> weights, std::vector<double> means, std::vector<double> sds) {
  MixtureSpec s;
  s.weights = std::move(weights);
  for (std::size_t r = 0; r < s.weights.size(); ++r) s.components.push_back({{means[r], sds[r]}});
  validate_mixture(s);
  return s;
}

}  // namespace

void draw_mixture_point(const MixtureSpec& spec, Rng& rng, std::span<double> out, std::uint32_t* label) {
  const std::size_t r = rng.categorical(spec.weights);
  const auto& comp = spec.components[r];
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = rng.normal(comp[n].mean, comp[n].sd);
  if (label) *label = static_cast<std::uint32_t>(r + 1);
}

LabeledSample sample_mixture(const MixtureSpec& spec, std::size_t T, std::uint64_t seed) {
  validate_mixture(spec);
  if (T == 0) fail(ErrorCode::EmptyInput, "sample size must be at least 1");
  const std::size_t N = spec.dims();
  RawTable raw;
  raw.rows = T;
  raw.cols = N;
  raw.values.resize(T * N);
  std::vector<std::uint32_t> labels(T);
  for (std::size_t chunk = 0; chunk * kChunk < T; ++chunk) {
    Rng rng(derive_seed(seed, chunk));
    const std::size_t end = std::min(T, (chunk + 1) * kChunk);
    for (std::size_t t = chunk * kChunk; t < end; ++t)
      draw_mixture_point(spec, rng, std::span<double>(raw.values.data() + t * N, N), &labels[t]);
  }
  return {validate_sample_matrix(std::move(raw), false), std::move(labels)};
}

double true_log_density(const MixtureSpec& spec, std::span<const double> x) {
  if (x.size() != spec.dims()) fail(ErrorCode::DimensionMismatch, "point has the wrong number of coordinates");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(spec.rank());
  for (std::size_t r = 0; r < spec.rank(); ++r) {
    if (spec.weights[r] <= 0.0) continue;
    double l = std::log(spec.weights[r]);
    for (std::size_t n = 0; n < x.size(); ++n) {
      const auto& g = spec.components[r][n];
      const double z = (x[n] - g.mean) / g.sd;
      l += -0.5 * z * z - std::log(g.sd) - half_log_2pi;
    }
    terms.push_back(l);
    mx = std::max(mx, l);
  }
  if (terms.empty() || mx == -std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double l : terms) s += std::exp(l - mx);
  return mx + std::log(s);
}

double true_density(const MixtureSpec& spec, std::span<const double> x) { return std::exp(true_log_density(spec, x)); }

MixtureSpec default_univariate5_spec() {
  return univariate({0.15, 0.25, 0.20, 0.30, 0.10}, {-8.0, -3.5, 0.0, 3.0, 8.0}, {1.5, 0.5, 1.0, 0.6, 2.0});
}

MixtureSpec default_univariate6_spec() {
  return univariate({0.10, 0.20, 0.15, 0.20, 0.15, 0.20}, {-9.0, -5.0, -1.5, 1.5, 5.0, 9.0},
                    {1.2, 0.6, 0.8, 0.5, 1.5, 0.9});
}

MixtureSpec default_gmm5d6_spec() {
  const std::vector<std::vector<double>> means = {
      {-8.0, 3.5, -2.0, 6.0, -5.5}, {-2.5, -7.0, 5.0, -1.0, 2.0}, {4.0, 1.0, -6.5, -7.5, 7.0},
      {9.0, -3.0, 1.5, 3.0, -9.0},  {0.5, 8.0, 8.5, -4.0, 4.5},   {-6.0, -0.5, -9.0, 9.5, -1.5},
  };
  const std::vector<std::vector<double>> sds = {
      {1.0, 0.6, 1.5, 0.8, 1.2}, {0.7, 1.8, 0.9, 0.5, 1.4}, {1.6, 0.8, 0.6, 1.1, 0.9},
      {0.9, 1.2, 2.0, 1.5, 0.7}, {1.3, 1.0, 0.7, 1.9, 0.5}, {0.5, 1.5, 1.1, 0.6, 1.7},
  };
  MixtureSpec s;
  s.weights = {0.12, 0.20, 0.15, 0.18, 0.20, 0.15};
  for (std::size_t r = 0; r < means.size(); ++r) {
    std::vector<GaussianFactor> comp;
    for (std::size_t n = 0; n < means[r].size(); ++n) comp.push_back({means[r][n], sds[r][n]});
    s.components.push_back(std::move(comp));
  }
  validate_mixture(s);
  return s;
}

}  // namespace mdlpdf
