#include "mdlpdf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace mdlpdf {

namespace {

constexpr std::size_t kMcChunk = 4096;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double l : v) s += std::exp(l - mx);
  return mx + std::log(s);
}

}  // namespace

std::vector<double> kld_monte_carlo(const LogDensityFn& true_log_pdf, std::span<const LogDensityFn> est_log_pdfs,
                                    const SamplerFn& sampler, std::size_t dims, std::size_t M, std::uint64_t seed) {
  if (M == 0) fail(ErrorCode::InvalidArgument, "Monte-Carlo sample count must be positive");
  const double log_floor = std::log(kDensityFloor);
  std::vector<double> sums(est_log_pdfs.size(), 0.0);
  std::vector<double> x(dims);
  for (std::size_t chunk = 0; chunk * kMcChunk < M; ++chunk) {
    Rng rng(derive_seed(seed, chunk));
    const std::size_t end = std::min(M, (chunk + 1) * kMcChunk);
    for (std::size_t m = chunk * kMcChunk; m < end; ++m) {
      sampler(rng, x);
      const double lp = std::max(true_log_pdf(x), log_floor);
      for (std::size_t e = 0; e < est_log_pdfs.size(); ++e) sums[e] += lp - std::max(est_log_pdfs[e](x), log_floor);
    }
  }
  for (double& s : sums) s /= static_cast<double>(M);
  return sums;
}

double kld_monte_carlo(const LogDensityFn& true_log_pdf, const LogDensityFn& est_log_pdf, const SamplerFn& sampler,
                       std::size_t dims, std::size_t M, std::uint64_t seed) {
  return kld_monte_carlo(true_log_pdf, std::span<const LogDensityFn>(&est_log_pdf, 1), sampler, dims, M, seed)[0];
}

std::vector<std::size_t> max_weight_assignment(const Matrix& weights) {
  const std::size_t n = weights.rows();
  if (weights.cols() != n) fail(ErrorCode::DimensionMismatch, "assignment needs a square matrix");
  if (n == 0) return {};
  // Hungarian algorithm (potentials form) on cost = -weight, 1-based internals.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weights(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

double clustering_accuracy(std::span<const std::uint32_t> true_labels, std::span<const std::uint32_t> predicted) {
  if (true_labels.size() != predicted.size())
    fail(ErrorCode::DimensionMismatch, "label and prediction counts differ");
  if (true_labels.empty()) fail(ErrorCode::EmptyInput, "no labels");
  std::map<std::uint32_t, std::size_t> true_ids, pred_ids;
  for (auto l : true_labels) true_ids.emplace(l, 0);
  for (auto l : predicted) pred_ids.emplace(l, 0);
  std::size_t k = 0;
  for (auto& [_, id] : true_ids) id = k++;
  k = 0;
  for (auto& [_, id] : pred_ids) id = k++;
  const std::size_t S = std::max(true_ids.size(), pred_ids.size());
  Matrix confusion(S, S, 0.0);
  for (std::size_t t = 0; t < true_labels.size(); ++t)
    confusion(pred_ids[predicted[t]], true_ids[true_labels[t]]) += 1.0;
  const auto assign = max_weight_assignment(confusion);
  double matched = 0.0;
  for (std::size_t i = 0; i < S; ++i) matched += confusion(i, assign[i]);
  return matched / static_cast<double>(true_labels.size());
}

double clustering_accuracy(std::span<const std::uint32_t> true_labels, const Matrix& posteriors) {
  if (posteriors.rows() != true_labels.size())
    fail(ErrorCode::DimensionMismatch, "posterior row count differs from label count");
  std::vector<std::uint32_t> pred(posteriors.rows());
  for (std::size_t t = 0; t < posteriors.rows(); ++t) pred[t] = static_cast<std::uint32_t>(argmax(posteriors.row(t)));
  return clustering_accuracy(true_labels, pred);
}

double holdout_nll(const LogDensityFn& log_pdf, const SampleMatrix& holdout) {
  if (holdout.rows() == 0) fail(ErrorCode::EmptyInput, "holdout is empty");
  if (!holdout.fully_observed()) fail(ErrorCode::InvalidArgument, "holdout must be fully observed");
  const double log_floor = std::log(kDensityFloor);
  double nll = 0.0;
  for (std::size_t t = 0; t < holdout.rows(); ++t) nll -= std::max(log_pdf(holdout.row(t)), log_floor);
  return nll;
}

double histogram_log_density(const Histogram& h, double x, bool clamp) {
  if (!clamp && (x < h.lo || x > h.hi)) return kNegInf;
  const std::size_t k = h.bin_of(x) - 1;
  const double left = k == 0 ? h.lo : h.cuts[k - 1];
  const double right = k + 1 == h.bins() ? h.hi : h.cuts[k];
  const double p = h.probabilities[k];
  return p > 0.0 ? std::log(p / (right - left)) : kNegInf;
}

ClassifierModel train_classifier(const SampleMatrix& features, std::span<const std::string> labels,
                                 const PipelineConfig& config) {
  if (labels.size() != features.rows()) fail(ErrorCode::DimensionMismatch, "one label per training row required");
  ClassifierModel out;
  std::map<std::string, std::uint32_t> ids;
  for (const auto& l : labels) ids.emplace(l, 0);
  std::uint32_t k = 0;
  for (auto& [name, id] : ids) {
    id = k++;
    out.classes.push_back(name);
  }

  out.histograms = fit_histograms(features, config.binning, config.fit.threads);
  const DiscretizedDataset feat = discretize(features, out.histograms);
  const std::size_t T = features.rows();
  const std::size_t N = features.cols();
  std::vector<std::uint32_t> card = feat.cardinalities();
  card.push_back(static_cast<std::uint32_t>(out.classes.size()));
  std::vector<std::uint32_t> idx;
  std::vector<std::uint8_t> obs;
  idx.reserve(T * (N + 1));
  obs.reserve(T * (N + 1));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      idx.push_back(feat.index(t, n));
      obs.push_back(feat.observed(t, n) ? 1 : 0);
    }
    idx.push_back(ids[labels[t]] + 1);
    obs.push_back(1);
  }
  const DiscretizedDataset joint(T, std::move(card), std::move(idx), std::move(obs));
  FitResult fit = fit_pmf(joint, config.fit);
  out.report = std::move(fit.report);

  PmfModel feature_pmf;
  feature_pmf.lambda = fit.model.lambda;
  feature_pmf.factors.assign(fit.model.factors.begin(), fit.model.factors.begin() + static_cast<std::ptrdiff_t>(N));
  out.class_factor = fit.model.factors[N];
  out.features = build_density_model(feature_pmf, out.histograms, config.boundary);
  return out;
}

std::size_t predict_class(const ClassifierModel& model, std::span<const double> x, std::span<const std::uint8_t> observed,
                          ClassifierReadout readout, PdfOptions opts) {
  const DensityModel& dm = model.features;
  const std::size_t N = dm.dims();
  const std::size_t R = dm.rank();
  if (x.size() != N) fail(ErrorCode::DimensionMismatch, "test row has the wrong number of features");
  std::vector<double> terms(R);
  for (std::size_t r = 0; r < R; ++r) terms[r] = std::log(dm.pmf.lambda[r]);
  for (std::size_t n = 0; n < N; ++n) {
    if (!observed.empty() && !observed[n]) continue;
    const auto& e = dm.edges[n];
    std::vector<double> lp(R, kNegInf);
    bool any = false;
    if (readout == ClassifierReadout::Spline && x[n] >= e.front() && x[n] <= e.back()) {
      for (std::size_t r = 0; r < R; ++r) {
        double p = eval_conditional_pdf(dm.splines[n][r], x[n]);
        if (opts.renormalize) p /= 1.0 + dm.clipped_mass[n][r];
        if (p > 0.0) {
          lp[r] = std::log(p);
          any = true;
        }
      }
    }
    if (!any) {
      const Histogram& h = model.histograms[n];
      const std::size_t k = h.bin_of(x[n]) - 1;
      const double width = e[k + 1] - e[k];
      for (std::size_t r = 0; r < R; ++r) lp[r] = std::log(dm.pmf.factors[n](k, r) / width);
    }
    for (std::size_t r = 0; r < R; ++r) terms[r] += lp[r];
  }
  const std::size_t C = model.classes.size();
  std::vector<double> scores(C);
  std::vector<double> tmp(R);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t r = 0; r < R; ++r) tmp[r] = terms[r] + std::log(model.class_factor(c, r));
    scores[c] = log_sum_exp(tmp);
  }
  return argmax(scores);
}

ClassificationResult classify(const SampleMatrix& train, std::span<const std::string> train_labels,
                              const SampleMatrix& test, std::span<const std::string> test_labels,
                              const PipelineConfig& config, ClassifierReadout readout) {
  if (test.cols() != train.cols()) fail(ErrorCode::DimensionMismatch, "train and test feature counts differ");
  if (!test_labels.empty() && test_labels.size() != test.rows())
    fail(ErrorCode::DimensionMismatch, "one label per test row required");
  const ClassifierModel model = train_classifier(train, train_labels, config);
  if (!test_labels.empty()) {
    for (const auto& l : test_labels)
      if (!std::binary_search(model.classes.begin(), model.classes.end(), l))
        fail(ErrorCode::UnseenClassInTest, "test label '" + l + "' does not occur in the training data");
  }
  ClassificationResult out;
  std::size_t correct = 0;
  for (std::size_t t = 0; t < test.rows(); ++t) {
    std::vector<std::uint8_t> mask(test.cols());
    for (std::size_t n = 0; n < test.cols(); ++n) mask[n] = test.observed(t, n) ? 1 : 0;
    const std::size_t c = predict_class(model, test.row(t), mask, readout);
    out.predicted.push_back(model.classes[c]);
    if (!test_labels.empty() && model.classes[c] == test_labels[t]) ++correct;
  }
  if (!test_labels.empty()) out.accuracy = static_cast<double>(correct) / static_cast<double>(test.rows());
  return out;
}

}  // namespace mdlpdf
