#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdlpdf/core_types.hpp"
#include "mdlpdf/pipeline.hpp"
#include "mdlpdf/rng.hpp"

namespace mdlpdf {

/// Floor applied to densities before taking logs.
inline constexpr double kDensityFloor = 1e-300;

using LogDensityFn = std::function<double(std::span<const double>)>;
using SamplerFn = std::function<void(Rng&, std::span<double>)>;

/// (1/M) sum_m [log max(p(x_m), floor) - log max(q(x_m), floor)], x_m ~ p.
/// Draws come from per-chunk streams derived from `seed`.
double kld_monte_carlo(const LogDensityFn& true_log_pdf, const LogDensityFn& est_log_pdf, const SamplerFn& sampler,
                       std::size_t dims, std::size_t M, std::uint64_t seed);

/// Same estimate for several estimators over one shared set of draws.
std::vector<double> kld_monte_carlo(const LogDensityFn& true_log_pdf, std::span<const LogDensityFn> est_log_pdfs,
                                    const SamplerFn& sampler, std::size_t dims, std::size_t M, std::uint64_t seed);

/// Optimal one-to-one assignment maximizing the total weight of a square
/// matrix; returns the column assigned to each row.
std::vector<std::size_t> max_weight_assignment(const Matrix& weights);

/// Fraction of records whose argmax posterior matches the true label under
/// the best relabelling of predicted states.
double clustering_accuracy(std::span<const std::uint32_t> true_labels, const Matrix& posteriors);
double clustering_accuracy(std::span<const std::uint32_t> true_labels, std::span<const std::uint32_t> predicted);

/// -sum_t log max(density(x_t), floor). Requires a fully observed holdout.
double holdout_nll(const LogDensityFn& log_pdf, const SampleMatrix& holdout);

/// log(p_k / w_k) of the bin holding x. Outside [lo, hi] the result is -inf,
/// or the boundary bin's value when `clamp` is set.
double histogram_log_density(const Histogram& h, double x, bool clamp);

/// Fitted joint model over (features, class) with the class as one extra
/// discrete variable.
struct ClassifierModel {
  DensityModel features;
  std::vector<Histogram> histograms;
  Matrix class_factor;  // C x R
  std::vector<std::string> classes;
  FitReport report;
};

ClassifierModel train_classifier(const SampleMatrix& features, std::span<const std::string> labels,
                                 const PipelineConfig& config);

/// How predict_class evaluates the feature density of each latent state.
enum class ClassifierReadout {
  /// Piecewise-constant density A_n(k, r) / w_k of the bin holding x.
  Bins,
  /// Clipped spline PDF. A dimension where every conditional PDF vanishes at
  /// x falls back to the bin density.
  Spline,
};

/// Class index maximizing the joint density of (x, class).
std::size_t predict_class(const ClassifierModel& model, std::span<const double> x,
                          std::span<const std::uint8_t> observed = {},
                          ClassifierReadout readout = ClassifierReadout::Bins, PdfOptions opts = {});

struct ClassificationResult {
  std::vector<std::string> predicted;
  std::optional<double> accuracy;
};

/// Trains on (train, train_labels) and predicts every test row. When test
/// labels are given, accuracy is reported; an unseen test label is an error.
ClassificationResult classify(const SampleMatrix& train, std::span<const std::string> train_labels,
                              const SampleMatrix& test, std::span<const std::string> test_labels,
                              const PipelineConfig& config, ClassifierReadout readout = ClassifierReadout::Bins);

}  // namespace mdlpdf
