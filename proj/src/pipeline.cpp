#include "mdlpdf/pipeline.hpp"

namespace mdlpdf {

PipelineResult fit_pipeline(const SampleMatrix& sample, const PipelineConfig& config) {
  PipelineResult out;
  out.histograms = fit_histograms(sample, config.binning, config.fit.threads);
  out.discretized = discretize(sample, out.histograms);
  FitResult fit = fit_pmf(out.discretized, config.fit);
  out.report = std::move(fit.report);
  out.density = build_density_model(fit.model, out.histograms, config.boundary);
  return out;
}

}  // namespace mdlpdf
