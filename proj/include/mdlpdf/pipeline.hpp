#pragma once

#include <vector>

#include "mdlpdf/core_types.hpp"
#include "mdlpdf/mdl_binning.hpp"
#include "mdlpdf/pmf_factorization.hpp"
#include "mdlpdf/spline_reconstruction.hpp"

namespace mdlpdf {

struct PipelineConfig {
  /// CutStrategy::Uniform here means plain equal-width bins (binning.E of them).
  BinningOptions binning;
  FitConfig fit;
  SplineBoundary boundary = SplineBoundary::Clamped;
};

struct PipelineResult {
  std::vector<Histogram> histograms;
  DiscretizedDataset discretized;
  FitReport report;
  DensityModel density;
};

/// Binning, factorization and spline reconstruction in sequence.
PipelineResult fit_pipeline(const SampleMatrix& sample, const PipelineConfig& config);

}  // namespace mdlpdf
