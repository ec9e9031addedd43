#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdlpdf/core_types.hpp"
#include "mdlpdf/mdl_binning.hpp"
#include "mdlpdf/pmf_factorization.hpp"

namespace mdlpdf {

// Seeded replays of the synthetic studies. Every study returns tidy rows
// (one per trial and method) and has a CSV writer for external plotting.

struct StrategyComparisonConfig {
  MixtureSpec spec;
  std::size_t T = 20000;
  std::size_t trials = 10;
  std::uint64_t seed = 1;
  std::size_t quantile_E = 200;
  std::size_t K_max = 50;
  std::vector<CutStrategy> strategies{CutStrategy::Quantile, CutStrategy::TwoCuts, CutStrategy::Midpoint};
};

struct StrategyRow {
  std::size_t trial = 0;
  CutStrategy strategy = CutStrategy::Quantile;
  std::size_t candidates = 0;
  std::size_t bins = 0;
  double sc_score = 0.0;
  double holdout_nll = 0.0;
  double seconds = 0.0;
};

std::vector<StrategyRow> run_strategy_comparison(const StrategyComparisonConfig& cfg);
std::string strategy_rows_csv(const std::vector<StrategyRow>& rows);

struct HistogramKldConfig {
  MixtureSpec spec;
  std::size_t T = 10000;
  std::size_t trials = 50;
  std::uint64_t seed = 2;
  std::size_t M = 100000;
  std::size_t quantile_E = 200;
  std::vector<std::size_t> uniform_bins{20, 100, 200};
};

struct HistogramKldRow {
  std::size_t trial = 0;
  std::string method;
  std::size_t bins = 0;
  double kld = 0.0;
};

std::vector<HistogramKldRow> run_histogram_kld(const HistogramKldConfig& cfg);
std::string histogram_kld_rows_csv(const std::vector<HistogramKldRow>& rows);

struct PipelineStudyConfig {
  MixtureSpec spec;
  std::vector<std::size_t> sample_sizes{1000, 10000, 100000};
  std::size_t trials = 20;
  std::uint64_t seed = 3;
  std::size_t M = 100000;
  std::size_t uniform_bins = 20;
  BinningOptions mdl_binning{};
  FitConfig fit{};
};

struct PipelineRow {
  std::size_t T = 0;
  std::size_t trial = 0;
  std::string method;
  double median_bins = 0.0;
  double kld = 0.0;
  double clustering_accuracy = 0.0;
  std::size_t iterations = 0;
  double final_nll = 0.0;
  double max_clipped_mass = 0.0;
};

std::vector<PipelineRow> run_pipeline_study(const PipelineStudyConfig& cfg);
std::string pipeline_rows_csv(const std::vector<PipelineRow>& rows);

struct AccelerationConfig {
  MixtureSpec spec;
  std::vector<std::size_t> sample_sizes{1000, 10000, 100000};
  std::size_t trials = 10;
  std::uint64_t seed = 4;
  FitConfig fit{};
};

struct AccelerationRow {
  std::size_t T = 0;
  std::size_t trial = 0;
  std::size_t em_iterations = 0;
  std::size_t squarem_iterations = 0;
  std::size_t squarem_em_steps = 0;
  double em_nll = 0.0;
  double squarem_nll = 0.0;
  bool em_monotone = true;
  bool squarem_monotone = true;
};

/// Plain EM vs SQUAREM from the same start on MDL-discretized mixture data.
std::vector<AccelerationRow> run_acceleration_study(const AccelerationConfig& cfg);
std::string acceleration_rows_csv(const std::vector<AccelerationRow>& rows);

double median(std::vector<double> v);

}  // namespace mdlpdf
