#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mdlpdf/core_types.hpp"

namespace mdlpdf {

struct FitConfig {
  std::size_t rank = 1;
  std::size_t max_iters = 1000;
  double rel_ll_tol = 1e-7;
  std::uint64_t seed = 0;
  double min_prob_floor = 1e-12;
  bool squarem_enabled = true;
  std::size_t threads = 1;
};

struct FitReport {
  double final_nll = 0.0;
  std::vector<double> nll_trace;  // entry 0 is the initial model
  std::size_t iterations = 0;
  std::size_t em_steps_taken = 0;
  std::size_t fallback_count = 0;
  bool converged = false;
};

/// -sum_t log sum_r lambda_r prod_{n observed} A_n(x_{n,t}, r).
/// Per-record component terms are summed in sorted order, so the value is
/// bit-identical under any relabelling of the latent components.
double negative_log_likelihood(const PmfModel& model, const DiscretizedDataset& data, std::size_t threads = 1);

/// One EM update (latent-class E-step and M-step), floored and renormalized.
PmfModel em_step(const PmfModel& model, const DiscretizedDataset& data, double floor = 1e-12,
                 std::size_t threads = 1);

struct SquaremResult {
  PmfModel model;
  double nll = 0.0;
  bool accepted = false;
  std::size_t em_steps = 0;
};

/// theta0 - 2 alpha r + alpha^2 v with r = theta1 - theta0 and
/// v = theta2 - 2 theta1 + theta0, taken entrywise over all parameters.
/// No projection is applied.
PmfModel squarem_extrapolate(const PmfModel& theta0, const PmfModel& theta1, const PmfModel& theta2, double alpha);

/// Clips every entry at `floor` and renormalizes lambda and each factor column.
void project_to_simplex(PmfModel& model, double floor);

/// One SQUAREM iteration. The returned model never has a larger NLL than
/// two plain EM steps from `model`; `accepted` is false when the
/// extrapolated candidate was rejected in favour of that double-EM point.
SquaremResult squarem_step(const PmfModel& model, const DiscretizedDataset& data, double floor = 1e-12,
                           std::size_t threads = 1);

/// lambda uniform, factor columns from a symmetric Dirichlet(1).
PmfModel initial_model(std::span<const std::uint32_t> cardinalities, std::size_t rank, std::uint64_t seed,
                       double floor = 1e-12);

struct FitResult {
  PmfModel model;
  FitReport report;
};

FitResult fit_pmf(const DiscretizedDataset& data, const FitConfig& config);
/// Same, starting from a caller-provided model.
FitResult fit_pmf(const DiscretizedDataset& data, const FitConfig& config, PmfModel start);

/// Posterior over latent states for one record (missing cells skipped).
std::vector<double> responsibilities(const PmfModel& model, std::span<const std::uint32_t> record,
                                     std::span<const std::uint8_t> observed);

/// Posterior rows for every record of `data` (T x R).
Matrix all_responsibilities(const PmfModel& model, const DiscretizedDataset& data);

/// Dense joint PMF tensor (row-major over dims, first index slowest). Only for small models.
std::vector<double> joint_pmf_tensor(const PmfModel& model);

}  // namespace mdlpdf
