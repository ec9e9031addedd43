#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mdlpdf/core_types.hpp"

namespace mdlpdf {

enum class CutStrategy { Quantile, Midpoint, TwoCuts, Uniform };

std::string_view to_string(CutStrategy s) noexcept;
CutStrategy parse_cut_strategy(std::string_view name);

/// Candidate interior cut points for the MDL search, strictly inside (lo, hi).
struct CandidateCuts {
  std::vector<double> points;
  CutStrategy strategy = CutStrategy::Quantile;
  double lo = 0.0;
  double hi = 1.0;
};

/// Domain bounds padded by 1e-9 of the data range on each side.
struct DomainBounds {
  double lo;
  double hi;
};
DomainBounds domain_bounds(std::span<const double> sorted);

/// Empirical quantiles Q(j/E), j = 1..E-1, deduplicated. Q(p) is the
/// smallest sample value whose eCDF reaches p. Candidates equal to the sample
/// maximum are dropped (the bin above them would only hold padding).
CandidateCuts quantile_candidates(std::span<const double> sorted, std::size_t E);

/// One cut halfway between each pair of consecutive distinct values.
CandidateCuts midpoint_candidates(std::span<const double> sorted);

/// Two cuts per consecutive distinct pair (a, b): a + eps and b - eps, or the
/// midpoint when they would cross. Without `epsilon` the offset is 10% of b - a.
CandidateCuts two_cut_candidates(std::span<const double> sorted, std::optional<double> epsilon = std::nullopt);

/// E - 1 equally spaced interior cuts over the padded domain.
CandidateCuts uniform_candidates(std::span<const double> sorted, std::size_t E);

/// log C(K, n) in nats, the multinomial NML normalizer.
double log_multinomial_complexity(std::size_t K, std::size_t n);

/// Table of log C(k, n) for k = 0..K_max (entry 0 unused, entry 1 is 0).
std::vector<double> log_complexity_table(std::size_t K_max, std::size_t n);

struct ScContext {
  std::size_t n = 0;
  std::vector<double> log_complexity_table;  // index k -> log C(k, n)
  std::size_t candidate_count = 1;           // E: intervals induced by all candidates
};

ScContext make_sc_context(std::size_t n, std::size_t K_max, std::size_t E);

/// Code length of one bin holding h of n points over width w: -h log(h / (n w)).
double bin_code_length(std::int64_t h, std::size_t n, double width) noexcept;

/// Histogram stochastic complexity in nats: likelihood code + log C(K, n)
/// + log binom(E - 1, K - 1).
double stochastic_complexity(std::span<const std::int64_t> counts, std::span<const double> widths,
                             const ScContext& ctx, std::size_t K_chosen);

struct BinningOptions {
  CutStrategy strategy = CutStrategy::Quantile;
  /// Candidate interval count for quantile/uniform grids; 0 = min(T, 200).
  std::size_t E = 0;
  /// Largest bin count considered; 0 = default (E for grids, 50 otherwise).
  std::size_t K_max = 0;
  std::optional<double> two_cut_epsilon;
};

/// Candidate generation for an unsorted column.
CandidateCuts make_candidates(std::span<const double> values, const BinningOptions& opts);

/// MDL-optimal histogram over an explicit candidate set (exact DP search).
Histogram optimal_histogram_from_candidates(std::span<const double> sorted, const CandidateCuts& cands,
                                            std::size_t K_max);

/// MDL-optimal histogram of one column (values need not be sorted).
Histogram optimal_histogram(std::span<const double> values, const BinningOptions& opts);

/// K equal-width bins over the padded data range.
Histogram uniform_histogram(std::span<const double> values, std::size_t K);
/// K equal-width bins over explicit bounds.
Histogram uniform_histogram(std::span<const double> values, std::size_t K, double lo, double hi);

/// Histogram (counts, probabilities, score) of `sorted` for fixed cuts.
/// `E` is the candidate-interval count used for the subset-coding term.
Histogram histogram_from_cuts(std::span<const double> sorted, std::vector<double> cuts, double lo, double hi,
                              std::size_t E);

/// Maps every observed cell to its 1-based bin; out-of-domain values clamp.
DiscretizedDataset discretize(const SampleMatrix& sample, std::span<const Histogram> histograms);

/// Per-column histograms with the given options. Columns are fitted
/// independently, on up to `threads` worker threads.
std::vector<Histogram> fit_histograms(const SampleMatrix& sample, const BinningOptions& opts,
                                      std::size_t threads = 1);

}  // namespace mdlpdf
