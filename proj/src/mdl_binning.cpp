#include "mdlpdf/mdl_binning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace mdlpdf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_binom(std::size_t n, std::size_t k) {
  if (k > n) return -kInf;
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

void require_sorted(std::span<const double> sorted) {
  if (sorted.size() < 2) fail(ErrorCode::TooFewDistinctValues, "need at least two sample values");
  if (!std::is_sorted(sorted.begin(), sorted.end())) fail(ErrorCode::InvalidArgument, "sample must be sorted");
  if (sorted.front() == sorted.back()) fail(ErrorCode::TooFewDistinctValues, "all sample values are equal");
}

std::vector<double> sorted_copy(std::span<const double> values) {
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

std::string_view to_string(CutStrategy s) noexcept {
  switch (s) {
    case CutStrategy::Quantile: return "quantile";
    case CutStrategy::Midpoint: return "midpoint";
    case CutStrategy::TwoCuts: return "two_cuts";
    case CutStrategy::Uniform: return "uniform";
  }
  return "unknown";
}

CutStrategy parse_cut_strategy(std::string_view name) {
  if (name == "quantile") return CutStrategy::Quantile;
  if (name == "midpoint" || name == "midpoints") return CutStrategy::Midpoint;
  if (name == "two_cuts" || name == "two-cuts") return CutStrategy::TwoCuts;
  if (name == "uniform") return CutStrategy::Uniform;
  fail(ErrorCode::InvalidArgument, "unknown cut strategy '" + std::string(name) + "'");
}

DomainBounds domain_bounds(std::span<const double> sorted) {
  if (sorted.empty()) fail(ErrorCode::EmptyInput, "no values to bound");
  const double mn = sorted.front();
  const double mx = sorted.back();
  const double delta = mx > mn ? 1e-9 * (mx - mn) : 1e-9;
  return {mn - delta, mx + delta};
}

CandidateCuts quantile_candidates(std::span<const double> sorted, std::size_t E) {
  require_sorted(sorted);
  if (E < 2) fail(ErrorCode::InvalidArgument, "quantile candidates need E >= 2");
  const auto [lo, hi] = domain_bounds(sorted);
  const std::size_t T = sorted.size();
  const double mx = sorted.back();
  CandidateCuts out{{}, CutStrategy::Quantile, lo, hi};
  for (std::size_t j = 1; j < E; ++j) {
    // smallest y with #{x <= y} / T >= j / E is the ceil(T j / E)-th order statistic
    const std::size_t rank = (T * j + E - 1) / E;
    const double q = sorted[rank - 1];
    if (q >= mx) break;
    if (out.points.empty() || q > out.points.back()) out.points.push_back(q);
  }
  if (out.points.empty()) fail(ErrorCode::TooFewDistinctValues, "all quantile candidates collapse");
  return out;
}

CandidateCuts midpoint_candidates(std::span<const double> sorted) {
  require_sorted(sorted);
  const auto [lo, hi] = domain_bounds(sorted);
  CandidateCuts out{{}, CutStrategy::Midpoint, lo, hi};
  for (std::size_t t = 1; t < sorted.size(); ++t) {
    if (sorted[t] == sorted[t - 1]) continue;
    out.points.push_back(sorted[t - 1] + 0.5 * (sorted[t] - sorted[t - 1]));
  }
  return out;
}

CandidateCuts two_cut_candidates(std::span<const double> sorted, std::optional<double> epsilon) {
  require_sorted(sorted);
  if (epsilon && !(*epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "two-cut epsilon must be positive");
  const auto [lo, hi] = domain_bounds(sorted);
  CandidateCuts out{{}, CutStrategy::TwoCuts, lo, hi};
  for (std::size_t t = 1; t < sorted.size(); ++t) {
    const double a = sorted[t - 1];
    const double b = sorted[t];
    if (a == b) continue;
    const double eps = epsilon ? *epsilon : 0.1 * (b - a);
    const double left = a + eps;
    const double right = b - eps;
    if (left < right) {
      out.points.push_back(left);
      out.points.push_back(right);
    } else {
      out.points.push_back(a + 0.5 * (b - a));
    }
  }
  return out;
}

CandidateCuts uniform_candidates(std::span<const double> sorted, std::size_t E) {
  require_sorted(sorted);
  if (E < 1) fail(ErrorCode::InvalidArgument, "uniform grid needs E >= 1");
  const auto [lo, hi] = domain_bounds(sorted);
  CandidateCuts out{{}, CutStrategy::Uniform, lo, hi};
  for (std::size_t j = 1; j < E; ++j)
    out.points.push_back(lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(E));
  return out;
}

std::vector<double> log_complexity_table(std::size_t K_max, std::size_t n) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "complexity needs n >= 1");
  std::vector<double> table(std::max<std::size_t>(K_max, 2) + 1, 0.0);
  table[1] = 0.0;
  // C(2, n) = sum_h binom(n, h) (h/n)^h ((n-h)/n)^(n-h)
  const double nd = static_cast<double>(n);
  double c2 = -kInf;
  for (std::size_t h = 0; h <= n; ++h) {
    const double hd = static_cast<double>(h);
    const double term = log_binom(n, h) + xlogy(hd, hd / nd) + xlogy(nd - hd, (nd - hd) / nd);
    c2 = log_add_exp(c2, term);
  }
  table[2] = c2;
  // C(k + 2, n) = C(k + 1, n) + (n / k) C(k, n)
  for (std::size_t k = 1; k + 2 < table.size(); ++k)
    table[k + 2] = log_add_exp(table[k + 1], std::log(nd / static_cast<double>(k)) + table[k]);
  table.resize(K_max + 1);
  return table;
}

double log_multinomial_complexity(std::size_t K, std::size_t n) {
  if (K == 0) fail(ErrorCode::InvalidArgument, "complexity needs K >= 1");
  return log_complexity_table(K, n)[K];
}

ScContext make_sc_context(std::size_t n, std::size_t K_max, std::size_t E) {
  if (E == 0) fail(ErrorCode::InvalidArgument, "candidate count must be positive");
  return ScContext{n, log_complexity_table(K_max, n), E};
}

double bin_code_length(std::int64_t h, std::size_t n, double width) noexcept {
  if (h == 0) return 0.0;
  const double hd = static_cast<double>(h);
  return -(hd * std::log(hd / (static_cast<double>(n) * width)));
}

double stochastic_complexity(std::span<const std::int64_t> counts, std::span<const double> widths,
                             const ScContext& ctx, std::size_t K_chosen) {
  if (counts.size() != widths.size()) fail(ErrorCode::ShapeMismatch, "counts and widths differ in length");
  if (K_chosen == 0 || K_chosen >= ctx.log_complexity_table.size())
    fail(ErrorCode::InvalidArgument, "K_chosen outside the precomputed complexity table");
  for (double w : widths)
    if (!(w > 0.0)) fail(ErrorCode::WidthNonPositive, "bin width must be positive");
  // Accumulated from the last bin backwards; the DP search sums in the same
  // order, so optimal scores agree bit-for-bit with this function.
  double likelihood = 0.0;
  for (std::size_t k = counts.size(); k-- > 0;)
    likelihood = bin_code_length(counts[k], ctx.n, widths[k]) + likelihood;
  return likelihood + ctx.log_complexity_table[K_chosen] + log_binom(ctx.candidate_count - 1, K_chosen - 1);
}

Histogram histogram_from_cuts(std::span<const double> sorted, std::vector<double> cuts, double lo, double hi,
                              std::size_t E) {
  Histogram h;
  h.cuts = std::move(cuts);
  h.lo = lo;
  h.hi = hi;
  const std::size_t K = h.bins();
  h.counts.assign(K, 0);
  std::size_t prev = 0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const auto pos = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), h.cuts[k]) -
                                              sorted.begin());
    h.counts[k] = static_cast<std::int64_t>(pos - prev);
    prev = pos;
  }
  h.counts[K - 1] = static_cast<std::int64_t>(sorted.size() - prev);
  h.probabilities.resize(K);
  const double T = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k < K; ++k) h.probabilities[k] = static_cast<double>(h.counts[k]) / T;

  const auto edges = h.edges();
  std::vector<double> widths(K);
  for (std::size_t k = 0; k < K; ++k) widths[k] = edges[k + 1] - edges[k];
  const ScContext ctx = make_sc_context(sorted.size(), K, std::max(E, K));
  h.sc_score = stochastic_complexity(h.counts, widths, ctx, K);
  validate_histogram(h);
  return h;
}

Histogram optimal_histogram_from_candidates(std::span<const double> sorted, const CandidateCuts& cands,
                                            std::size_t K_max) {
  const std::size_t M = cands.points.size();  // candidate cut count, E = M + 1
  const std::size_t E = M + 1;
  if (K_max < 1 || K_max > E) fail(ErrorCode::InvalidArgument, "K_max must lie in [1, E]");
  const std::size_t n = sorted.size();

  std::vector<double> b;
  b.reserve(M + 2);
  b.push_back(cands.lo);
  b.insert(b.end(), cands.points.begin(), cands.points.end());
  b.push_back(cands.hi);
  for (std::size_t j = 1; j < b.size(); ++j)
    if (!(b[j] > b[j - 1])) fail(ErrorCode::EdgesNotIncreasing, "candidate cuts must be strictly increasing");

  std::vector<std::int64_t> prefix(M + 2, 0);
  for (std::size_t j = 1; j <= M; ++j)
    prefix[j] = std::upper_bound(sorted.begin(), sorted.end(), b[j]) - sorted.begin();
  prefix[M + 1] = static_cast<std::int64_t>(n);

  auto cost = [&](std::size_t i, std::size_t j) {
    return bin_code_length(prefix[j] - prefix[i], n, b[j] - b[i]);
  };

  // best[j * stride + k]: shortest likelihood code for (b_j, hi] split into k bins.
  const std::size_t stride = K_max + 1;
  std::vector<double> best((M + 2) * stride, kInf);
  best[(M + 1) * stride + 0] = 0.0;
  for (std::size_t i = M + 1; i-- > 0;) {
    double* gi = best.data() + i * stride;
    for (std::size_t j = i + 1; j <= M + 1; ++j) {
      const double c = cost(i, j);
      const double* gj = best.data() + j * stride;
      const std::size_t kmax = std::min(K_max, M + 2 - j);
      for (std::size_t k = 1; k <= kmax; ++k) {
        const double cand = c + gj[k - 1];
        gi[k] = cand < gi[k] ? cand : gi[k];
      }
    }
  }

  const auto table = log_complexity_table(K_max, n);
  std::size_t best_k = 0;
  double best_score = kInf;
  for (std::size_t k = 1; k <= K_max; ++k) {
    const double like = best[k];
    if (like == kInf) continue;
    const double score = like + table[k] + log_binom(M, k - 1);
    if (score < best_score) {
      best_score = score;
      best_k = k;
    }
  }

  // Forward walk taking the smallest tight successor yields the
  // lexicographically smallest optimal cut-index set.
  std::vector<double> cuts;
  std::size_t i = 0;
  for (std::size_t k = best_k; k > 1; --k) {
    const double target = best[i * stride + k];
    std::size_t next = M + 1;
    for (std::size_t j = i + 1; j <= M; ++j) {
      if (cost(i, j) + best[j * stride + k - 1] == target) {
        next = j;
        break;
      }
    }
    if (next > M) fail(ErrorCode::InvalidArgument, "internal error: DP reconstruction failed");
    cuts.push_back(b[next]);
    i = next;
  }
  return histogram_from_cuts(sorted, std::move(cuts), cands.lo, cands.hi, E);
}

CandidateCuts make_candidates(std::span<const double> values, const BinningOptions& opts) {
  const auto sorted = sorted_copy(values);
  const std::size_t E = opts.E ? opts.E : std::min<std::size_t>(sorted.size(), 200);
  switch (opts.strategy) {
    case CutStrategy::Quantile: return quantile_candidates(sorted, E);
    case CutStrategy::Midpoint: return midpoint_candidates(sorted);
    case CutStrategy::TwoCuts: return two_cut_candidates(sorted, opts.two_cut_epsilon);
    case CutStrategy::Uniform: return uniform_candidates(sorted, E);
  }
  fail(ErrorCode::InvalidArgument, "unknown strategy");
}

Histogram optimal_histogram(std::span<const double> values, const BinningOptions& opts) {
  const auto sorted = sorted_copy(values);
  const CandidateCuts cands = make_candidates(sorted, opts);
  const std::size_t E = cands.points.size() + 1;
  std::size_t K_max = opts.K_max;
  if (K_max == 0) {
    const bool grid = opts.strategy == CutStrategy::Quantile || opts.strategy == CutStrategy::Uniform;
    K_max = grid ? E : std::min<std::size_t>(E, 50);
  }
  K_max = std::min(K_max, E);
  return optimal_histogram_from_candidates(sorted, cands, K_max);
}

Histogram uniform_histogram(std::span<const double> values, std::size_t K, double lo, double hi) {
  if (K < 1) fail(ErrorCode::InvalidArgument, "uniform histogram needs K >= 1");
  if (values.empty()) fail(ErrorCode::EmptyInput, "no values to bin");
  if (!(lo < hi)) fail(ErrorCode::EdgesNotIncreasing, "uniform histogram requires lo < hi");
  std::vector<double> cuts;
  for (std::size_t j = 1; j < K; ++j)
    cuts.push_back(lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(K));
  auto sorted = sorted_copy(values);
  for (auto& v : sorted) v = std::clamp(v, lo, hi);
  return histogram_from_cuts(sorted, std::move(cuts), lo, hi, K);
}

Histogram uniform_histogram(std::span<const double> values, std::size_t K) {
  const auto sorted = sorted_copy(values);
  const auto [lo, hi] = domain_bounds(sorted);
  return uniform_histogram(sorted, K, lo, hi);
}

DiscretizedDataset discretize(const SampleMatrix& sample, std::span<const Histogram> histograms) {
  if (histograms.size() != sample.cols())
    fail(ErrorCode::DimensionMismatch, "need one histogram per sample dimension");
  const std::size_t T = sample.rows();
  const std::size_t N = sample.cols();
  std::vector<std::uint32_t> card(N);
  for (std::size_t n = 0; n < N; ++n) card[n] = static_cast<std::uint32_t>(histograms[n].bins());
  std::vector<std::uint32_t> idx(T * N, 0);
  std::vector<std::uint8_t> mask(T * N, 0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      if (!sample.observed(t, n)) continue;
      mask[t * N + n] = 1;
      idx[t * N + n] = histograms[n].bin_of(sample.value(t, n));
    }
  }
  return DiscretizedDataset(T, std::move(card), std::move(idx), std::move(mask));
}

std::vector<Histogram> fit_histograms(const SampleMatrix& sample, const BinningOptions& opts,
                                      std::size_t threads) {
  const std::size_t N = sample.cols();
  std::vector<Histogram> out(N);
  auto fit_one = [&](std::size_t n) {
    const auto col = sample.observed_column(n);
    if (opts.strategy == CutStrategy::Uniform)
      out[n] = uniform_histogram(col, opts.E ? opts.E : 20);
    else
      out[n] = optimal_histogram(col, opts);
  };
  threads = std::clamp<std::size_t>(threads, 1, N);
  if (threads == 1) {
    for (std::size_t n = 0; n < N; ++n) fit_one(n);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t n = next++; n < N; n = next++) {
        try {
          fit_one(n);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace mdlpdf
