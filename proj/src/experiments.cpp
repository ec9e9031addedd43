#include "mdlpdf/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "mdlpdf/csv.hpp"
#include "mdlpdf/evaluation.hpp"
#include "mdlpdf/pipeline.hpp"
#include "mdlpdf/synthetic_data.hpp"

namespace mdlpdf {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

SamplerFn mixture_sampler(const MixtureSpec& spec) {
  return [&spec](Rng& rng, std::span<double> x) { draw_mixture_point(spec, rng, x); };
}

LogDensityFn mixture_log_pdf(const MixtureSpec& spec) {
  return [&spec](std::span<const double> x) { return true_log_density(spec, x); };
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<StrategyRow> run_strategy_comparison(const StrategyComparisonConfig& cfg) {
  validate_mixture(cfg.spec);
  if (cfg.spec.dims() != 1) fail(ErrorCode::InvalidArgument, "strategy comparison needs a univariate spec");
  std::vector<StrategyRow> rows;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const auto train = sample_mixture(cfg.spec, cfg.T, derive_seed(cfg.seed, 2 * trial));
    const auto holdout = sample_mixture(cfg.spec, cfg.T, derive_seed(cfg.seed, 2 * trial + 1));
    const auto values = train.data.observed_column(0);
    for (CutStrategy strategy : cfg.strategies) {
      BinningOptions opts;
      opts.strategy = strategy;
      opts.E = cfg.quantile_E;
      opts.K_max = cfg.K_max;
      const auto start = std::chrono::steady_clock::now();
      const CandidateCuts cands = make_candidates(values, opts);
      std::vector<double> sorted(values);
      std::sort(sorted.begin(), sorted.end());
      const std::size_t K_max = std::min(cfg.K_max, cands.points.size() + 1);
      const Histogram h = optimal_histogram_from_candidates(sorted, cands, K_max);
      const double secs = seconds_since(start);
      const double nll =
          holdout_nll([&h](std::span<const double> x) { return histogram_log_density(h, x[0], true); }, holdout.data);
      rows.push_back({trial, strategy, cands.points.size(), h.bins(), h.sc_score, nll, secs});
    }
  }
  return rows;
}

std::string strategy_rows_csv(const std::vector<StrategyRow>& rows) {
  std::ostringstream out;
  out << "trial,strategy,candidates,bins,sc_score,holdout_nll,seconds\n";
  for (const auto& r : rows)
    out << r.trial << ',' << to_string(r.strategy) << ',' << r.candidates << ',' << r.bins << ','
        << format_double(r.sc_score) << ',' << format_double(r.holdout_nll) << ',' << format_double(r.seconds) << '\n';
  return out.str();
}

std::vector<HistogramKldRow> run_histogram_kld(const HistogramKldConfig& cfg) {
  validate_mixture(cfg.spec);
  if (cfg.spec.dims() != 1) fail(ErrorCode::InvalidArgument, "histogram KLD study needs a univariate spec");
  std::vector<HistogramKldRow> rows;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const auto train = sample_mixture(cfg.spec, cfg.T, derive_seed(cfg.seed, 2 * trial));
    const auto values = train.data.observed_column(0);
    std::vector<Histogram> hists;
    std::vector<std::string> names;
    BinningOptions opts;
    opts.E = cfg.quantile_E;
    hists.push_back(optimal_histogram(values, opts));
    names.push_back("mdl_quantile");
    for (std::size_t K : cfg.uniform_bins) {
      hists.push_back(uniform_histogram(values, K));
      names.push_back("uniform_" + std::to_string(K));
    }
    std::vector<LogDensityFn> est;
    for (const auto& h : hists)
      est.push_back([&h](std::span<const double> x) { return histogram_log_density(h, x[0], false); });
    const auto kld = kld_monte_carlo(mixture_log_pdf(cfg.spec), est, mixture_sampler(cfg.spec), 1, cfg.M,
                                     derive_seed(cfg.seed, 2 * trial + 1));
    for (std::size_t i = 0; i < hists.size(); ++i) rows.push_back({trial, names[i], hists[i].bins(), kld[i]});
  }
  return rows;
}

std::string histogram_kld_rows_csv(const std::vector<HistogramKldRow>& rows) {
  std::ostringstream out;
  out << "trial,method,bins,kld\n";
  for (const auto& r : rows) out << r.trial << ',' << r.method << ',' << r.bins << ',' << format_double(r.kld) << '\n';
  return out.str();
}

std::vector<PipelineRow> run_pipeline_study(const PipelineStudyConfig& cfg) {
  validate_mixture(cfg.spec);
  std::vector<PipelineRow> rows;
  const std::size_t N = cfg.spec.dims();
  for (std::size_t T : cfg.sample_sizes) {
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t trial_seed = derive_seed(cfg.seed, T * 1000 + trial);
      const auto train = sample_mixture(cfg.spec, T, derive_seed(trial_seed, 0));

      PipelineConfig mdl;
      mdl.binning = cfg.mdl_binning;
      mdl.fit = cfg.fit;
      mdl.fit.rank = cfg.fit.rank ? cfg.fit.rank : cfg.spec.rank();
      mdl.fit.seed = derive_seed(trial_seed, 1);
      PipelineConfig uni = mdl;
      uni.binning = BinningOptions{};
      uni.binning.strategy = CutStrategy::Uniform;
      uni.binning.E = cfg.uniform_bins;

      const PipelineResult fits[2] = {fit_pipeline(train.data, mdl), fit_pipeline(train.data, uni)};
      const std::string names[2] = {"mdl_quantile", "uniform_" + std::to_string(cfg.uniform_bins)};
      std::vector<LogDensityFn> est;
      for (const auto& f : fits)
        est.push_back([&f](std::span<const double> x) { return eval_joint_log_pdf(f.density, x); });
      const auto kld = kld_monte_carlo(mixture_log_pdf(cfg.spec), est, mixture_sampler(cfg.spec), N, cfg.M,
                                       derive_seed(trial_seed, 2));
      for (int m = 0; m < 2; ++m) {
        const auto& f = fits[m];
        PipelineRow row;
        row.T = T;
        row.trial = trial;
        row.method = names[m];
        std::vector<double> bins;
        for (const auto& h : f.histograms) bins.push_back(static_cast<double>(h.bins()));
        row.median_bins = median(bins);
        row.kld = kld[static_cast<std::size_t>(m)];
        row.clustering_accuracy = clustering_accuracy(train.labels, all_responsibilities(f.density.pmf, f.discretized));
        row.iterations = f.report.iterations;
        row.final_nll = f.report.final_nll;
        for (const auto& per_dim : f.density.clipped_mass)
          for (double c : per_dim) row.max_clipped_mass = std::max(row.max_clipped_mass, c);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::string pipeline_rows_csv(const std::vector<PipelineRow>& rows) {
  std::ostringstream out;
  out << "T,trial,method,median_bins,kld,clustering_accuracy,iterations,final_nll,max_clipped_mass\n";
  for (const auto& r : rows)
    out << r.T << ',' << r.trial << ',' << r.method << ',' << format_double(r.median_bins) << ','
        << format_double(r.kld) << ',' << format_double(r.clustering_accuracy) << ',' << r.iterations << ','
        << format_double(r.final_nll) << ',' << format_double(r.max_clipped_mass) << '\n';
  return out.str();
}

std::vector<AccelerationRow> run_acceleration_study(const AccelerationConfig& cfg) {
  validate_mixture(cfg.spec);
  std::vector<AccelerationRow> rows;
  for (std::size_t T : cfg.sample_sizes) {
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      const std::uint64_t trial_seed = derive_seed(cfg.seed, T * 1000 + trial);
      const auto train = sample_mixture(cfg.spec, T, derive_seed(trial_seed, 0));
      const auto hists = fit_histograms(train.data, BinningOptions{});
      const auto data = discretize(train.data, hists);
      FitConfig fc = cfg.fit;
      if (fc.rank == 0) fc.rank = cfg.spec.rank();
      fc.seed = derive_seed(trial_seed, 1);
      const PmfModel start = initial_model(data.cardinalities(), fc.rank, fc.seed, fc.min_prob_floor);
      fc.squarem_enabled = false;
      const FitResult em = fit_pmf(data, fc, start);
      fc.squarem_enabled = true;
      const FitResult sq = fit_pmf(data, fc, start);
      AccelerationRow row;
      row.T = T;
      row.trial = trial;
      row.em_iterations = em.report.iterations;
      row.squarem_iterations = sq.report.iterations;
      row.squarem_em_steps = sq.report.em_steps_taken;
      row.em_nll = em.report.final_nll;
      row.squarem_nll = sq.report.final_nll;
      row.em_monotone = non_increasing(em.report.nll_trace);
      row.squarem_monotone = non_increasing(sq.report.nll_trace);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string acceleration_rows_csv(const std::vector<AccelerationRow>& rows) {
  std::ostringstream out;
  out << "T,trial,em_iterations,squarem_iterations,squarem_em_steps,em_nll,squarem_nll,em_monotone,squarem_monotone\n";
  for (const auto& r : rows)
    out << r.T << ',' << r.trial << ',' << r.em_iterations << ',' << r.squarem_iterations << ','
        << r.squarem_em_steps << ',' << format_double(r.em_nll) << ',' << format_double(r.squarem_nll) << ','
        << r.em_monotone << ',' << r.squarem_monotone << '\n';
  return out.str();
}

}  // namespace mdlpdf
