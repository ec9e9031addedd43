// Acceptance run over the synthetic studies and oracle suites.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "binning_oracles.hpp"
#include "mdlpdf/csv.hpp"
#include "mdlpdf/evaluation.hpp"
#include "mdlpdf/experiments.hpp"
#include "mdlpdf/pipeline.hpp"
#include "mdlpdf/synthetic_data.hpp"
#include "test_util.hpp"

using namespace mdlpdf;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

// Clipped masses of the pipeline-study fits, shared with the spline criterion.
std::optional<std::vector<PipelineRow>> g_pipeline_rows;

Outcome criterion1() {
  StrategyComparisonConfig cfg;
  cfg.spec = default_univariate6_spec();
  cfg.T = 20000;
  cfg.trials = 10;
  cfg.strategies = {CutStrategy::Quantile, CutStrategy::TwoCuts};
  const auto rows = run_strategy_comparison(cfg);
  std::map<CutStrategy, std::vector<double>> sc, nll, secs, bins;
  for (const auto& r : rows) {
    sc[r.strategy].push_back(r.sc_score);
    nll[r.strategy].push_back(r.holdout_nll);
    secs[r.strategy].push_back(r.seconds);
    bins[r.strategy].push_back(static_cast<double>(r.bins));
  }
  const auto q = CutStrategy::Quantile;
  const auto t = CutStrategy::TwoCuts;
  const double sc_rel = std::abs(mean(sc[q]) - mean(sc[t])) / std::abs(mean(sc[t]));
  const double nll_rel = std::abs(mean(nll[q]) - mean(nll[t])) / std::abs(mean(nll[t]));
  const double ratio = mean(secs[t]) / mean(secs[q]);
  return pass_if(sc_rel <= 0.002 && nll_rel <= 0.002 && ratio >= 5.0,
                 fmt("SC quantile %.2f vs two_cuts %.2f (rel %.2e); NLL %.2f vs %.2f (rel %.2e); "
                     "time %.4fs vs %.2fs (ratio %.0fx); bins %.1f vs %.1f",
                     mean(sc[q]), mean(sc[t]), sc_rel, mean(nll[q]), mean(nll[t]), nll_rel, mean(secs[q]),
                     mean(secs[t]), ratio, mean(bins[q]), mean(bins[t])));
}

Outcome criterion2() {
  HistogramKldConfig cfg;
  cfg.spec = default_univariate5_spec();
  cfg.T = 10000;
  cfg.trials = 50;
  cfg.M = 100000;
  cfg.uniform_bins = {20, 100};
  const auto rows = run_histogram_kld(cfg);
  std::map<std::size_t, std::map<std::string, HistogramKldRow>> by_trial;
  for (const auto& r : rows) by_trial[r.trial][r.method] = r;
  std::size_t wins = 0;
  std::vector<double> mdl_bins, mdl_kld, u20_kld, u100_kld;
  for (auto& [trial, m] : by_trial) {
    const auto& mdl = m.at("mdl_quantile");
    wins += mdl.kld < m.at("uniform_20").kld;
    mdl_bins.push_back(static_cast<double>(mdl.bins));
    mdl_kld.push_back(mdl.kld);
    u20_kld.push_back(m.at("uniform_20").kld);
    u100_kld.push_back(m.at("uniform_100").kld);
  }
  const double med_bins = median(mdl_bins);
  const double max_bins = *std::max_element(mdl_bins.begin(), mdl_bins.end());
  return pass_if(wins >= 45 && med_bins >= 12 && med_bins <= 30 && max_bins < 100,
                 fmt("MDL beats uniform-20 in %zu/50 trials; median MDL bins %.1f (max %.0f, uniform-100 uses 100); "
                     "median KLD mdl %.4f, uniform-20 %.4f, uniform-100 %.4f",
                     wins, med_bins, max_bins, median(mdl_kld), median(u20_kld), median(u100_kld)));
}

Outcome criterion3() {
  PipelineStudyConfig cfg;
  cfg.spec = default_gmm5d6_spec();
  cfg.sample_sizes = {1000, 10000, 100000};
  cfg.trials = 20;
  cfg.M = 100000;
  cfg.uniform_bins = 20;
  cfg.fit.rank = cfg.spec.rank();
  const auto rows = run_pipeline_study(cfg);
  g_pipeline_rows = rows;
  bool ok = true;
  std::string detail;
  for (std::size_t T : cfg.sample_sizes) {
    std::map<std::string, std::vector<double>> kld, acc, bins;
    for (const auto& r : rows) {
      if (r.T != T) continue;
      kld[r.method].push_back(r.kld);
      acc[r.method].push_back(r.clustering_accuracy);
      bins[r.method].push_back(r.median_bins);
    }
    const double km = median(kld["mdl_quantile"]), ku = median(kld["uniform_20"]);
    const double am = median(acc["mdl_quantile"]), au = median(acc["uniform_20"]);
    const bool here = km <= ku && am >= au;
    ok &= here;
    detail += fmt("%sT=%zu: KLD mdl %.4f vs uniform %.4f, accuracy %.4f vs %.4f, mdl bins %.1f [%s]",
                  detail.empty() ? "" : "; ", T, km, ku, am, au, median(bins["mdl_quantile"]), here ? "ok" : "fail");
  }
  return pass_if(ok, detail);
}

Outcome criterion4() {
  Rng rng(4);
  std::size_t agree = 0;
  const std::size_t instances = 200;
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const std::size_t T = 8 + rng.below(80);
    std::vector<double> v(T);
    for (double& x : v) x = rng.uniform_open() < 0.6 ? rng.normal(0, 1) : rng.normal(3, 0.4);
    std::sort(v.begin(), v.end());
    const std::size_t E = 2 + rng.below(11);
    const auto cands = quantile_candidates(v, E);
    const std::size_t K_max = std::min<std::size_t>(1 + rng.below(6), cands.points.size() + 1);
    const auto dp = optimal_histogram_from_candidates(v, cands, K_max);
    const auto ex = oracle::exhaustive_search(v, cands, K_max);
    agree += dp.sc_score == ex.score && dp.cuts == ex.cuts;
  }
  return pass_if(agree == instances, fmt("%zu/%zu instances match exhaustive enumeration exactly", agree, instances));
}

Outcome criterion5() {
  double worst = 0.0;
  for (std::size_t K = 1; K <= 4; ++K)
    for (std::size_t n = 1; n <= 12; ++n)
      worst = std::max(worst, std::abs(log_multinomial_complexity(K, n) - std::log(oracle::brute_complexity(K, n))));
  const double c32 = std::exp(log_multinomial_complexity(3, 2));
  return pass_if(worst <= 1e-9 && std::abs(c32 - 4.5) <= 1e-12,
                 fmt("max |recursion - direct| = %.2e nats over K<=4, n<=12; C(3,2) = %.15g", worst, c32));
}

Outcome criterion6() {
  std::size_t monotone = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(derive_seed(6, s));
    std::vector<std::uint32_t> cards;
    const std::size_t N = 2 + rng.below(4);
    for (std::size_t n = 0; n < N; ++n) cards.push_back(static_cast<std::uint32_t>(2 + rng.below(8)));
    const std::size_t R = 1 + rng.below(5);
    const auto gen = testutil::random_model(cards, R, derive_seed(60, s));
    const auto data = testutil::draw_records(gen, 200 + rng.below(800), derive_seed(61, s));
    FitConfig fc;
    fc.rank = 1 + rng.below(6);
    fc.seed = s;
    fc.squarem_enabled = s % 2 == 0;
    fc.max_iters = 300;
    const auto fit = fit_pmf(data, fc);
    bool ok = true;
    for (std::size_t k = 1; k < fit.report.nll_trace.size(); ++k) ok &= fit.report.nll_trace[k] <= fit.report.nll_trace[k - 1];
    monotone += ok;
  }

  const auto gen = testutil::random_model({3, 4}, 2, 21);
  const auto data = testutil::draw_records(gen, 2000, 22);
  std::vector<double> emp(12, 0.0);
  for (std::size_t t = 0; t < data.rows(); ++t)
    emp[(data.index(t, 0) - 1) * 4 + (data.index(t, 1) - 1)] += 1.0 / data.rows();
  FitConfig full;
  full.rank = 12;
  full.seed = 3;
  full.max_iters = 20000;
  full.rel_ll_tol = 1e-15;
  const auto joint = joint_pmf_tensor(fit_pmf(data, full).model);
  double tv = 0.0;
  for (std::size_t i = 0; i < 12; ++i) tv += 0.5 * std::abs(joint[i] - emp[i]);

  AccelerationConfig ac;
  ac.spec = default_gmm5d6_spec();
  ac.sample_sizes = {1000, 10000, 100000};
  ac.trials = 10;
  ac.fit.rank = ac.spec.rank();
  ac.fit.rel_ll_tol = 1e-10;
  ac.fit.max_iters = 10000;
  const auto rows = run_acceleration_study(ac);
  std::size_t same = 0, fewer = 0, both = 0, acc_monotone = 0;
  for (const auto& r : rows) {
    const bool s = std::abs(r.squarem_nll - r.em_nll) <= 1e-6 * std::abs(r.em_nll);
    const bool f = r.squarem_iterations < r.em_iterations;
    same += s;
    fewer += f;
    both += s && f;
    acc_monotone += r.em_monotone && r.squarem_monotone;
  }
  const double frac = static_cast<double>(both) / rows.size();
  return pass_if(monotone == 100 && acc_monotone == rows.size() && tv <= 1e-6 && frac >= 0.8,
                 fmt("monotone %zu/100 random fits (%zu/%zu study fits); full-rank TV %.2e; SQUAREM same NLL in "
                     "%zu/%zu, fewer iterations in %zu/%zu, both in %zu/%zu (%.0f%%)",
                     monotone, acc_monotone, rows.size(), tv, same, rows.size(), fewer, rows.size(), both,
                     rows.size(), 100 * frac));
}

Outcome criterion7() {
  double knot_err = 0.0, slope_err = 0.0, mass_err = 0.0;
  double own_clipped = 0.0;
  for (std::size_t T : {1000, 10000, 100000}) {
    const auto s = sample_mixture(default_gmm5d6_spec(), T, derive_seed(7, T));
    PipelineConfig cfg;
    cfg.fit.rank = 6;
    cfg.fit.seed = T;
    const auto res = fit_pipeline(s.data, cfg);
    const auto& dm = res.density;
    for (std::size_t n = 0; n < dm.dims(); ++n) {
      const auto& e = dm.edges[n];
      for (std::size_t r = 0; r < dm.rank(); ++r) {
        const auto& sp = dm.splines[n][r];
        const auto col = dm.pmf.factors[n].column(r);
        const auto knots = cdf_knots(col, e);
        for (const auto& k : knots) knot_err = std::max(knot_err, std::abs(eval_spline(sp, k.x) - k.y));
        const auto& first = sp.segments.front();
        const auto& last = sp.segments.back();
        const double h = e[e.size() - 1] - e[e.size() - 2];
        slope_err = std::max({slope_err, std::abs(first.b), std::abs(last.b + 2 * last.c * h + 3 * last.d * h * h)});
        for (std::size_t k = 0; k + 1 < e.size(); ++k) {
          const auto& g = sp.segments[k];
          const double w = e[k + 1] - e[k];
          const double area = w * (g.b + w * (g.c + w * g.d));
          mass_err = std::max(mass_err, std::abs(area - col[k]));
        }
        own_clipped = std::max(own_clipped, dm.clipped_mass[n][r]);
      }
    }
  }
  double max_clipped = own_clipped;
  std::size_t over = 0, models = 3;
  std::map<std::string, double> worst_by_method;
  if (g_pipeline_rows) {
    models += g_pipeline_rows->size();
    for (const auto& r : *g_pipeline_rows) {
      max_clipped = std::max(max_clipped, r.max_clipped_mass);
      over += r.max_clipped_mass >= 0.01;
      worst_by_method[r.method] = std::max(worst_by_method[r.method], r.max_clipped_mass);
    }
  }
  std::string per_method;
  for (const auto& [m, v] : worst_by_method) per_method += fmt(", %s %.3g", m.c_str(), v);
  const bool ok = knot_err <= 1e-12 && slope_err <= 1e-10 && mass_err <= 1e-10 && max_clipped < 0.01;
  return pass_if(ok, fmt("knot error %.2e; end slopes %.2e; bin mass error %.2e; max clipped mass %.3g over %zu models "
                         "(%zu study models at or above 1%%; spot fits %.3g%s)",
                         knot_err, slope_err, mass_err, max_clipped, models, over, own_clipped, per_method.c_str()));
}

std::optional<std::filesystem::path> drybean_path() {
  if (const char* env = std::getenv("MDLPDF_DRYBEAN_CSV"); env && *env) return std::filesystem::path(env);
  for (const char* name : {"data/Dry_Bean_Dataset.csv", "data/dry_bean.csv"}) {
    const auto p = std::filesystem::path(MDLPDF_SOURCE_DIR) / name;
    if (std::filesystem::exists(p)) return p;
  }
  return std::nullopt;
}

Outcome criterion8() {
  const auto path = drybean_path();
  if (!path || !std::filesystem::exists(*path))
    return {Verdict::Skip, "dry bean CSV not found (set MDLPDF_DRYBEAN_CSV or place data/Dry_Bean_Dataset.csv)"};
  const CsvTable probe = read_csv(*path);
  const std::size_t label_col = resolve_column(probe, "-1");
  const CsvTable table = read_csv(*path, label_col);
  const SampleMatrix features = csv_to_samples(table, {label_col}, false);
  const auto labels = column_strings(table, label_col);
  const std::size_t T = features.rows();
  const std::size_t n_train = static_cast<std::size_t>(std::llround(0.8 * T));
  PipelineConfig cfg;
  cfg.fit.rank = 48;
  std::vector<double> accs;
  for (std::uint64_t split = 0; split < 50; ++split) {
    std::vector<std::size_t> perm(T);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(8, split));
    for (std::size_t i = T - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<std::size_t> tr(perm.begin(), perm.begin() + n_train), te(perm.begin() + n_train, perm.end());
    std::vector<std::string> ltr, lte;
    for (auto i : tr) ltr.push_back(labels[i]);
    for (auto i : te) lte.push_back(labels[i]);
    cfg.fit.seed = split;
    const auto res = classify(select_rows(features, tr, true), ltr, select_rows(features, te), lte, cfg);
    accs.push_back(*res.accuracy);
  }
  const double m = mean(accs);
  return pass_if(m >= 0.85, fmt("mean accuracy %.4f over 50 splits (min %.4f, max %.4f), T = %zu", m,
                                *std::min_element(accs.begin(), accs.end()),
                                *std::max_element(accs.begin(), accs.end()), T));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = static_cast<int>(c + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[c]();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    std::printf("criterion %d: %s (%.1fs) %s\n", id, tag, secs, o.detail.c_str());
    std::fflush(stdout);
    failures += o.verdict == Verdict::Fail;
  }
  return failures == 0 ? 0 : 1;
}
