#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mdlpdf/csv.hpp"
#include "mdlpdf/evaluation.hpp"
#include "mdlpdf/experiments.hpp"
#include "mdlpdf/pipeline.hpp"
#include "mdlpdf/serialization.hpp"
#include "mdlpdf/synthetic_data.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mdlpdf;

namespace {

// Files written by the running command; removed again if it fails.
class Outputs {
 public:
  void write(const fs::path& path, std::string_view text) {
    write_text_file(path, text);
    written_.push_back(path);
  }
  void rollback() {
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
    written_.clear();
  }

 private:
  std::vector<fs::path> written_;
};

MixtureSpec load_spec(const std::string& source) {
  if (source == "builtin:univariate5") return default_univariate5_spec();
  if (source == "builtin:univariate6") return default_univariate6_spec();
  if (source == "builtin:gmm5d6") return default_gmm5d6_spec();
  if (source.rfind("builtin:", 0) == 0) fail(ErrorCode::InvalidArgument, "unknown builtin spec '" + source + "'");
  return deserialize_mixture(read_text_file(source));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct BinFlags {
  std::string strategy = "quantile";
  std::size_t bins = 0;
  std::size_t kmax = 0;
  std::optional<double> two_cut_eps;

  void add(CLI::App* cmd) {
    cmd->add_option("--strategy", strategy, "quantile, midpoint, two_cuts or uniform")
        ->check(CLI::IsMember({"quantile", "midpoint", "two_cuts", "uniform"}));
    cmd->add_option("--bins", bins, "candidate intervals E (uniform: number of bins); 0 = default");
    cmd->add_option("--kmax", kmax, "largest bin count searched; 0 = default");
    cmd->add_option("--two-cut-eps", two_cut_eps, "offset for two_cuts candidates");
  }
  BinningOptions options() const {
    BinningOptions o;
    o.strategy = parse_cut_strategy(strategy);
    o.E = bins;
    o.K_max = kmax;
    o.two_cut_epsilon = two_cut_eps;
    return o;
  }
};

struct FitFlags {
  std::size_t rank = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t max_iters = 1000;
  double tol = 1e-7;
  bool no_squarem = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--rank", rank, "latent states R")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "initialization seed");
    cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iters", max_iters, "iteration cap");
    cmd->add_option("--tol", tol, "relative NLL change for convergence");
    cmd->add_flag("--no-squarem", no_squarem, "plain EM");
  }
  FitConfig config() const {
    FitConfig c;
    c.rank = rank;
    c.seed = seed;
    c.threads = threads;
    c.max_iters = max_iters;
    c.rel_ll_tol = tol;
    c.squarem_enabled = !no_squarem;
    return c;
  }
};

// synth ----------------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::size_t T = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string labels;
};

void run_synth(const SynthArgs& a, Outputs& outputs) {
  const MixtureSpec spec = load_spec(a.spec);
  const LabeledSample s = sample_mixture(spec, a.T, a.seed);
  outputs.write(a.out, samples_to_csv(s.data));
  fs::path labels = a.labels;
  if (labels.empty()) {
    labels = fs::path(a.out);
    labels.replace_filename(labels.stem().string() + "_labels.csv");
  }
  std::string text = "label\n";
  for (auto l : s.labels) text += std::to_string(l) + "\n";
  outputs.write(labels, text);
}

// bin ------------------------------------------------------------------------

struct BinArgs {
  std::string data;
  std::string out;
  std::string report;
  std::size_t threads = 1;
  BinFlags flags;
};

void run_bin(const BinArgs& a, Outputs& outputs) {
  const SampleMatrix sample = csv_to_samples(read_csv(a.data));
  BinningOptions opts = a.flags.options();
  if (opts.strategy == CutStrategy::Uniform && opts.E == 0) opts.E = 20;
  const auto t0 = std::chrono::steady_clock::now();
  const auto hists = fit_histograms(sample, opts, a.threads);
  const double secs = seconds_since(t0);

  json rep;
  rep["strategy"] = a.flags.strategy;
  rep["runtime_seconds"] = secs;
  json dims = json::array();
  for (std::size_t n = 0; n < hists.size(); ++n) {
    json d;
    if (!sample.dim_names().empty()) d["name"] = sample.dim_names()[n];
    d["bins"] = hists[n].bins();
    d["sc_score"] = hists[n].sc_score;
    d["cuts"] = hists[n].cuts;
    dims.push_back(std::move(d));
  }
  rep["dimensions"] = std::move(dims);

  outputs.write(a.out, serialize_histograms(hists));
  const std::string text = rep.dump(1) + "\n";
  if (!a.report.empty()) outputs.write(a.report, text);
  std::cout << text;
}

// fit ------------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string histograms;
  std::string out;
  std::string report;
  FitFlags flags;
};

void run_fit(const FitArgs& a, Outputs& outputs) {
  const SampleMatrix sample = csv_to_samples(read_csv(a.data), {}, false);
  const auto hists = deserialize_histograms(read_text_file(a.histograms));
  if (hists.size() != sample.cols())
    fail(ErrorCode::DimensionMismatch, "histogram file has " + std::to_string(hists.size()) +
                                           " dimensions, data has " + std::to_string(sample.cols()));
  const DiscretizedDataset data = discretize(sample, hists);
  const FitResult fit = fit_pmf(data, a.flags.config());
  const DensityModel model = build_density_model(fit.model, hists);
  outputs.write(a.out, serialize_model(model));
  const std::string report = serialize_fit_report(fit.report);
  if (!a.report.empty()) outputs.write(a.report, report);
  std::cout << "final_nll " << format_double(fit.report.final_nll) << " iterations " << fit.report.iterations
            << (fit.report.converged ? " converged" : " not converged") << "\n";
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string truth_spec;
  std::string truth_model;
  std::string holdout;
  bool kld = false;
  bool nll = false;
  std::size_t mc_samples = 100000;
  std::uint64_t seed = 0;
  bool renormalize = false;
  std::string out;
};

void run_eval(const EvalArgs& a, Outputs& outputs) {
  const DensityModel model = deserialize_model(read_text_file(a.model));
  const PdfOptions opts{a.renormalize};
  const LogDensityFn est = [&](std::span<const double> x) { return eval_joint_log_pdf(model, x, opts); };

  json metrics;
  double max_clipped = 0.0;
  for (const auto& per_dim : model.clipped_mass)
    for (double c : per_dim) max_clipped = std::max(max_clipped, c);
  metrics["max_clipped_mass"] = max_clipped;

  bool any = false;
  if (a.kld) {
    std::optional<MixtureSpec> spec;
    std::optional<DensityModel> truth;
    LogDensityFn true_log;
    SamplerFn sampler;
    std::optional<DensitySampler> model_sampler;
    if (!a.truth_spec.empty()) {
      spec = load_spec(a.truth_spec);
      if (spec->dims() != model.dims()) fail(ErrorCode::DimensionMismatch, "truth spec and model dimensions differ");
      true_log = [&](std::span<const double> x) { return true_log_density(*spec, x); };
      sampler = [&](Rng& rng, std::span<double> x) { draw_mixture_point(*spec, rng, x); };
    } else if (!a.truth_model.empty()) {
      truth = deserialize_model(read_text_file(a.truth_model));
      if (truth->dims() != model.dims()) fail(ErrorCode::DimensionMismatch, "truth model and model dimensions differ");
      model_sampler.emplace(*truth);
      true_log = [&](std::span<const double> x) { return eval_joint_log_pdf(*truth, x, opts); };
      sampler = [&](Rng& rng, std::span<double> x) { model_sampler->sample(rng, x); };
    } else {
      fail(ErrorCode::InvalidArgument, "--kld needs --truth-spec or --truth-model");
    }
    metrics["kld"] = kld_monte_carlo(true_log, est, sampler, model.dims(), a.mc_samples, a.seed);
    metrics["mc_samples"] = a.mc_samples;
    metrics["seed"] = a.seed;
    any = true;
  }
  if (a.nll) {
    if (a.holdout.empty()) fail(ErrorCode::InvalidArgument, "--nll needs --holdout");
    const SampleMatrix holdout = csv_to_samples(read_csv(a.holdout), {}, false);
    if (holdout.cols() != model.dims()) fail(ErrorCode::DimensionMismatch, "holdout and model dimensions differ");
    const double nll = holdout_nll(est, holdout);
    metrics["holdout_nll"] = nll;
    metrics["holdout_nll_per_record"] = nll / static_cast<double>(holdout.rows());
    any = true;
  }
  if (!any) fail(ErrorCode::InvalidArgument, "nothing to evaluate: pass --kld and/or --nll");

  const std::string text = metrics.dump(1) + "\n";
  if (!a.out.empty()) outputs.write(a.out, text);
  std::cout << text;
}

// classify -------------------------------------------------------------------

struct ClassifyArgs {
  std::string train;
  std::string test;
  std::string label_column = "-1";
  std::string out;
  std::string metrics;
  std::string readout = "bins";
  BinFlags bin;
  FitFlags fit;
};

struct LabeledTable {
  SampleMatrix features;
  std::vector<std::string> labels;  // empty when the file has no label column
};

std::size_t csv_width(const CsvTable& t) { return t.header.empty() ? t.rows.front().size() : t.header.size(); }

// `width` is the training file's column count; a test file one column
// narrower carries no labels.
LabeledTable load_labeled(const std::string& path, const std::string& column, std::optional<std::size_t> width) {
  const std::string text = read_text_file(path);
  const CsvTable probe = parse_csv(text);
  if (width && csv_width(probe) + 1 == *width) return {csv_to_samples(probe, {}, false), {}};
  if (width && csv_width(probe) != *width)
    fail(ErrorCode::DimensionMismatch, "'" + path + "' has " + std::to_string(csv_width(probe)) +
                                           " columns, training data has " + std::to_string(*width));
  const std::size_t col = resolve_column(probe, column);
  const CsvTable table = parse_csv(text, col);
  return {csv_to_samples(table, {col}, false), column_strings(table, col)};
}

void run_classify(const ClassifyArgs& a, Outputs& outputs) {
  const LabeledTable train = load_labeled(a.train, a.label_column, std::nullopt);
  const LabeledTable test = load_labeled(a.test, a.label_column, train.features.cols() + 1);
  PipelineConfig cfg;
  cfg.binning = a.bin.options();
  if (cfg.binning.strategy == CutStrategy::Uniform && cfg.binning.E == 0) cfg.binning.E = 20;
  cfg.fit = a.fit.config();
  const auto readout = a.readout == "spline" ? ClassifierReadout::Spline : ClassifierReadout::Bins;
  const auto result = classify(train.features, train.labels, test.features, test.labels, cfg, readout);

  std::string text = "predicted\n";
  for (const auto& p : result.predicted) text += p + "\n";
  outputs.write(a.out, text);
  json m;
  m["test_rows"] = result.predicted.size();
  if (result.accuracy) m["accuracy"] = *result.accuracy;
  const std::string mtext = m.dump(1) + "\n";
  if (!a.metrics.empty()) outputs.write(a.metrics, mtext);
  std::cout << mtext;
}

// experiment -----------------------------------------------------------------

template <class T>
void maybe(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

std::vector<CutStrategy> strategies_from(const json& j) {
  std::vector<CutStrategy> out;
  for (const auto& s : j) out.push_back(parse_cut_strategy(s.get<std::string>()));
  return out;
}

FitConfig fit_from(const json& j, FitConfig c) {
  maybe(j, "rank", c.rank);
  maybe(j, "max_iters", c.max_iters);
  maybe(j, "rel_ll_tol", c.rel_ll_tol);
  maybe(j, "squarem", c.squarem_enabled);
  maybe(j, "threads", c.threads);
  return c;
}

struct ExperimentArgs {
  std::string config;
  std::string out_dir = ".";
};

void run_experiment(const ExperimentArgs& a, Outputs& outputs) {
  json cfg;
  try {
    cfg = json::parse(read_text_file(a.config));
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, std::string("cannot parse experiment config: ") + e.what());
  }
  const std::string study = cfg.value("study", "");
  const std::string spec_source = cfg.value("spec", "");
  if (spec_source.empty()) fail(ErrorCode::InvalidArgument, "experiment config needs a 'spec'");
  const MixtureSpec spec = load_spec(spec_source);
  fs::create_directories(a.out_dir);
  const fs::path out = fs::path(a.out_dir) / (study + ".csv");
  std::string csv;
  try {
    if (study == "strategy_comparison") {
      StrategyComparisonConfig c;
      c.spec = spec;
      maybe(cfg, "T", c.T);
      maybe(cfg, "trials", c.trials);
      maybe(cfg, "seed", c.seed);
      maybe(cfg, "quantile_E", c.quantile_E);
      maybe(cfg, "K_max", c.K_max);
      if (cfg.contains("strategies")) c.strategies = strategies_from(cfg["strategies"]);
      csv = strategy_rows_csv(run_strategy_comparison(c));
    } else if (study == "histogram_kld") {
      HistogramKldConfig c;
      c.spec = spec;
      maybe(cfg, "T", c.T);
      maybe(cfg, "trials", c.trials);
      maybe(cfg, "seed", c.seed);
      maybe(cfg, "M", c.M);
      maybe(cfg, "quantile_E", c.quantile_E);
      maybe(cfg, "uniform_bins", c.uniform_bins);
      csv = histogram_kld_rows_csv(run_histogram_kld(c));
    } else if (study == "pipeline") {
      PipelineStudyConfig c;
      c.spec = spec;
      c.fit.rank = spec.rank();
      maybe(cfg, "sample_sizes", c.sample_sizes);
      maybe(cfg, "trials", c.trials);
      maybe(cfg, "seed", c.seed);
      maybe(cfg, "M", c.M);
      maybe(cfg, "uniform_bins", c.uniform_bins);
      maybe(cfg, "quantile_E", c.mdl_binning.E);
      maybe(cfg, "K_max", c.mdl_binning.K_max);
      if (cfg.contains("fit")) c.fit = fit_from(cfg["fit"], c.fit);
      csv = pipeline_rows_csv(run_pipeline_study(c));
    } else if (study == "acceleration") {
      AccelerationConfig c;
      c.spec = spec;
      c.fit.rank = spec.rank();
      maybe(cfg, "sample_sizes", c.sample_sizes);
      maybe(cfg, "trials", c.trials);
      maybe(cfg, "seed", c.seed);
      if (cfg.contains("fit")) c.fit = fit_from(cfg["fit"], c.fit);
      csv = acceleration_rows_csv(run_acceleration_study(c));
    } else {
      fail(ErrorCode::InvalidArgument,
           "unknown study '" + study + "' (strategy_comparison, histogram_kld, pipeline, acceleration)");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, std::string("bad experiment field: ") + e.what());
  }
  outputs.write(out, csv);
  std::cout << "wrote " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MDL histogram + low-rank PMF + spline density estimation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "sample a Gaussian mixture spec");
  c_synth->add_option("--spec", synth.spec, "mixture spec file or builtin:{univariate5,univariate6,gmm5d6}")
      ->required();
  c_synth->add_option("-T,--samples", synth.T, "number of records")->required()->check(CLI::PositiveNumber);
  c_synth->add_option("--seed", synth.seed, "sampling seed");
  c_synth->add_option("--out", synth.out, "sample CSV")->required();
  c_synth->add_option("--labels", synth.labels, "label CSV (default: <out>_labels.csv)");

  BinArgs bin;
  auto* c_bin = app.add_subcommand("bin", "fit per-dimension histograms");
  c_bin->add_option("--data", bin.data, "data CSV")->required();
  c_bin->add_option("--out", bin.out, "histograms file")->required();
  c_bin->add_option("--report", bin.report, "report JSON");
  c_bin->add_option("--threads", bin.threads, "worker threads")->check(CLI::PositiveNumber);
  bin.flags.add(c_bin);

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "fit the low-rank PMF and spline density");
  c_fit->add_option("--data", fit.data, "data CSV")->required();
  c_fit->add_option("--histograms", fit.histograms, "histograms file from 'bin'")->required();
  c_fit->add_option("--out", fit.out, "model file")->required();
  c_fit->add_option("--report", fit.report, "fit report JSON (NLL trace)");
  fit.flags.add(c_fit);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a fitted density");
  c_eval->add_option("--model", ev.model, "model file")->required();
  c_eval->add_option("--truth-spec", ev.truth_spec, "mixture spec used as ground truth");
  c_eval->add_option("--truth-model", ev.truth_model, "model file used as ground truth");
  c_eval->add_option("--holdout", ev.holdout, "held-out CSV for NLL");
  c_eval->add_flag("--kld", ev.kld, "Monte-Carlo KLD against the truth");
  c_eval->add_flag("--nll", ev.nll, "held-out NLL");
  c_eval->add_option("--mc-samples", ev.mc_samples, "Monte-Carlo draws")->check(CLI::PositiveNumber);
  c_eval->add_option("--seed", ev.seed, "Monte-Carlo seed");
  c_eval->add_flag("--renormalize-pdf", ev.renormalize, "renormalize clipped conditional PDFs");
  c_eval->add_option("--out", ev.out, "metrics JSON");

  ClassifyArgs cl;
  auto* c_cl = app.add_subcommand("classify", "train on labeled CSV, predict test rows");
  c_cl->add_option("--train", cl.train, "training CSV with a label column")->required();
  c_cl->add_option("--test", cl.test, "test CSV (label column optional)")->required();
  c_cl->add_option("--label-column", cl.label_column, "label column name or index (default: last)");
  c_cl->add_option("--out", cl.out, "predictions CSV")->required();
  c_cl->add_option("--metrics", cl.metrics, "metrics JSON");
  c_cl->add_option("--readout", cl.readout, "feature density used for prediction: bins or spline")
      ->check(CLI::IsMember({"bins", "spline"}));
  cl.bin.add(c_cl);
  cl.fit.add(c_cl);

  ExperimentArgs ex;
  auto* c_ex = app.add_subcommand("experiment", "replay a synthetic study from a JSON config");
  c_ex->add_option("--config", ex.config, "experiment config")->required();
  c_ex->add_option("--out-dir", ex.out_dir, "directory for the tidy CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  Outputs outputs;
  try {
    if (*c_synth) run_synth(synth, outputs);
    else if (*c_bin) run_bin(bin, outputs);
    else if (*c_fit) run_fit(fit, outputs);
    else if (*c_eval) run_eval(ev, outputs);
    else if (*c_cl) run_classify(cl, outputs);
    else if (*c_ex) run_experiment(ex, outputs);
  } catch (const Error& e) {
    outputs.rollback();
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    outputs.rollback();
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
