#include "mdlpdf/serialization.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mdlpdf/spline_reconstruction.hpp"

namespace mdlpdf {

using nlohmann::json;

namespace {

constexpr std::string_view kModelFormat = "mdlpdf.density_model";
constexpr std::string_view kHistogramFormat = "mdlpdf.histograms";
constexpr std::string_view kMixtureFormat = "mdlpdf.mixture_spec";

json envelope(std::string_view format) {
  json j;
  j["format"] = format;
  j["version"] = kFormatVersion;
  return j;
}

json parse_envelope(std::string_view text, std::string_view format) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, std::string("cannot parse ") + std::string(format) + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("format") || !j["format"].is_string() || !j.contains("version") ||
      !j["version"].is_number_integer())
    fail(ErrorCode::MalformedFile, "missing format/version header");
  if (j["format"].get<std::string>() != format)
    fail(ErrorCode::MalformedFile, "expected format '" + std::string(format) + "', found '" +
                                       j["format"].get<std::string>() + "'");
  if (j["version"].get<int>() != kFormatVersion)
    fail(ErrorCode::VersionMismatch, "unsupported format version " + std::to_string(j["version"].get<int>()));
  return j;
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, std::string("bad field: ") + e.what());
  }
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) fail(ErrorCode::MalformedFile, "empty matrix");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) fail(ErrorCode::MalformedFile, "ragged matrix");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

json histogram_to_json(const Histogram& h) {
  return json{{"lo", h.lo},         {"hi", h.hi},
              {"cuts", h.cuts},     {"counts", h.counts},
              {"probabilities", h.probabilities}, {"sc_score", h.sc_score}};
}

Histogram histogram_from_json(const json& j) {
  Histogram h;
  h.lo = j.at("lo").get<double>();
  h.hi = j.at("hi").get<double>();
  h.cuts = j.at("cuts").get<std::vector<double>>();
  h.counts = j.at("counts").get<std::vector<std::int64_t>>();
  h.probabilities = j.at("probabilities").get<std::vector<double>>();
  h.sc_score = j.at("sc_score").get<double>();
  return h;
}

}  // namespace

std::string serialize_model(const DensityModel& model) {
  json j = envelope(kModelFormat);
  j["lambda"] = model.pmf.lambda;
  json dims = json::array();
  for (std::size_t n = 0; n < model.dims(); ++n) {
    json d;
    d["edges"] = model.edges[n];
    d["factor"] = matrix_to_json(model.pmf.factors[n]);
    json splines = json::array();
    for (const auto& s : model.splines[n]) {
      json segs = json::array();
      for (const auto& g : s.segments) segs.push_back({g.a, g.b, g.c, g.d});
      splines.push_back(std::move(segs));
    }
    d["splines"] = std::move(splines);
    dims.push_back(std::move(d));
  }
  j["dimensions"] = std::move(dims);
  return j.dump(1) + "\n";
}

DensityModel deserialize_model(std::string_view text) {
  const json j = parse_envelope(text, kModelFormat);
  DensityModel model = guarded([&] {
    DensityModel m;
    m.pmf.lambda = j.at("lambda").get<std::vector<double>>();
    for (const auto& d : j.at("dimensions")) {
      m.edges.push_back(d.at("edges").get<std::vector<double>>());
      m.pmf.factors.push_back(matrix_from_json(d.at("factor")));
      std::vector<CubicSpline> per_component;
      for (const auto& segs : d.at("splines")) {
        CubicSpline s;
        s.knots = m.edges.back();
        for (const auto& g : segs) {
          const auto c = g.get<std::vector<double>>();
          if (c.size() != 4) fail(ErrorCode::MalformedFile, "spline segment needs 4 coefficients");
          s.segments.push_back({c[0], c[1], c[2], c[3]});
        }
        per_component.push_back(std::move(s));
      }
      m.splines.push_back(std::move(per_component));
    }
    return m;
  });
  try {
    finalize_density_model(model);
  } catch (const Error& e) {
    fail(ErrorCode::MalformedFile, std::string("inconsistent model: ") + e.what());
  }
  return model;
}

std::string serialize_histograms(const std::vector<Histogram>& histograms) {
  json j = envelope(kHistogramFormat);
  json hs = json::array();
  for (const auto& h : histograms) hs.push_back(histogram_to_json(h));
  j["histograms"] = std::move(hs);
  return j.dump(1) + "\n";
}

std::vector<Histogram> deserialize_histograms(std::string_view text) {
  const json j = parse_envelope(text, kHistogramFormat);
  auto hs = guarded([&] {
    std::vector<Histogram> out;
    for (const auto& h : j.at("histograms")) out.push_back(histogram_from_json(h));
    return out;
  });
  for (const auto& h : hs) {
    try {
      validate_histogram(h);
    } catch (const Error& e) {
      fail(ErrorCode::MalformedFile, std::string("invalid histogram: ") + e.what());
    }
  }
  return hs;
}

std::string serialize_mixture(const MixtureSpec& spec) {
  json j = envelope(kMixtureFormat);
  j["weights"] = spec.weights;
  json comps = json::array();
  for (const auto& c : spec.components) {
    json dims = json::array();
    for (const auto& g : c) dims.push_back({{"mean", g.mean}, {"sd", g.sd}});
    comps.push_back(std::move(dims));
  }
  j["components"] = std::move(comps);
  return j.dump(1) + "\n";
}

MixtureSpec deserialize_mixture(std::string_view text) {
  const json j = parse_envelope(text, kMixtureFormat);
  MixtureSpec spec = guarded([&] {
    MixtureSpec s;
    s.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& c : j.at("components")) {
      std::vector<GaussianFactor> dims;
      for (const auto& g : c) dims.push_back({g.at("mean").get<double>(), g.at("sd").get<double>()});
      s.components.push_back(std::move(dims));
    }
    return s;
  });
  validate_mixture(spec);
  return spec;
}

std::string serialize_fit_report(const FitReport& report) {
  json j;
  j["final_nll"] = report.final_nll;
  j["iterations"] = report.iterations;
  j["em_steps_taken"] = report.em_steps_taken;
  j["fallback_count"] = report.fallback_count;
  j["converged"] = report.converged;
  j["nll_trace"] = report.nll_trace;
  return j.dump(1) + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail(ErrorCode::Io, "write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mdlpdf
