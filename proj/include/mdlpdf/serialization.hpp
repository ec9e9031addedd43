#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mdlpdf/core_types.hpp"
#include "mdlpdf/pmf_factorization.hpp"

namespace mdlpdf {

/// Schema version written into (and required from) every model-family file.
inline constexpr int kFormatVersion = 1;

/// JSON text. Doubles are written in shortest round-trip form, so
/// deserialize(serialize(m)) reproduces every finite value bit-exactly.
std::string serialize_model(const DensityModel& model);
/// Throws MalformedFile or VersionMismatch.
DensityModel deserialize_model(std::string_view text);

std::string serialize_histograms(const std::vector<Histogram>& histograms);
std::vector<Histogram> deserialize_histograms(std::string_view text);

std::string serialize_mixture(const MixtureSpec& spec);
MixtureSpec deserialize_mixture(std::string_view text);

std::string serialize_fit_report(const FitReport& report);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames, so readers never see a partial file.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace mdlpdf
