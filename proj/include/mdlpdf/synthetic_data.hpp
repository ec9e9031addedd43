#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdlpdf/core_types.hpp"
#include "mdlpdf/rng.hpp"

namespace mdlpdf {

struct LabeledSample {
  SampleMatrix data;
  std::vector<std::uint32_t> labels;  // 1-based component index
};

/// Draws the component from the weights, then every coordinate independently.
/// Chunks of 4096 records use their own stream derived from `seed`.
LabeledSample sample_mixture(const MixtureSpec& spec, std::size_t T, std::uint64_t seed);

/// One draw from the mixture (used by Monte-Carlo evaluation).
void draw_mixture_point(const MixtureSpec& spec, Rng& rng, std::span<double> out,
                        std::uint32_t* label = nullptr);

double true_density(const MixtureSpec& spec, std::span<const double> x);
/// log of true_density computed with log-sum-exp, finite far into the tails.
double true_log_density(const MixtureSpec& spec, std::span<const double> x);

/// Built-in stand-ins for the unpublished experiment mixtures.
MixtureSpec default_univariate5_spec();  // histogram-vs-uniform study
MixtureSpec default_univariate6_spec();  // cut-strategy comparison
MixtureSpec default_gmm5d6_spec();       // N = 5, R = 6 pipeline study

}  // namespace mdlpdf
