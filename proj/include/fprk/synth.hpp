#pragma once

// Synthetic identity-structured embeddings with a drift dial, plus the
// brute-force oracles used to check the metrics.
//
// Model: identity centroids are uniform on the unit sphere in `dim`
// dimensions; a real sample is normalize(centroid + noise * g) with g standard
// Gaussian; a generated sample is a fresh real-style sample pulled toward the
// nearest other identity's centroid by `drift`. Random streams are keyed by
// (identity, role, index) through CounterRng, so generation order and
// threading do not affect the output.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fprk/embstore.hpp"

namespace fprk {

struct SynthConfig {
  std::size_t identities = 10;
  std::size_t reference_per_id = 5;
  std::size_t gallery_per_id = 10;
  std::size_t generated_per_id = 5;
  std::uint32_t dim = 512;
  double noise = 0.05;  // within-identity noise scale
  double drift = 0.0;   // 0 = on-identity, 1 = exactly the distractor centroid
  std::uint64_t seed = 0;
  std::string method = "synth";
  std::string encoder = "synthetic";
  std::string variant = "default";

  /// Throws ValidationError on out-of-range fields.
  void validate() const;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

std::string synth_config_to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(std::string_view text);

struct DriftSpec {
  std::vector<std::size_t> distractor;  // identity index -> distractor identity index
  double delta = 0.0;
};

/// Subject label for identity i, zero-padded to the width of the count.
std::string synth_subject(std::size_t identity, std::size_t identities);

/// Unit centroids, identities x dim, row-major.
std::vector<double> synth_centroids(const SynthConfig& config);

/// Each identity's nearest other centroid by cosine (ties to the lower index).
DriftSpec nearest_distractors(std::span<const double> centroids, std::size_t dim, double delta);

/// normalize((1 - delta) * sample + delta * distractor). Throws
/// ValidationError for delta outside [0, 1] or a zero blend.
std::vector<double> apply_drift(std::span<const double> sample, std::span<const double> distractor,
                                double delta);

EmbeddingSet generate_synthetic_dataset(const SynthConfig& config);

/// Independent AP oracle: ranks by counting, never sorts.
/// rank(g) = 1 + #{sim > sim_g} + #{sim == sim_g and id < id_g}.
double brute_force_ap(std::span<const double> similarities, std::span<const std::string> ids,
                      std::span<const std::uint8_t> relevant);

struct GalleryComposition {
  std::size_t gallery_size = 0;
  std::size_t relevant = 0;
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
};

/// Mean AP over uniformly random rankings, averaged over the given query
/// compositions. Chance level for an uninformative encoder.
MonteCarloEstimate monte_carlo_random_map(std::span<const GalleryComposition> compositions,
                                          std::size_t trials, std::uint64_t seed);

}  // namespace fprk
