#include "fprk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fprk/error.hpp"
#include "fprk/hash.hpp"
#include "fprk/rng.hpp"
#include "json.hpp"

namespace fprk {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTagCentroid = fnv1a64("centroid");
constexpr std::uint64_t kTagMonteCarlo = fnv1a64("monte-carlo");

std::vector<double> gaussian_vector(CounterRng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.next_gaussian();
  return v;
}

double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

void normalize_in_place(std::vector<double>& v) {
  const double n = norm(v);
  if (n == 0.0) throw ValidationError("synth: cannot normalize a zero vector");
  for (auto& x : v) x /= n;
}

std::vector<float> to_float(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

char role_code(Role role) {
  switch (role) {
    case Role::reference: return 'r';
    case Role::gallery: return 'g';
    case Role::generated: return 'q';
    case Role::prompt: return 'p';
  }
  return 'x';
}

// normalize(centroid + noise * g) from the (identity, role, index) stream.
std::vector<double> real_style_sample(const SynthConfig& cfg, std::span<const double> centroid,
                                      std::size_t identity, Role role, std::size_t index) {
  CounterRng rng(derive_key(cfg.seed, {identity, static_cast<std::uint64_t>(role), index}));
  std::vector<double> v(centroid.begin(), centroid.end());
  if (cfg.noise > 0.0) {
    const auto g = gaussian_vector(rng, cfg.dim);
    for (std::size_t d = 0; d < cfg.dim; ++d) v[d] += cfg.noise * g[d];
  }
  normalize_in_place(v);
  return v;
}

}  // namespace

void SynthConfig::validate() const {
  if (identities < 2) throw ValidationError("synth: need at least 2 identities");
  if (reference_per_id < 1 || gallery_per_id < 1 || generated_per_id < 1)
    throw ValidationError("synth: per-identity counts must be at least 1");
  if (dim < 2) throw ValidationError("synth: dimension must be at least 2");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ValidationError("synth: noise must be >= 0");
  if (!(drift >= 0.0 && drift <= 1.0)) throw ValidationError("synth: drift must be in [0, 1]");
  if (method.empty()) throw ValidationError("synth: method must be non-empty");
}

std::string synth_config_to_json(const SynthConfig& c) {
  const json doc = {{"identities", c.identities},
                    {"reference_per_id", c.reference_per_id},
                    {"gallery_per_id", c.gallery_per_id},
                    {"generated_per_id", c.generated_per_id},
                    {"dim", c.dim},
                    {"noise", c.noise},
                    {"drift", c.drift},
                    {"seed", c.seed},
                    {"method", c.method},
                    {"encoder", c.encoder},
                    {"variant", c.variant}};
  return doc.dump(2) + "\n";
}

SynthConfig synth_config_from_json(std::string_view text) {
  SynthConfig c;
  try {
    const json doc = json::parse(text);
    c.identities = doc.value("identities", c.identities);
    c.reference_per_id = doc.value("reference_per_id", c.reference_per_id);
    c.gallery_per_id = doc.value("gallery_per_id", c.gallery_per_id);
    c.generated_per_id = doc.value("generated_per_id", c.generated_per_id);
    c.dim = doc.value("dim", c.dim);
    c.noise = doc.value("noise", c.noise);
    c.drift = doc.value("drift", c.drift);
    c.seed = doc.value("seed", c.seed);
    c.method = doc.value("method", c.method);
    c.encoder = doc.value("encoder", c.encoder);
    c.variant = doc.value("variant", c.variant);
  } catch (const json::exception& e) {
    throw ParseError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string synth_subject(std::size_t identity, std::size_t identities) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(identities - 1).size());
  std::string digits = std::to_string(identity);
  return "id" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

std::vector<double> synth_centroids(const SynthConfig& cfg) {
  std::vector<double> out;
  out.reserve(cfg.identities * cfg.dim);
  for (std::size_t i = 0; i < cfg.identities; ++i) {
    CounterRng rng(derive_key(cfg.seed, {kTagCentroid, i}));
    auto v = gaussian_vector(rng, cfg.dim);
    normalize_in_place(v);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

DriftSpec nearest_distractors(std::span<const double> centroids, std::size_t dim, double delta) {
  const std::size_t n = centroids.size() / dim;
  if (n < 2) throw ValidationError("drift: need at least two identities");
  DriftSpec spec;
  spec.delta = delta;
  spec.distractor.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ci = centroids.subspan(i * dim, dim);
    std::size_t best = n;
    double best_cos = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto cj = centroids.subspan(j * dim, dim);
      const double c = std::inner_product(ci.begin(), ci.end(), cj.begin(), 0.0) / (norm(ci) * norm(cj));
      if (best == n || c > best_cos) {
        best = j;
        best_cos = c;
      }
    }
    spec.distractor[i] = best;
  }
  return spec;
}

std::vector<double> apply_drift(std::span<const double> sample, std::span<const double> distractor,
                                double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw ValidationError("drift: delta must be in [0, 1]");
  if (sample.size() != distractor.size()) throw ValidationError("drift: dimension mismatch");
  const double ns = norm(sample);
  const double nd = norm(distractor);
  if (ns == 0.0 || nd == 0.0) throw ValidationError("drift: zero-norm input");
  std::vector<double> out(sample.size());
  if (delta == 1.0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = distractor[i] / nd;
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (1.0 - delta) * sample[i] + delta * distractor[i];
  const double n = norm(out);
  // An antiparallel pair at delta = 0.5 cancels; near-cancellation is just as degenerate.
  if (n <= 1e-12 * std::max(ns, nd)) throw ValidationError("drift: blend of antiparallel vectors is zero");
  for (auto& x : out) x /= n;
  return out;
}

EmbeddingSet generate_synthetic_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const auto centroids = synth_centroids(cfg);
  const auto drift = nearest_distractors(centroids, cfg.dim, cfg.drift);
  const std::size_t per_id = cfg.reference_per_id + cfg.gallery_per_id + cfg.generated_per_id;

  std::vector<EmbeddingRecord> records(cfg.identities * per_id);
  const auto n_id = static_cast<std::int64_t>(cfg.identities);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < n_id; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto centroid = std::span(centroids).subspan(i * cfg.dim, cfg.dim);
    const auto distractor = std::span(centroids).subspan(drift.distractor[i] * cfg.dim, cfg.dim);
    const std::string subject = synth_subject(i, cfg.identities);
    std::size_t slot = i * per_id;
    auto emit = [&](Role role, std::size_t index, std::vector<double> v) {
      char suffix[32];
      std::snprintf(suffix, sizeof(suffix), "-%c%03zu", role_code(role), index);
      auto& r = records[slot++];
      r.id = subject + suffix;
      r.subject = subject;
      r.role = role;
      r.encoder = cfg.encoder;
      r.variant = cfg.variant;
      r.method = role == Role::generated ? cfg.method : std::string();
      r.vector = to_float(v);
    };
    for (std::size_t k = 0; k < cfg.reference_per_id; ++k)
      emit(Role::reference, k, real_style_sample(cfg, centroid, i, Role::reference, k));
    for (std::size_t k = 0; k < cfg.gallery_per_id; ++k)
      emit(Role::gallery, k, real_style_sample(cfg, centroid, i, Role::gallery, k));
    for (std::size_t k = 0; k < cfg.generated_per_id; ++k) {
      auto s = real_style_sample(cfg, centroid, i, Role::generated, k);
      emit(Role::generated, k, apply_drift(s, distractor, cfg.drift));
    }
  }
  return EmbeddingSet::create(std::move(records), "synth");
}

double brute_force_ap(std::span<const double> sims, std::span<const std::string> ids,
                      std::span<const std::uint8_t> relevant) {
  const std::size_t n = sims.size();
  if (ids.size() != n || relevant.size() != n) throw ValidationError("brute_force_ap: length mismatch");
  auto rank_of = [&](std::size_t g) {
    std::size_t rank = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == g) continue;
      if (sims[j] > sims[g] || (sims[j] == sims[g] && ids[j] < ids[g])) ++rank;
    }
    return rank;
  };
  std::vector<std::size_t> rel_ranks;
  for (std::size_t g = 0; g < n; ++g)
    if (relevant[g]) rel_ranks.push_back(rank_of(g));
  if (rel_ranks.empty()) throw ValidationError("brute_force_ap: no relevant items");
  double sum = 0.0;
  for (std::size_t rg : rel_ranks) {
    std::size_t at_or_above = 0;
    for (std::size_t rh : rel_ranks) at_or_above += rh <= rg ? 1 : 0;
    sum += static_cast<double>(at_or_above) / static_cast<double>(rg);
  }
  return sum / static_cast<double>(rel_ranks.size());
}

MonteCarloEstimate monte_carlo_random_map(std::span<const GalleryComposition> compositions,
                                          std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw ValidationError("monte carlo: trials must be at least 1");
  if (compositions.empty()) throw ValidationError("monte carlo: no query compositions");
  for (const auto& c : compositions)
    if (c.relevant == 0 || c.relevant > c.gallery_size)
      throw ValidationError("monte carlo: need 1 <= relevant <= gallery size");

  CounterRng rng(derive_key(seed, {kTagMonteCarlo}));
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    double trial_sum = 0.0;
    for (const auto& c : compositions) {
      // Items [0, relevant) are the relevant ones; perm[k] is the item at rank k+1.
      const auto perm = random_permutation(c.gallery_size, rng);
      std::size_t hits = 0;
      double ap = 0.0;
      for (std::size_t k = 0; k < perm.size(); ++k) {
        if (perm[k] >= c.relevant) continue;
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(k + 1);
      }
      trial_sum += ap / static_cast<double>(c.relevant);
    }
    const double v = trial_sum / static_cast<double>(compositions.size());
    sum += v;
    sum_sq += v * v;
  }
  MonteCarloEstimate est;
  est.trials = trials;
  est.mean = sum / static_cast<double>(trials);
  if (trials > 1) {
    const double var = std::max(0.0, (sum_sq - sum * est.mean) / static_cast<double>(trials - 1));
    est.std_error = std::sqrt(var / static_cast<double>(trials));
  }
  return est;
}

}  // namespace fprk
