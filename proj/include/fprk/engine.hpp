#pragma once

// Evaluation runs: oracle mode (real reference images as queries), generated
// mode (one run per generator method), gallery ablation sweeps and variant
// comparisons.
//
// Every result is a pure function of the loaded sets and the EvalConfig. All
// reductions happen in a fixed key order after the parallel per-query work, so
// thread count never changes a number.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fprk/embstore.hpp"
#include "fprk/gallery.hpp"
#include "fprk/metrics.hpp"

namespace fprk {

enum class EvalMode { oracle, generated, both };
enum class Scale { fraction, percent };

std::string_view to_string(EvalMode mode);
EvalMode parse_eval_mode(std::string_view token);
std::string_view to_string(Scale scale);
Scale parse_scale(std::string_view token);

struct SetSource {
  std::filesystem::path path;
  std::optional<Format> format;  // from the extension when unset
  std::string dataset;           // file stem when empty
};

struct GallerySource {
  enum class Kind { roles, file, split };
  Kind kind = Kind::roles;
  std::filesystem::path path;  // Kind::file
  SplitConfig split;           // Kind::split; seed comes from EvalConfig::seed
};

struct MetricOptions {
  Aggregation aggregation = Aggregation::per_query;
  PairwiseMode pairwise_mode = PairwiseMode::vs_reference;
  Scale scale = Scale::fraction;
};

struct EvalConfig {
  std::vector<SetSource> sets;
  std::vector<std::string> encoders;  // empty = every encoder found
  std::vector<std::string> methods;   // empty = every method found
  std::vector<std::string> variants;  // empty = every variant found
  GallerySource gallery;
  MetricOptions metrics;
  std::filesystem::path prompt_pairs;  // JSON object: generated id -> prompt id
  std::uint64_t seed = 0;
  EvalMode mode = EvalMode::both;
  /// Relative paths resolve against this; not part of the fingerprint.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  /// Canonical JSON (sorted keys, paths as written).
  std::string to_json() const;
  std::uint64_t fingerprint() const;
};

/// Parses a run config; relative paths resolve against `base_dir`.
EvalConfig eval_config_from_json(std::string_view text, const std::filesystem::path& base_dir);
/// Loads a run config file; paths resolve against the file's directory.
EvalConfig load_eval_config(const std::filesystem::path& path);

struct RunKey {
  std::string dataset;
  std::string encoder;
  std::string method;  // "oracle" for oracle-mode runs
  std::string variant;

  friend auto operator<=>(const RunKey&, const RunKey&) = default;
};

inline constexpr const char* kOracleMethod = "oracle";

struct SubjectBreakdown {
  std::string subject;
  std::size_t queries = 0;
  double map = 0.0;
  double top1 = 0.0;
  double pairwise = 0.0;
};

struct GallerySummary {
  std::size_t subjects = 0;
  std::size_t images = 0;
  std::size_t reference_images = 0;
  SamplingStrategy strategy = SamplingStrategy::roles;
  std::uint64_t fingerprint = 0;
};

struct RunResult {
  RunKey key;
  double map_per_query = 0.0;
  double map_per_subject = 0.0;
  PairwiseSummary pairwise;
  std::optional<double> text_adherence;
  double top1_accuracy = 0.0;
  std::vector<SubjectBreakdown> per_subject;
  std::vector<ApResult> per_query;  // sorted by query id
  std::size_t query_count = 0;
  GallerySummary gallery;
  std::uint64_t config_fingerprint = 0;

  double map(Aggregation a) const {
    return a == Aggregation::per_query ? map_per_query : map_per_subject;
  }
};

struct EvalOptions {
  MetricOptions metrics;
  std::map<std::string, std::string> prompt_pairs;
  std::uint64_t config_fingerprint = 0;
  Exec exec = Exec::parallel;
};

/// One (dataset, encoder) group: every configured set with that pair merged.
struct EvalGroup {
  std::string dataset;
  EmbeddingSet set;
};

std::vector<EvalGroup> load_groups(const EvalConfig& config);

/// Base id shared by all variants of an image: a trailing "@<variant>" is
/// dropped from the record id.
std::string base_id(const EmbeddingRecord& record);

/// Records of one variant with ids rebased; prompt records of every variant
/// are kept since prompts carry no image variant.
EmbeddingSet variant_slice(const EmbeddingSet& set, const std::string& variant);

/// The GallerySpec a config prescribes for one group slice.
GallerySpec resolve_gallery(const EvalConfig& config, const EmbeddingSet& slice);

/// Real reference images as queries against the gallery. Pairwise similarity
/// is between real images: queries vs their subjects' gallery images.
RunResult evaluate_oracle(const EmbeddingSet& slice, const GallerySpec& spec, const RunKey& key,
                          const EvalOptions& options);

/// Generated images of `key.method` as queries.
RunResult evaluate_generated(const EmbeddingSet& slice, const GallerySpec& spec, const RunKey& key,
                             const EvalOptions& options);

/// Queries restricted to `query_subjects` (all query subjects when empty).
RunResult evaluate_queries(const EmbeddingSet& slice, const GallerySpec& spec, const RunKey& key,
                           const EvalOptions& options, bool oracle,
                           const std::vector<std::string>& query_subjects = {});

std::vector<RunResult> run_oracle_eval(const EvalConfig& config, Exec exec = Exec::parallel);
/// One result per (group, method, variant); every method sees the same spec.
std::vector<RunResult> run_generated_eval(const EvalConfig& config, Exec exec = Exec::parallel);
/// Oracle and/or generated runs as config.mode says, oracle first.
std::vector<RunResult> run_eval(const EvalConfig& config, Exec exec = Exec::parallel);

enum class AblationAxis { images_per_subject, subject_count, sampling_strategy };

std::string_view to_string(AblationAxis axis);
AblationAxis parse_ablation_axis(std::string_view token);

struct AblationOptions {
  AblationAxis axis = AblationAxis::images_per_subject;
  std::vector<std::string> values;  // numbers for numeric axes, strategy names otherwise
  std::vector<std::uint64_t> seeds = {0};
  bool full_resample = false;  // default: nested galleries (prefixes under one seed)
  EvalMode queries = EvalMode::oracle;  // oracle or generated
  std::size_t reference_count = 5;
  std::size_t gallery_count = 10;  // fixed per-subject gallery size on other axes
  std::vector<std::string> methods;  // generated mode; empty = all
  MetricOptions metrics;

  void validate() const;
};

struct AblationCell {
  std::string value;
  std::uint64_t seed = 0;
  std::vector<RunResult> runs;  // one per method (or the oracle run)
  double map = 0.0;             // mean over runs
  double similarity = 0.0;      // mean over runs of the pairwise dataset mean
};

struct AblationGrid {
  AblationAxis axis = AblationAxis::images_per_subject;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationCell> cells;  // seed-major, then grid value
};

/// Rebuilds the gallery per grid value from `pool` (one variant, real and
/// generated records) and evaluates each cell.
AblationGrid run_ablation_sweep(const EmbeddingSet& pool, const AblationOptions& options,
                                const EvalOptions& eval);
/// Uses the first configured group and its first variant.
AblationGrid run_ablation_sweep(const EvalConfig& config, const AblationOptions& options,
                                Exec exec = Exec::parallel);

struct MetricDelta {
  RunKey key;  // variant field holds "A->B"
  double map_per_query = 0.0;
  double map_per_subject = 0.0;
  double pairwise = 0.0;
  double top1 = 0.0;
  std::optional<double> text_adherence;
};

struct VariantComparison {
  std::string variant_a;
  std::string variant_b;
  std::vector<RunResult> a;
  std::vector<RunResult> b;
  std::vector<MetricDelta> deltas;       // b - a
  std::vector<std::string> missing_in_b;  // base ids
  std::vector<std::string> missing_in_a;
};

/// Evaluates both variants on their shared base ids with one GallerySpec.
/// Throws ValidationError when the id sets are disjoint.
VariantComparison compare_variants(const EvalConfig& config, const std::string& variant_a,
                                   const std::string& variant_b, Exec exec = Exec::parallel);

std::string run_results_to_json(const std::vector<RunResult>& results);
std::vector<RunResult> run_results_from_json(std::string_view text);
std::string ablation_grid_to_json(const AblationGrid& grid);
std::string variant_comparison_to_json(const VariantComparison& comparison);

}  // namespace fprk
