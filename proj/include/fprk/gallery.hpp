#pragma once

// Reference/gallery partitioning of labeled embedding pools.
//
// Every seeded draw is keyed by (seed XOR FNV-1a(subject)), and candidates are
// put in id order before drawing, so a split does not depend on subject order,
// candidate order or thread schedule.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fprk/embstore.hpp"
#include "fprk/kernels.hpp"

namespace fprk {

enum class SamplingStrategy { random, kmeans, curated, roles };

std::string_view to_string(SamplingStrategy strategy);
SamplingStrategy parse_strategy(std::string_view token);

struct SplitConfig {
  std::size_t reference_count = 5;
  std::size_t gallery_count = 10;
  std::size_t subject_limit = 0;  // 0 = every subject in the pool
  SamplingStrategy strategy = SamplingStrategy::random;
  std::uint64_t seed = 0;
  bool cap_to_available = false;
  std::filesystem::path curated_list;  // required for strategy=curated

  /// Throws ValidationError on zero counts or a curated strategy without a list.
  void validate() const;
};

struct GallerySpec {
  SamplingStrategy strategy = SamplingStrategy::random;
  std::uint64_t seed = 0;
  std::string note;
  std::vector<std::string> warnings;
  // subject -> ids, each list sorted
  std::map<std::string, std::vector<std::string>> reference;
  std::map<std::string, std::vector<std::string>> gallery;

  std::vector<std::string> subjects() const;
  std::size_t gallery_size() const;
  std::size_t reference_size() const;
  /// Stable FNV-1a over strategy, seed and the id lists.
  std::uint64_t fingerprint() const;
  /// Throws ValidationError if any id is both reference and gallery.
  void check_disjoint() const;

  friend bool operator==(const GallerySpec&, const GallerySpec&) = default;
};

std::uint64_t subject_seed(std::uint64_t seed, std::string_view subject);

/// Seeded permutation of the candidates' ids (candidates are sorted by id
/// first). Prefixes of it are nested random samples.
std::vector<std::string> random_order(std::span<const EmbeddingRecord* const> candidates,
                                      std::uint64_t seed);

/// n ids drawn uniformly without replacement, returned sorted by id.
std::vector<std::string> sample_random(std::span<const EmbeddingRecord* const> candidates,
                                       std::size_t n, std::uint64_t seed);

/// k-means with k=n on the candidates' raw vectors; from each cluster the
/// member closest to its centroid (ties by id). Returned sorted by id.
std::vector<std::string> sample_kmeans(std::span<const EmbeddingRecord* const> candidates,
                                       std::size_t n, std::uint64_t seed,
                                       Exec exec = Exec::parallel);

/// Subjects in seeded order; a prefix of length m is the m-subject selection.
std::vector<std::string> subject_order(std::vector<std::string> subjects, std::uint64_t seed);

/// Partitions each subject's real records (reference and gallery roles) into
/// disjoint reference and gallery lists.
GallerySpec split_reference_gallery(const EmbeddingSet& pool, const SplitConfig& config);

/// Uses the roles already stored on the records.
GallerySpec gallery_from_roles(const EmbeddingSet& pool);

struct CuratedLists {
  std::vector<std::string> gallery;
  std::vector<std::string> reference;
  bool has_reference_section = false;
};

/// One id per line, '#' comment lines, '---' separates gallery from reference.
CuratedLists parse_curated_list(std::string_view text);

/// Gallery exactly as listed. Reference is the explicit second list, or
/// every other real record of the listed subjects when there is none.
GallerySpec curate_from_list(const EmbeddingSet& pool, const CuratedLists& lists);

std::string gallery_spec_to_json(const GallerySpec& spec);
GallerySpec gallery_spec_from_json(std::string_view text);
GallerySpec load_gallery_spec(const std::filesystem::path& path);
void write_gallery_spec(const GallerySpec& spec, const std::filesystem::path& path);

}  // namespace fprk
