#pragma once

// Scoring primitives: cosine similarity, exact gallery ranking, average
// precision and its aggregations, and the pairwise-similarity baselines.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fprk/embstore.hpp"
#include "fprk/kernels.hpp"

namespace fprk {

/// Cosine of two equal-length, nonzero vectors, clamped to [-1, 1].
/// Throws ValidationError on dimension mismatch or zero norm.
double cosine(std::span<const float> u, std::span<const float> v);

/// Gallery items ordered by id, with vectors packed for the ranking kernels.
class GalleryIndex {
 public:
  /// Throws ValidationError on an empty gallery or mixed dimensions.
  explicit GalleryIndex(std::span<const EmbeddingRecord* const> items);
  explicit GalleryIndex(const std::vector<const EmbeddingRecord*>& items)
      : GalleryIndex(std::span<const EmbeddingRecord* const>(items)) {}

  std::size_t size() const { return ids_.size(); }
  std::uint32_t dim() const { return block_.dim(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::string& subject(std::size_t i) const { return subjects_[i]; }
  const VectorBlock& block() const { return block_; }
  /// Number of gallery items with this subject.
  std::size_t count(const std::string& subject) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> subjects_;
  std::map<std::string, std::size_t> subject_counts_;
  VectorBlock block_;
};

struct RankedItem {
  std::string id;
  std::string subject;
  double similarity = 0.0;
  bool relevant = false;
};

/// Gallery items by (similarity desc, id asc); every item exactly once.
struct RankedList {
  std::string query_id;
  std::string query_subject;
  std::vector<RankedItem> items;
};

struct ApResult {
  std::string query_id;
  std::string subject;
  double ap = 0.0;
  std::size_t relevant_count = 0;
  std::size_t first_relevant_rank = 0;  // 1-based
};

RankedList rank_gallery(const EmbeddingRecord& query, const GalleryIndex& gallery);

/// Permutation of gallery positions by (similarity desc, position asc).
/// Gallery positions are in id order, so this is the id tie-break.
std::vector<std::size_t> rank_order(std::span<const double> similarities);

/// Non-interpolated AP over a relevance sequence in rank order:
/// (1/R) * sum over relevant ranks k of (#relevant in top k) / k.
/// Throws ValidationError when no item is relevant.
double average_precision(std::span<const std::uint8_t> relevance);
ApResult average_precision(const RankedList& ranked);

enum class Aggregation { per_query, per_subject_macro };

std::string_view to_string(Aggregation aggregation);
Aggregation parse_aggregation(std::string_view token);

/// Sums in (subject, query id) order, so the result does not depend on the
/// order of `results`.
double mean_average_precision(std::span<const ApResult> results, Aggregation aggregation);

/// Ranks every query against `gallery` and scores it. Result order follows
/// `queries`.
std::vector<ApResult> score_queries(std::span<const EmbeddingRecord* const> queries,
                                    const GalleryIndex& gallery, Exec exec = Exec::parallel);

/// Fraction of queries whose top-ranked gallery item shares the query subject.
double top1_identity_accuracy(std::span<const EmbeddingRecord* const> queries,
                              const GalleryIndex& gallery, Exec exec = Exec::parallel);
double top1_identity_accuracy(std::span<const ApResult> results);

enum class PairwiseMode { vs_reference, vs_gallery };

std::string_view to_string(PairwiseMode mode);
PairwiseMode parse_pairwise_mode(std::string_view token);

struct PairwiseScore {
  std::string subject;
  PairwiseMode mode = PairwiseMode::vs_reference;
  double mean = 0.0;
  std::size_t pair_count = 0;
};

struct PairwiseSummary {
  PairwiseMode mode = PairwiseMode::vs_reference;
  std::vector<PairwiseScore> subjects;  // sorted by subject
  double dataset_mean = 0.0;            // unweighted mean over subjects
  double pair_mean = 0.0;               // mean over every pair in the dataset
  std::size_t pair_count = 0;
};

/// Mean cosine over the full (real, generated) cross product per subject.
/// Both sides must cover the same subjects; throws ValidationError listing
/// the subjects found on one side only.
PairwiseSummary pairwise_similarity_score(std::span<const EmbeddingRecord* const> real_side,
                                          std::span<const EmbeddingRecord* const> generated,
                                          PairwiseMode mode, Exec exec = Exec::parallel);

/// Mean cosine between each generated record and its paired prompt record.
/// `pairing` maps generated id -> prompt id.
double text_adherence_score(std::span<const EmbeddingRecord* const> prompts,
                            std::span<const EmbeddingRecord* const> generated,
                            const std::map<std::string, std::string>& pairing);

}  // namespace fprk
