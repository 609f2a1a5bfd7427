#pragma once

// Embedding data model: identity-labeled vectors, dataset manifests and the
// JSONL / binary file formats.
//
// Vectors are stored exactly as the encoder produced them (32-bit floats, not
// normalized). Every EmbeddingSet is validated on construction and immutable
// afterwards, so it can be shared freely across threads.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fprk {

enum class Role : std::uint8_t { reference = 0, gallery = 1, generated = 2, prompt = 3 };

inline constexpr std::size_t kRoleCount = 4;
inline constexpr std::array<Role, kRoleCount> kAllRoles = {Role::reference, Role::gallery,
                                                            Role::generated, Role::prompt};

std::string_view to_string(Role role);
/// Parses the lowercase token; throws ParseError otherwise.
Role parse_role(std::string_view token);
/// Reference and gallery records come from real images.
constexpr bool is_real(Role role) { return role == Role::reference || role == Role::gallery; }

struct EmbeddingRecord {
  std::string id;
  std::string subject;
  Role role = Role::gallery;
  std::string encoder;
  std::string variant = "default";
  std::string method;  // empty for real images
  std::vector<float> vector;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

using RoleCounts = std::array<std::size_t, kRoleCount>;

struct DatasetManifest {
  static constexpr std::uint16_t kFormatVersion = 1;

  std::string name;
  std::uint32_t dimension = 0;
  std::string encoder;
  std::vector<std::string> subjects;            // sorted, unique
  std::map<std::string, RoleCounts> counts;     // subject -> per-role count
  std::uint16_t format_version = kFormatVersion;

  std::size_t count(const std::string& subject, Role role) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

enum class Format { jsonl, binary };

std::string_view to_string(Format format);
Format parse_format(std::string_view token);
/// `.bin` / `.fprk` -> binary, anything else -> jsonl.
Format format_from_extension(const std::filesystem::path& path);

/// Selection used by EmbeddingSet::filter; unset fields match everything.
struct RecordFilter {
  std::optional<Role> role;
  std::optional<std::string> subject;
  std::optional<std::string> method;
  std::optional<std::string> variant;

  bool matches(const EmbeddingRecord& record) const;
};

class EmbeddingSet {
 public:
  /// Validates and indexes `records`. Records are kept in id order.
  /// Throws ValidationError naming the first offending record and rule.
  static EmbeddingSet create(std::vector<EmbeddingRecord> records, std::string name = "dataset");

  const DatasetManifest& manifest() const { return manifest_; }
  const std::string& name() const { return manifest_.name; }
  std::uint32_t dimension() const { return manifest_.dimension; }
  const std::string& encoder() const { return manifest_.encoder; }
  std::size_t size() const { return records_.size(); }

  std::span<const EmbeddingRecord> records() const { return records_; }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }

  const EmbeddingRecord* find(std::string_view id) const;
  /// Positions into records(), ascending.
  std::span<const std::size_t> indices(Role role) const;
  std::span<const std::size_t> indices(const std::string& subject, Role role) const;

  std::vector<const EmbeddingRecord*> select(const RecordFilter& filter) const;

  /// Sorted distinct values seen across records.
  std::vector<std::string> methods() const;
  std::vector<std::string> variants() const;

  EmbeddingSet filter(const RecordFilter& filter) const;
  EmbeddingSet filter(const std::function<bool(const EmbeddingRecord&)>& keep) const;

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
    return a.manifest_ == b.manifest_ && a.records_ == b.records_;
  }

 private:
  EmbeddingSet() = default;

  DatasetManifest manifest_;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string_view, std::size_t> by_id_;
  std::array<std::vector<std::size_t>, kRoleCount> by_role_;
  std::map<std::pair<std::string, Role>, std::vector<std::size_t>> by_subject_role_;
};

/// Union of two sets with the same encoder and dimension. Ids must not collide.
EmbeddingSet merge(const EmbeddingSet& a, const EmbeddingSet& b, std::string name = {});

/// `name` defaults to the file stem.
EmbeddingSet load_set(const std::filesystem::path& path, Format format, std::string name = {});
EmbeddingSet load_set(const std::filesystem::path& path);
void write_set(const EmbeddingSet& set, const std::filesystem::path& path, Format format);

std::string encode_jsonl(std::span<const EmbeddingRecord> records);
std::string encode_binary(std::span<const EmbeddingRecord> records, std::uint32_t dimension);
/// Decoders only parse; validation happens in EmbeddingSet::create.
std::vector<EmbeddingRecord> decode_jsonl(std::string_view text);
std::vector<EmbeddingRecord> decode_binary(std::string_view bytes);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(std::string_view text);
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Throws ValidationError if `set` disagrees with the declared dimension,
/// encoder, subjects or counts.
void check_against_manifest(const EmbeddingSet& set, const DatasetManifest& manifest);

}  // namespace fprk
