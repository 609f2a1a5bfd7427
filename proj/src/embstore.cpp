#include "fprk/embstore.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <set>

#include "fprk/error.hpp"
#include "fprk/fileio.hpp"
#include "json.hpp"

namespace fprk {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'P', 'R', 'K'};
constexpr std::uint16_t kBinaryVersion = 1;
// Placeholder for NaN / Infinity tokens, which strict JSON rejects but Python's
// json module emits. They must surface as validation errors, not parse errors.
constexpr std::string_view kNonFiniteToken = "\"\\u0001nonfinite\"";
constexpr std::string_view kNonFiniteValue = "\x01nonfinite";

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += extra + 1;
  }
  return true;
}

[[noreturn]] void fail_record(const EmbeddingRecord& r, const std::string& rule) {
  throw ValidationError("record '" + r.id + "': " + rule);
}

void validate_record(const EmbeddingRecord& r) {
  if (r.id.empty()) throw ValidationError("record with empty id");
  for (const std::string* field : {&r.id, &r.subject, &r.encoder, &r.variant, &r.method}) {
    if (!valid_utf8(*field)) fail_record(r, "invalid UTF-8 in string field");
    if (field->size() > 0xFFFF) fail_record(r, "string field longer than 65535 bytes");
  }
  if (r.subject.empty()) fail_record(r, "empty subject");
  if (r.vector.empty()) fail_record(r, "empty vector");
  double norm2 = 0.0;
  for (float x : r.vector) {
    if (!std::isfinite(x)) fail_record(r, "non-finite component");
    norm2 += static_cast<double>(x) * static_cast<double>(x);
  }
  if (norm2 == 0.0) fail_record(r, "zero-norm vector");
  if (r.role == Role::generated && r.method.empty())
    fail_record(r, "generated record without method");
  if (is_real(r.role) && !r.method.empty()) fail_record(r, "real-image record with non-empty method");
}

// Little-endian primitive writers/readers for the binary format.
template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

void put_str16(std::string& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw ValidationError("string field longer than 65535 bytes: " + s.substr(0, 32));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.append(s);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::string get_str16(const char* what) {
    const auto len = get_le<std::uint16_t>(what);
    need(len, what);
    std::string s(bytes_.substr(pos_, len));
    pos_ += len;
    return s;
  }

  std::string_view get_raw(std::size_t n, const char* what) {
    need(n, what);
    auto v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw ParseError(std::string("binary set truncated while reading ") + what + " at byte " +
                       std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string replace_nonfinite_tokens(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < line.size()) {
        out.push_back(line[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    if (c == '-' || (c >= '0' && c <= '9')) {
      // Literals beyond double range (1e999) overflow the JSON parser; they
      // are non-finite values, not syntax errors.
      std::size_t end = i + 1;
      while (end < line.size() && std::strchr("0123456789+-.eE", line[end]) != nullptr) ++end;
      const std::string number(line.substr(i, end - i));
      errno = 0;
      const double v = std::strtod(number.c_str(), nullptr);
      if (errno == ERANGE && std::isinf(v)) {
        out.append(kNonFiniteToken);
        i = end - 1;
        continue;
      }
      if (number != "-") {
        out.append(number);
        i = end - 1;
        continue;
      }
    }
    auto rest = line.substr(i);
    std::size_t skip = 0;
    if (rest.starts_with("NaN")) skip = 3;
    else if (rest.starts_with("-Infinity")) skip = 9;
    else if (rest.starts_with("Infinity")) skip = 8;
    if (skip != 0) {
      out.append(kNonFiniteToken);
      i += skip - 1;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

const json& require_key(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError("line " + std::to_string(line_no) + ": missing key '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  const json& v = require_key(obj, key, line_no);
  if (!v.is_string())
    throw ParseError("line " + std::to_string(line_no) + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

void append_json_string(std::string& out, const std::string& s) {
  out.append(json(s).dump());
}

void append_float(std::string& out, float x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  out.append(buf, res.ptr);
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::reference: return "reference";
    case Role::gallery: return "gallery";
    case Role::generated: return "generated";
    case Role::prompt: return "prompt";
  }
  return "unknown";
}

Role parse_role(std::string_view token) {
  for (Role r : kAllRoles)
    if (to_string(r) == token) return r;
  throw ParseError("unknown role '" + std::string(token) + "'");
}

std::string_view to_string(Format format) {
  return format == Format::jsonl ? "jsonl" : "binary";
}

Format parse_format(std::string_view token) {
  if (token == "jsonl") return Format::jsonl;
  if (token == "binary" || token == "bin") return Format::binary;
  throw ParseError("unknown format '" + std::string(token) + "' (expected jsonl or binary)");
}

Format format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".bin" || ext == ".fprk") ? Format::binary : Format::jsonl;
}

std::size_t DatasetManifest::count(const std::string& subject, Role role) const {
  auto it = counts.find(subject);
  return it == counts.end() ? 0 : it->second[static_cast<std::size_t>(role)];
}

bool RecordFilter::matches(const EmbeddingRecord& r) const {
  return (!role || r.role == *role) && (!subject || r.subject == *subject) &&
         (!method || r.method == *method) && (!variant || r.variant == *variant);
}

EmbeddingSet EmbeddingSet::create(std::vector<EmbeddingRecord> records, std::string name) {
  if (records.empty()) throw ValidationError("empty set");
  std::sort(records.begin(), records.end(),
            [](const EmbeddingRecord& a, const EmbeddingRecord& b) { return a.id < b.id; });

  EmbeddingSet set;
  set.manifest_.name = std::move(name);
  set.manifest_.dimension = static_cast<std::uint32_t>(records.front().vector.size());
  set.manifest_.encoder = records.front().encoder;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    validate_record(r);
    if (i > 0 && records[i - 1].id == r.id) fail_record(r, "duplicate id");
    if (r.vector.size() != set.manifest_.dimension)
      fail_record(r, "dimension mismatch (" + std::to_string(r.vector.size()) + " vs " +
                         std::to_string(set.manifest_.dimension) + ")");
    if (r.encoder != set.manifest_.encoder)
      fail_record(r, "encoder mismatch ('" + r.encoder + "' vs '" + set.manifest_.encoder + "')");
  }

  set.records_ = std::move(records);
  std::set<std::string> subjects;
  for (std::size_t i = 0; i < set.records_.size(); ++i) {
    const auto& r = set.records_[i];
    set.by_id_.emplace(r.id, i);
    set.by_role_[static_cast<std::size_t>(r.role)].push_back(i);
    set.by_subject_role_[{r.subject, r.role}].push_back(i);
    subjects.insert(r.subject);
    auto& counts = set.manifest_.counts[r.subject];
    ++counts[static_cast<std::size_t>(r.role)];
  }
  set.manifest_.subjects.assign(subjects.begin(), subjects.end());

  // A set holding real images must give every generated subject a positive to
  // retrieve. Query-only sets (generated / prompt records) are recombined
  // with real sets by the caller, so the rule is checked there.
  const bool has_real = !set.by_role_[0].empty() || !set.by_role_[1].empty();
  if (has_real) {
    for (std::size_t i : set.by_role_[static_cast<std::size_t>(Role::generated)]) {
      const auto& r = set.records_[i];
      if (set.manifest_.count(r.subject, Role::gallery) == 0)
        fail_record(r, "generated subject '" + r.subject + "' has no gallery records");
    }
  }
  return set;
}

const EmbeddingRecord* EmbeddingSet::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

std::span<const std::size_t> EmbeddingSet::indices(Role role) const {
  return by_role_[static_cast<std::size_t>(role)];
}

std::span<const std::size_t> EmbeddingSet::indices(const std::string& subject, Role role) const {
  auto it = by_subject_role_.find({subject, role});
  if (it == by_subject_role_.end()) return {};
  return it->second;
}

std::vector<const EmbeddingRecord*> EmbeddingSet::select(const RecordFilter& filter) const {
  std::vector<const EmbeddingRecord*> out;
  for (const auto& r : records_)
    if (filter.matches(r)) out.push_back(&r);
  return out;
}

std::vector<std::string> EmbeddingSet::methods() const {
  std::set<std::string> s;
  for (std::size_t i : indices(Role::generated)) s.insert(records_[i].method);
  return {s.begin(), s.end()};
}

std::vector<std::string> EmbeddingSet::variants() const {
  std::set<std::string> s;
  for (const auto& r : records_) s.insert(r.variant);
  return {s.begin(), s.end()};
}

EmbeddingSet EmbeddingSet::filter(const RecordFilter& filter) const {
  return this->filter([&](const EmbeddingRecord& r) { return filter.matches(r); });
}

EmbeddingSet EmbeddingSet::filter(const std::function<bool(const EmbeddingRecord&)>& keep) const {
  std::vector<EmbeddingRecord> out;
  for (const auto& r : records_)
    if (keep(r)) out.push_back(r);
  return create(std::move(out), manifest_.name);
}

EmbeddingSet merge(const EmbeddingSet& a, const EmbeddingSet& b, std::string name) {
  std::vector<EmbeddingRecord> all(a.records().begin(), a.records().end());
  all.insert(all.end(), b.records().begin(), b.records().end());
  return EmbeddingSet::create(std::move(all), name.empty() ? a.name() : std::move(name));
}

std::string encode_jsonl(std::span<const EmbeddingRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out.append("{\"id\":");
    append_json_string(out, r.id);
    out.append(",\"subject\":");
    append_json_string(out, r.subject);
    out.append(",\"role\":\"");
    out.append(to_string(r.role));
    out.append("\",\"encoder\":");
    append_json_string(out, r.encoder);
    out.append(",\"variant\":");
    append_json_string(out, r.variant);
    out.append(",\"method\":");
    append_json_string(out, r.method);
    out.append(",\"vector\":[");
    for (std::size_t i = 0; i < r.vector.size(); ++i) {
      if (i) out.push_back(',');
      append_float(out, r.vector[i]);
    }
    out.append("]}\n");
  }
  return out;
}

std::vector<EmbeddingRecord> decode_jsonl(std::string_view text) {
  std::vector<EmbeddingRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    json obj;
    try {
      obj = json::parse(replace_nonfinite_tokens(line));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) throw ParseError("line " + std::to_string(line_no) + ": not an object");

    EmbeddingRecord r;
    r.id = require_string(obj, "id", line_no);
    r.subject = require_string(obj, "subject", line_no);
    r.role = parse_role(require_string(obj, "role", line_no));
    r.encoder = require_string(obj, "encoder", line_no);
    r.variant = require_string(obj, "variant", line_no);
    r.method = require_string(obj, "method", line_no);
    const json& vec = require_key(obj, "vector", line_no);
    if (!vec.is_array())
      throw ParseError("line " + std::to_string(line_no) + ": key 'vector' must be an array");
    r.vector.reserve(vec.size());
    for (const json& x : vec) {
      if (x.is_number()) {
        r.vector.push_back(static_cast<float>(x.get<double>()));
      } else if (x.is_string() && x.get_ref<const std::string&>() == kNonFiniteValue) {
        r.vector.push_back(std::numeric_limits<float>::quiet_NaN());
      } else {
        throw ParseError("line " + std::to_string(line_no) + ": vector element is not a number");
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string encode_binary(std::span<const EmbeddingRecord> records, std::uint32_t dimension) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_le<std::uint16_t>(out, kBinaryVersion);
  put_le<std::uint32_t>(out, dimension);
  put_le<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    if (r.vector.size() != dimension)
      throw ValidationError("record '" + r.id + "': dimension mismatch");
    put_str16(out, r.id);
    put_str16(out, r.subject);
    out.push_back(static_cast<char>(r.role));
    put_str16(out, r.encoder);
    put_str16(out, r.variant);
    put_str16(out, r.method);
    for (float x : r.vector) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

std::vector<EmbeddingRecord> decode_binary(std::string_view bytes) {
  ByteReader in(bytes);
  if (in.get_raw(4, "magic") != std::string_view(kMagic, 4))
    throw ParseError("bad magic (expected FPRK)");
  const auto version = in.get_le<std::uint16_t>("version");
  if (version != kBinaryVersion)
    throw ParseError("unsupported binary version " + std::to_string(version));
  const auto dimension = in.get_le<std::uint32_t>("dimension");
  const auto count = in.get_le<std::uint64_t>("record count");
  if (dimension == 0 && count > 0) throw ParseError("dimension 0 in header");

  std::vector<EmbeddingRecord> records;
  // Each record needs at least 11 header bytes plus the vector.
  const std::uint64_t min_record = 11 + 4ULL * dimension;
  if (count > in.remaining() / min_record + 1)
    throw ParseError("record count " + std::to_string(count) + " exceeds file size");
  records.reserve(count);
  for (std::uint64_t n = 0; n < count; ++n) {
    EmbeddingRecord r;
    r.id = in.get_str16("id");
    r.subject = in.get_str16("subject");
    const auto role = in.get_le<std::uint8_t>("role");
    if (role >= kRoleCount)
      throw ParseError("record '" + r.id + "': bad role byte " + std::to_string(role));
    r.role = static_cast<Role>(role);
    r.encoder = in.get_str16("encoder");
    r.variant = in.get_str16("variant");
    r.method = in.get_str16("method");
    r.vector.resize(dimension);
    for (auto& x : r.vector) x = std::bit_cast<float>(in.get_le<std::uint32_t>("vector"));
    records.push_back(std::move(r));
  }
  if (in.remaining() != 0)
    throw ParseError(std::to_string(in.remaining()) + " trailing bytes after last record");
  return records;
}

EmbeddingSet load_set(const std::filesystem::path& path, Format format, std::string name) {
  const std::string bytes = read_file(path);
  auto records = format == Format::jsonl ? decode_jsonl(bytes) : decode_binary(bytes);
  if (name.empty()) name = path.stem().string();
  return EmbeddingSet::create(std::move(records), std::move(name));
}

EmbeddingSet load_set(const std::filesystem::path& path) {
  return load_set(path, format_from_extension(path));
}

void write_set(const EmbeddingSet& set, const std::filesystem::path& path, Format format) {
  if (set.size() == 0) throw ValidationError("empty set");
  const std::string bytes = format == Format::jsonl ? encode_jsonl(set.records())
                                                    : encode_binary(set.records(), set.dimension());
  write_file_atomic(path, bytes);
}

std::string manifest_to_json(const DatasetManifest& m) {
  json counts = json::object();
  for (const auto& [subject, c] : m.counts) {
    json row = json::object();
    for (Role r : kAllRoles) row[std::string(to_string(r))] = c[static_cast<std::size_t>(r)];
    counts[subject] = row;
  }
  json doc = {{"format_version", m.format_version}, {"name", m.name},
              {"dimension", m.dimension},           {"encoder", m.encoder},
              {"subjects", m.subjects},             {"counts", counts}};
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text) {
  DatasetManifest m;
  try {
    const json doc = json::parse(text);
    m.format_version = doc.at("format_version").get<std::uint16_t>();
    m.name = doc.at("name").get<std::string>();
    m.dimension = doc.at("dimension").get<std::uint32_t>();
    m.encoder = doc.at("encoder").get<std::string>();
    m.subjects = doc.at("subjects").get<std::vector<std::string>>();
    for (const auto& [subject, row] : doc.at("counts").items()) {
      RoleCounts c{};
      for (Role r : kAllRoles) c[static_cast<std::size_t>(r)] = row.value(std::string(to_string(r)), 0);
      m.counts[subject] = c;
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (m.format_version != DatasetManifest::kFormatVersion)
    throw ParseError("manifest: unsupported format_version " + std::to_string(m.format_version));
  if (m.dimension == 0) throw ValidationError("manifest: dimension must be positive");
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_file(path));
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, manifest_to_json(manifest));
}

void check_against_manifest(const EmbeddingSet& set, const DatasetManifest& m) {
  for (const auto& r : set.records()) {
    if (r.vector.size() != m.dimension)
      fail_record(r, "dimension mismatch (" + std::to_string(r.vector.size()) + " vs manifest " +
                         std::to_string(m.dimension) + ")");
    if (r.encoder != m.encoder)
      fail_record(r, "encoder mismatch ('" + r.encoder + "' vs manifest '" + m.encoder + "')");
  }
  if (set.manifest().subjects != m.subjects)
    throw ValidationError("manifest subject list differs from records");
  if (set.manifest().counts != m.counts)
    throw ValidationError("manifest per-(subject, role) counts differ from records");
}

}  // namespace fprk
