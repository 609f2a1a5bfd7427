#include "fprk/gallery.hpp"

#include <algorithm>
#include <set>

#include "fprk/error.hpp"
#include "fprk/fileio.hpp"
#include "fprk/hash.hpp"
#include "fprk/kmeans.hpp"
#include "fprk/rng.hpp"
#include "json.hpp"

namespace fprk {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTagOrder = fnv1a64("order");
constexpr std::uint64_t kTagReference = fnv1a64("reference");
constexpr std::uint64_t kTagGallery = fnv1a64("gallery");
constexpr std::uint64_t kTagSubjects = fnv1a64("subjects");

std::vector<const EmbeddingRecord*> canonical(std::span<const EmbeddingRecord* const> c) {
  std::vector<const EmbeddingRecord*> out(c.begin(), c.end());
  std::sort(out.begin(), out.end(),
            [](const EmbeddingRecord* a, const EmbeddingRecord* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i - 1]->id == out[i]->id)
      throw ValidationError("duplicate candidate id '" + out[i]->id + "'");
  return out;
}

void check_sample_size(std::size_t n, std::size_t available) {
  if (n == 0) throw ValidationError("sample size must be at least 1");
  if (n > available)
    throw ValidationError("sample size " + std::to_string(n) + " exceeds " +
                          std::to_string(available) + " candidates");
}

std::vector<const EmbeddingRecord*> real_records(const EmbeddingSet& pool, const std::string& s) {
  std::vector<const EmbeddingRecord*> out;
  for (Role role : {Role::reference, Role::gallery})
    for (std::size_t i : pool.indices(s, role)) out.push_back(&pool[i]);
  return out;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

struct SubjectSplit {
  std::vector<std::string> reference;
  std::vector<std::string> gallery;
  std::string warning;
  std::string error;
};

SubjectSplit split_subject(const std::string& subject,
                           const std::vector<const EmbeddingRecord*>& candidates,
                           const SplitConfig& cfg) {
  SubjectSplit out;
  const auto cands = canonical(candidates);
  std::size_t n_ref = cfg.reference_count;
  std::size_t n_gal = cfg.gallery_count;
  if (cands.size() < n_ref + n_gal) {
    if (!cfg.cap_to_available || cands.size() < 2) {
      out.error = "insufficient candidates for subject '" + subject + "': have " +
                  std::to_string(cands.size()) + ", need " + std::to_string(n_ref + n_gal);
      return out;
    }
    n_ref = std::min(n_ref, cands.size() - 1);
    n_gal = std::min(n_gal, cands.size() - n_ref);
    out.warning = "subject '" + subject + "' capped to " + std::to_string(n_ref) + " reference + " +
                  std::to_string(n_gal) + " gallery (" + std::to_string(cands.size()) +
                  " available)";
  }
  const std::uint64_t s = subject_seed(cfg.seed, subject);
  CounterRng rng(derive_key(s, {kTagReference}));
  const auto perm = random_permutation(cands.size(), rng);
  std::vector<const EmbeddingRecord*> rest;
  std::vector<bool> is_ref(cands.size(), false);
  for (std::size_t i = 0; i < n_ref; ++i) is_ref[perm[i]] = true;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (is_ref[i])
      out.reference.push_back(cands[i]->id);
    else
      rest.push_back(cands[i]);
  }
  const std::uint64_t gseed = derive_key(s, {kTagGallery});
  // Nested parallelism inside k-means is not useful here; subjects already run
  // concurrently.
  out.gallery = cfg.strategy == SamplingStrategy::kmeans
                    ? sample_kmeans(rest, n_gal, gseed, Exec::serial)
                    : sample_random(rest, n_gal, gseed);
  return out;
}

json id_lists_json(const std::map<std::string, std::vector<std::string>>& ref,
                   const std::map<std::string, std::vector<std::string>>& gal) {
  json subjects = json::object();
  std::set<std::string> keys;
  for (const auto& [s, v] : ref) keys.insert(s);
  for (const auto& [s, v] : gal) keys.insert(s);
  for (const auto& s : keys) {
    auto r = ref.find(s);
    auto g = gal.find(s);
    subjects[s] = {{"reference", r == ref.end() ? std::vector<std::string>{} : r->second},
                   {"gallery", g == gal.end() ? std::vector<std::string>{} : g->second}};
  }
  return subjects;
}

}  // namespace

std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::random: return "random";
    case SamplingStrategy::kmeans: return "kmeans";
    case SamplingStrategy::curated: return "curated";
    case SamplingStrategy::roles: return "roles";
  }
  return "unknown";
}

SamplingStrategy parse_strategy(std::string_view token) {
  for (auto s : {SamplingStrategy::random, SamplingStrategy::kmeans, SamplingStrategy::curated,
                 SamplingStrategy::roles})
    if (to_string(s) == token) return s;
  if (token == "k-means") return SamplingStrategy::kmeans;
  throw ValidationError("unknown sampling strategy '" + std::string(token) + "'");
}

void SplitConfig::validate() const {
  if (reference_count == 0) throw ValidationError("split: reference count must be at least 1");
  if (gallery_count == 0) throw ValidationError("split: gallery count must be at least 1");
  if (strategy == SamplingStrategy::curated && curated_list.empty())
    throw ValidationError("split: strategy 'curated' requires an id-list file");
}

std::vector<std::string> GallerySpec::subjects() const {
  std::set<std::string> s;
  for (const auto& [k, v] : reference) s.insert(k);
  for (const auto& [k, v] : gallery) s.insert(k);
  return {s.begin(), s.end()};
}

std::size_t GallerySpec::gallery_size() const {
  std::size_t n = 0;
  for (const auto& [k, v] : gallery) n += v.size();
  return n;
}

std::size_t GallerySpec::reference_size() const {
  std::size_t n = 0;
  for (const auto& [k, v] : reference) n += v.size();
  return n;
}

std::uint64_t GallerySpec::fingerprint() const {
  const json doc = {{"strategy", to_string(strategy)},
                    {"seed", seed},
                    {"subjects", id_lists_json(reference, gallery)}};
  return fnv1a64(doc.dump());
}

void GallerySpec::check_disjoint() const {
  std::set<std::string> ref_ids;
  for (const auto& [s, ids] : reference) ref_ids.insert(ids.begin(), ids.end());
  for (const auto& [s, ids] : gallery)
    for (const auto& id : ids)
      if (ref_ids.contains(id))
        throw ValidationError("gallery spec: id '" + id + "' is both reference and gallery (overlap)");
}

std::uint64_t subject_seed(std::uint64_t seed, std::string_view subject) {
  return seed ^ fnv1a64(subject);
}

std::vector<std::string> random_order(std::span<const EmbeddingRecord* const> candidates,
                                      std::uint64_t seed) {
  const auto cands = canonical(candidates);
  CounterRng rng(derive_key(seed, {kTagOrder}));
  std::vector<std::string> out;
  out.reserve(cands.size());
  for (std::size_t i : random_permutation(cands.size(), rng)) out.push_back(cands[i]->id);
  return out;
}

std::vector<std::string> sample_random(std::span<const EmbeddingRecord* const> candidates,
                                       std::size_t n, std::uint64_t seed) {
  check_sample_size(n, candidates.size());
  auto order = random_order(candidates, seed);
  order.resize(n);
  return sorted(std::move(order));
}

std::vector<std::string> sample_kmeans(std::span<const EmbeddingRecord* const> candidates,
                                       std::size_t n, std::uint64_t seed, Exec exec) {
  check_sample_size(n, candidates.size());
  const auto cands = canonical(candidates);
  if (n == cands.size()) {
    std::vector<std::string> all;
    for (const auto* c : cands) all.push_back(c->id);
    return all;
  }
  const std::size_t dim = cands.front()->vector.size();
  std::vector<double> points;
  points.reserve(cands.size() * dim);
  for (const auto* c : cands) {
    if (c->vector.size() != dim) throw ValidationError("candidate '" + c->id + "': dimension mismatch");
    points.insert(points.end(), c->vector.begin(), c->vector.end());
  }
  KMeansOptions opt;
  opt.k = n;
  opt.seed = seed;
  opt.exec = exec;
  const auto km = kmeans(points, dim, opt);

  // Candidates are in id order, so the first strictly-closer member wins ties by id.
  std::vector<std::size_t> best(n, cands.size());
  std::vector<double> best_d(n, 0.0);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const std::size_t c = km.assignments[i];
    const double d = kernels::squared_distance(points.data() + i * dim, km.centroid(c).data(), dim);
    if (best[c] == cands.size() || d < best_d[c]) {
      best[c] = i;
      best_d[c] = d;
    }
  }
  std::vector<std::string> out;
  for (std::size_t c = 0; c < n; ++c) out.push_back(cands[best[c]]->id);
  return sorted(std::move(out));
}

std::vector<std::string> subject_order(std::vector<std::string> subjects, std::uint64_t seed) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  CounterRng rng(derive_key(seed, {kTagSubjects}));
  const auto perm = random_permutation(subjects.size(), rng);
  std::vector<std::string> out;
  out.reserve(subjects.size());
  for (std::size_t i : perm) out.push_back(subjects[i]);
  return out;
}

GallerySpec split_reference_gallery(const EmbeddingSet& pool, const SplitConfig& cfg) {
  cfg.validate();
  if (cfg.strategy == SamplingStrategy::curated)
    return curate_from_list(pool, parse_curated_list(read_file(cfg.curated_list)));
  if (cfg.strategy == SamplingStrategy::roles) return gallery_from_roles(pool);

  std::vector<std::string> subjects;
  for (const auto& s : pool.manifest().subjects)
    if (!real_records(pool, s).empty()) subjects.push_back(s);
  if (subjects.empty()) throw ValidationError("split: pool has no real-image records");
  if (cfg.subject_limit > 0 && cfg.subject_limit < subjects.size()) {
    subjects = subject_order(subjects, cfg.seed);
    subjects.resize(cfg.subject_limit);
    std::sort(subjects.begin(), subjects.end());
  }

  std::vector<SubjectSplit> splits(subjects.size());
  const auto ns = static_cast<std::int64_t>(subjects.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < ns; ++i) {
    const auto si = static_cast<std::size_t>(i);
    try {
      splits[si] = split_subject(subjects[si], real_records(pool, subjects[si]), cfg);
    } catch (const std::exception& e) {
      splits[si].error = e.what();
    }
  }

  GallerySpec spec;
  spec.strategy = cfg.strategy;
  spec.seed = cfg.seed;
  spec.note = std::string(to_string(cfg.strategy)) + " split: " +
              std::to_string(cfg.reference_count) + " reference / " +
              std::to_string(cfg.gallery_count) + " gallery per subject";
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (!splits[i].error.empty()) throw ValidationError(splits[i].error);
    if (!splits[i].warning.empty()) spec.warnings.push_back(splits[i].warning);
    spec.reference[subjects[i]] = std::move(splits[i].reference);
    spec.gallery[subjects[i]] = std::move(splits[i].gallery);
  }
  spec.check_disjoint();
  return spec;
}

GallerySpec gallery_from_roles(const EmbeddingSet& pool) {
  GallerySpec spec;
  spec.strategy = SamplingStrategy::roles;
  spec.note = "record roles";
  for (const auto& s : pool.manifest().subjects) {
    for (std::size_t i : pool.indices(s, Role::reference)) spec.reference[s].push_back(pool[i].id);
    for (std::size_t i : pool.indices(s, Role::gallery)) spec.gallery[s].push_back(pool[i].id);
  }
  if (spec.gallery.empty()) throw ValidationError("pool has no gallery-role records");
  spec.check_disjoint();
  return spec;
}

CuratedLists parse_curated_list(std::string_view text) {
  CuratedLists out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) continue;
    line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
    if (line.front() == '#') continue;
    if (line == "---") {
      if (out.has_reference_section) throw ParseError("curated list: more than one '---' separator");
      out.has_reference_section = true;
      continue;
    }
    (out.has_reference_section ? out.reference : out.gallery).emplace_back(line);
  }
  if (out.gallery.empty()) throw ValidationError("curated list: no gallery ids");
  return out;
}

GallerySpec curate_from_list(const EmbeddingSet& pool, const CuratedLists& lists) {
  auto lookup = [&](const std::string& id) -> const EmbeddingRecord& {
    const auto* r = pool.find(id);
    if (r == nullptr) throw ValidationError("curated list: unknown id '" + id + "'");
    if (!is_real(r->role))
      throw ValidationError("curated list: id '" + id + "' is not a real-image record");
    return *r;
  };
  std::set<std::string> gallery_ids;
  GallerySpec spec;
  spec.strategy = SamplingStrategy::curated;
  spec.note = lists.has_reference_section ? "curated gallery and reference lists"
                                          : "curated gallery list; reference = remainder";
  for (const auto& id : lists.gallery) {
    const auto& r = lookup(id);
    if (!gallery_ids.insert(id).second)
      throw ValidationError("curated list: id '" + id + "' listed twice");
    spec.gallery[r.subject].push_back(id);
  }
  if (lists.has_reference_section) {
    std::set<std::string> seen;
    for (const auto& id : lists.reference) {
      const auto& r = lookup(id);
      if (gallery_ids.contains(id))
        throw ValidationError("curated list: id '" + id + "' appears in both lists (overlap)");
      if (!seen.insert(id).second)
        throw ValidationError("curated list: id '" + id + "' listed twice");
      spec.reference[r.subject].push_back(id);
    }
  } else {
    for (const auto& [s, ids] : spec.gallery)
      for (const auto* r : real_records(pool, s))
        if (!gallery_ids.contains(r->id)) spec.reference[s].push_back(r->id);
  }
  for (auto& [s, ids] : spec.gallery) std::sort(ids.begin(), ids.end());
  for (auto& [s, ids] : spec.reference) std::sort(ids.begin(), ids.end());
  spec.check_disjoint();
  return spec;
}

std::string gallery_spec_to_json(const GallerySpec& spec) {
  const json doc = {{"strategy", to_string(spec.strategy)},
                    {"seed", spec.seed},
                    {"note", spec.note},
                    {"warnings", spec.warnings},
                    {"fingerprint", to_hex64(spec.fingerprint())},
                    {"subjects", id_lists_json(spec.reference, spec.gallery)}};
  return doc.dump(2) + "\n";
}

GallerySpec gallery_spec_from_json(std::string_view text) {
  GallerySpec spec;
  try {
    const json doc = json::parse(text);
    spec.strategy = parse_strategy(doc.at("strategy").get<std::string>());
    spec.seed = doc.at("seed").get<std::uint64_t>();
    spec.note = doc.value("note", "");
    spec.warnings = doc.value("warnings", std::vector<std::string>{});
    for (const auto& [s, lists] : doc.at("subjects").items()) {
      auto ref = lists.at("reference").get<std::vector<std::string>>();
      auto gal = lists.at("gallery").get<std::vector<std::string>>();
      if (!ref.empty()) spec.reference[s] = sorted(std::move(ref));
      if (!gal.empty()) spec.gallery[s] = sorted(std::move(gal));
    }
    if (doc.contains("fingerprint") &&
        doc.at("fingerprint").get<std::string>() != to_hex64(spec.fingerprint()))
      throw ValidationError("gallery spec: fingerprint does not match its id lists");
  } catch (const json::exception& e) {
    throw ParseError(std::string("gallery spec: ") + e.what());
  }
  spec.check_disjoint();
  return spec;
}

GallerySpec load_gallery_spec(const std::filesystem::path& path) {
  return gallery_spec_from_json(read_file(path));
}

void write_gallery_spec(const GallerySpec& spec, const std::filesystem::path& path) {
  write_file_atomic(path, gallery_spec_to_json(spec));
}

}  // namespace fprk
