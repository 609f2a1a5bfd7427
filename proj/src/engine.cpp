#include "fprk/engine.hpp"

#include <algorithm>
#include <set>

#include "fprk/error.hpp"
#include "fprk/fileio.hpp"
#include "fprk/hash.hpp"
#include "fprk/rng.hpp"
#include "json.hpp"

namespace fprk {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTagGallery = fnv1a64("gallery");
constexpr std::uint64_t kTagResample = fnv1a64("resample");

using RecordList = std::vector<const EmbeddingRecord*>;

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

RecordList fetch(const EmbeddingSet& slice, const std::map<std::string, std::vector<std::string>>& lists,
                 const std::set<std::string>* subjects, const char* what) {
  RecordList out;
  for (const auto& [subject, ids] : lists) {
    if (subjects != nullptr && !subjects->contains(subject)) continue;
    for (const auto& id : ids) {
      const auto* r = slice.find(id);
      if (r == nullptr)
        throw ValidationError(std::string("gallery spec ") + what + " id '" + id +
                              "' is not in the evaluated set");
      if (!is_real(r->role))
        throw ValidationError(std::string("gallery spec ") + what + " id '" + id +
                              "' is not a real-image record");
      out.push_back(r);
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::map<std::string, std::string> load_prompt_pairs(const EvalConfig& config) {
  std::map<std::string, std::string> pairs;
  if (config.prompt_pairs.empty()) return pairs;
  const auto path = config.resolve(config.prompt_pairs);
  try {
    const json doc = json::parse(read_file(path));
    for (const auto& [gen, prompt] : doc.items()) pairs[gen] = prompt.get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError("prompt pairs '" + path.string() + "': " + e.what());
  }
  return pairs;
}

EvalOptions make_options(const EvalConfig& config, Exec exec) {
  EvalOptions opt;
  opt.metrics = config.metrics;
  opt.prompt_pairs = load_prompt_pairs(config);
  opt.config_fingerprint = config.fingerprint();
  opt.exec = exec;
  return opt;
}

std::vector<std::string> image_variants(const EmbeddingSet& set) {
  std::set<std::string> v;
  for (const auto& r : set.records())
    if (r.role != Role::prompt) v.insert(r.variant);
  return {v.begin(), v.end()};
}

std::string primary_variant(const std::vector<std::string>& variants) {
  if (variants.empty()) throw ValidationError("no image records to evaluate");
  return std::find(variants.begin(), variants.end(), "default") != variants.end() ? "default"
                                                                                 : variants.front();
}

std::vector<std::string> selected_variants(const EvalConfig& config, const EmbeddingSet& set) {
  auto found = image_variants(set);
  if (config.variants.empty()) return found;
  for (const auto& v : config.variants)
    if (std::find(found.begin(), found.end(), v) == found.end())
      throw ValidationError("variant '" + v + "' not present in the loaded sets");
  return config.variants;
}

std::vector<std::string> selected_methods(const std::vector<std::string>& wanted,
                                          const EmbeddingSet& set) {
  const auto found = set.methods();
  if (wanted.empty()) return found;
  return wanted;
}

json pairwise_to_json(const PairwiseSummary& p) {
  json subjects = json::array();
  for (const auto& s : p.subjects)
    subjects.push_back({{"subject", s.subject}, {"mean", s.mean}, {"pair_count", s.pair_count}});
  return {{"mode", to_string(p.mode)},
          {"dataset_mean", p.dataset_mean},
          {"pair_mean", p.pair_mean},
          {"pair_count", p.pair_count},
          {"subjects", subjects}};
}

json result_to_json(const RunResult& r) {
  json per_subject = json::array();
  for (const auto& s : r.per_subject)
    per_subject.push_back({{"subject", s.subject},
                           {"queries", s.queries},
                           {"map", s.map},
                           {"top1", s.top1},
                           {"pairwise", s.pairwise}});
  json per_query = json::array();
  for (const auto& q : r.per_query)
    per_query.push_back({{"query", q.query_id},
                         {"subject", q.subject},
                         {"ap", q.ap},
                         {"relevant", q.relevant_count},
                         {"first_relevant_rank", q.first_relevant_rank}});
  json out = {{"dataset", r.key.dataset},
              {"encoder", r.key.encoder},
              {"method", r.key.method},
              {"variant", r.key.variant},
              {"map_per_query", r.map_per_query},
              {"map_per_subject", r.map_per_subject},
              {"top1_accuracy", r.top1_accuracy},
              {"pairwise", pairwise_to_json(r.pairwise)},
              {"query_count", r.query_count},
              {"gallery",
               {{"subjects", r.gallery.subjects},
                {"images", r.gallery.images},
                {"reference_images", r.gallery.reference_images},
                {"strategy", to_string(r.gallery.strategy)},
                {"fingerprint", to_hex64(r.gallery.fingerprint)}}},
              {"config_fingerprint", to_hex64(r.config_fingerprint)},
              {"per_subject", per_subject},
              {"per_query", per_query}};
  out["text_adherence"] = r.text_adherence ? json(*r.text_adherence) : json(nullptr);
  return out;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used, 16);
  if (used != s.size()) throw ParseError("bad hex value '" + s + "'");
  return v;
}

RunResult result_from_json(const json& j) {
  RunResult r;
  r.key = {j.at("dataset").get<std::string>(), j.at("encoder").get<std::string>(),
           j.at("method").get<std::string>(), j.at("variant").get<std::string>()};
  r.map_per_query = j.at("map_per_query").get<double>();
  r.map_per_subject = j.at("map_per_subject").get<double>();
  r.top1_accuracy = j.at("top1_accuracy").get<double>();
  const auto& p = j.at("pairwise");
  r.pairwise.mode = parse_pairwise_mode(p.at("mode").get<std::string>());
  r.pairwise.dataset_mean = p.at("dataset_mean").get<double>();
  r.pairwise.pair_mean = p.at("pair_mean").get<double>();
  r.pairwise.pair_count = p.at("pair_count").get<std::size_t>();
  for (const auto& s : p.at("subjects"))
    r.pairwise.subjects.push_back({s.at("subject").get<std::string>(), r.pairwise.mode,
                                   s.at("mean").get<double>(), s.at("pair_count").get<std::size_t>()});
  r.query_count = j.at("query_count").get<std::size_t>();
  const auto& g = j.at("gallery");
  r.gallery.subjects = g.at("subjects").get<std::size_t>();
  r.gallery.images = g.at("images").get<std::size_t>();
  r.gallery.reference_images = g.at("reference_images").get<std::size_t>();
  r.gallery.strategy = parse_strategy(g.at("strategy").get<std::string>());
  r.gallery.fingerprint = parse_hex64(g.at("fingerprint").get<std::string>());
  r.config_fingerprint = parse_hex64(j.at("config_fingerprint").get<std::string>());
  if (!j.at("text_adherence").is_null()) r.text_adherence = j.at("text_adherence").get<double>();
  for (const auto& s : j.at("per_subject"))
    r.per_subject.push_back({s.at("subject").get<std::string>(), s.at("queries").get<std::size_t>(),
                             s.at("map").get<double>(), s.at("top1").get<double>(),
                             s.at("pairwise").get<double>()});
  for (const auto& q : j.at("per_query"))
    r.per_query.push_back({q.at("query").get<std::string>(), q.at("subject").get<std::string>(),
                           q.at("ap").get<double>(), q.at("relevant").get<std::size_t>(),
                           q.at("first_relevant_rank").get<std::size_t>()});
  return r;
}

}  // namespace

std::string_view to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::oracle: return "oracle";
    case EvalMode::generated: return "generated";
    case EvalMode::both: return "both";
  }
  return "both";
}

EvalMode parse_eval_mode(std::string_view token) {
  for (auto m : {EvalMode::oracle, EvalMode::generated, EvalMode::both})
    if (to_string(m) == token) return m;
  throw ValidationError("unknown mode '" + std::string(token) + "'");
}

std::string_view to_string(Scale scale) { return scale == Scale::fraction ? "fraction" : "percent"; }

Scale parse_scale(std::string_view token) {
  if (token == "fraction") return Scale::fraction;
  if (token == "percent") return Scale::percent;
  throw ValidationError("unknown scale '" + std::string(token) + "'");
}

std::filesystem::path EvalConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

std::string EvalConfig::to_json() const {
  json sets_json = json::array();
  for (const auto& s : sets) {
    json e = {{"path", s.path.generic_string()}, {"dataset", s.dataset}};
    e["format"] = s.format ? json(std::string(fprk::to_string(*s.format))) : json(nullptr);
    sets_json.push_back(e);
  }
  json g;
  switch (gallery.kind) {
    case GallerySource::Kind::roles: g = {{"source", "roles"}}; break;
    case GallerySource::Kind::file: g = {{"source", "file"}, {"path", gallery.path.generic_string()}}; break;
    case GallerySource::Kind::split:
      g = {{"source", "split"},
           {"reference_count", gallery.split.reference_count},
           {"gallery_count", gallery.split.gallery_count},
           {"subject_limit", gallery.split.subject_limit},
           {"strategy", fprk::to_string(gallery.split.strategy)},
           {"cap_to_available", gallery.split.cap_to_available},
           {"curated_list", gallery.split.curated_list.generic_string()}};
      break;
  }
  const json doc = {{"sets", sets_json},
                    {"encoders", encoders},
                    {"methods", methods},
                    {"variants", variants},
                    {"gallery", g},
                    {"metrics",
                     {{"aggregation", fprk::to_string(metrics.aggregation)},
                      {"pairwise_mode", fprk::to_string(metrics.pairwise_mode)},
                      {"scale", fprk::to_string(metrics.scale)}}},
                    {"prompt_pairs", prompt_pairs.generic_string()},
                    {"seed", seed},
                    {"mode", fprk::to_string(mode)}};
  return doc.dump();
}

std::uint64_t EvalConfig::fingerprint() const { return fnv1a64(to_json()); }

EvalConfig eval_config_from_json(std::string_view text, const std::filesystem::path& base_dir) {
  EvalConfig c;
  c.base_dir = base_dir;
  try {
    const json doc = json::parse(text);
    for (const auto& s : doc.at("sets")) {
      SetSource src;
      if (s.is_string()) {
        src.path = s.get<std::string>();
      } else {
        src.path = s.at("path").get<std::string>();
        if (s.contains("format") && !s.at("format").is_null())
          src.format = parse_format(s.at("format").get<std::string>());
        src.dataset = s.value("dataset", "");
      }
      c.sets.push_back(std::move(src));
    }
    c.encoders = doc.value("encoders", std::vector<std::string>{});
    c.methods = doc.value("methods", std::vector<std::string>{});
    c.variants = doc.value("variants", std::vector<std::string>{});
    if (doc.contains("gallery")) {
      const auto& g = doc.at("gallery");
      const auto source = g.value("source", "roles");
      if (source == "roles") {
        c.gallery.kind = GallerySource::Kind::roles;
      } else if (source == "file") {
        c.gallery.kind = GallerySource::Kind::file;
        c.gallery.path = g.at("path").get<std::string>();
      } else if (source == "split") {
        c.gallery.kind = GallerySource::Kind::split;
        auto& sp = c.gallery.split;
        sp.reference_count = g.value("reference_count", sp.reference_count);
        sp.gallery_count = g.value("gallery_count", sp.gallery_count);
        sp.subject_limit = g.value("subject_limit", sp.subject_limit);
        sp.strategy = parse_strategy(g.value("strategy", "random"));
        sp.cap_to_available = g.value("cap_to_available", false);
        sp.curated_list = g.value("curated_list", "");
      } else {
        throw ValidationError("unknown gallery source '" + source + "'");
      }
    }
    if (doc.contains("metrics")) {
      const auto& m = doc.at("metrics");
      c.metrics.aggregation = parse_aggregation(m.value("aggregation", "per-query"));
      c.metrics.pairwise_mode = parse_pairwise_mode(m.value("pairwise_mode", "vs-reference"));
      c.metrics.scale = parse_scale(m.value("scale", "fraction"));
    }
    c.prompt_pairs = doc.value("prompt_pairs", "");
    c.seed = doc.value("seed", std::uint64_t{0});
    c.mode = parse_eval_mode(doc.value("mode", "both"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
  if (c.sets.empty()) throw ValidationError("run config: no sets listed");
  return c;
}

EvalConfig load_eval_config(const std::filesystem::path& path) {
  return eval_config_from_json(read_file(path), path.parent_path());
}

std::vector<EvalGroup> load_groups(const EvalConfig& config) {
  std::map<std::pair<std::string, std::string>, std::optional<EmbeddingSet>> groups;
  for (const auto& src : config.sets) {
    const auto path = config.resolve(src.path);
    if (!std::filesystem::exists(path)) throw IoError("set file not found: '" + path.string() + "'");
    auto set = load_set(path, src.format.value_or(format_from_extension(path)), src.dataset);
    if (!config.encoders.empty() &&
        std::find(config.encoders.begin(), config.encoders.end(), set.encoder()) ==
            config.encoders.end())
      continue;
    auto& slot = groups[{set.name(), set.encoder()}];
    slot = slot ? merge(*slot, set) : std::move(set);
  }
  if (groups.empty()) throw ValidationError("no sets match the configured encoders");
  std::vector<EvalGroup> out;
  for (auto& [key, set] : groups) out.push_back({key.first, std::move(*set)});
  return out;
}

std::string base_id(const EmbeddingRecord& record) {
  const std::string suffix = "@" + record.variant;
  if (record.id.size() > suffix.size() && record.id.ends_with(suffix))
    return record.id.substr(0, record.id.size() - suffix.size());
  return record.id;
}

EmbeddingSet variant_slice(const EmbeddingSet& set, const std::string& variant) {
  std::vector<EmbeddingRecord> out;
  for (const auto& r : set.records()) {
    if (r.role == Role::prompt) {
      out.push_back(r);
    } else if (r.variant == variant) {
      out.push_back(r);
      out.back().id = base_id(r);
    }
  }
  return EmbeddingSet::create(std::move(out), set.name());
}

GallerySpec resolve_gallery(const EvalConfig& config, const EmbeddingSet& slice) {
  switch (config.gallery.kind) {
    case GallerySource::Kind::roles:
      return gallery_from_roles(slice);
    case GallerySource::Kind::file: {
      const auto path = config.resolve(config.gallery.path);
      if (!std::filesystem::exists(path))
        throw IoError("gallery spec file not found: '" + path.string() + "'");
      return load_gallery_spec(path);
    }
    case GallerySource::Kind::split: {
      SplitConfig sc = config.gallery.split;
      sc.seed = config.seed;
      if (!sc.curated_list.empty()) sc.curated_list = config.resolve(sc.curated_list);
      return split_reference_gallery(slice, sc);
    }
  }
  throw ValidationError("unknown gallery source");
}

RunResult evaluate_queries(const EmbeddingSet& slice, const GallerySpec& spec, const RunKey& key,
                           const EvalOptions& opt, bool oracle,
                           const std::vector<std::string>& query_subjects) {
  const std::set<std::string> wanted(query_subjects.begin(), query_subjects.end());
  const auto keep = [&](const std::string& s) { return wanted.empty() || wanted.contains(s); };

  RecordList gallery = fetch(slice, spec.gallery, nullptr, "gallery");
  if (gallery.empty()) throw ValidationError("gallery spec selects no gallery images");
  RecordList queries;
  if (oracle) {
    for (const auto* r : fetch(slice, spec.reference, nullptr, "reference"))
      if (keep(r->subject)) queries.push_back(r);
    if (queries.empty()) throw ValidationError("oracle evaluation: no reference records to query with");
  } else {
    for (std::size_t i : slice.indices(Role::generated))
      if (slice[i].method == key.method && keep(slice[i].subject)) queries.push_back(&slice[i]);
    if (queries.empty())
      throw ValidationError("method '" + key.method + "' has zero generated records");
  }

  const GalleryIndex index(gallery);
  std::set<std::string> subjects;
  std::vector<std::string> unmatched;
  for (const auto* q : queries) {
    if (subjects.insert(q->subject).second && index.count(q->subject) == 0)
      unmatched.push_back(q->subject);
  }
  if (!unmatched.empty())
    throw ValidationError("query subjects without gallery records: " + join(unmatched));

  RunResult res;
  res.key = key;
  res.per_query = score_queries(queries, index, opt.exec);
  std::sort(res.per_query.begin(), res.per_query.end(),
            [](const ApResult& a, const ApResult& b) { return a.query_id < b.query_id; });
  res.query_count = res.per_query.size();
  res.map_per_query = mean_average_precision(res.per_query, Aggregation::per_query);
  res.map_per_subject = mean_average_precision(res.per_query, Aggregation::per_subject_macro);
  res.top1_accuracy = top1_identity_accuracy(res.per_query);

  const PairwiseMode mode = oracle ? PairwiseMode::vs_gallery : opt.metrics.pairwise_mode;
  const RecordList real_side = fetch(
      slice, mode == PairwiseMode::vs_reference ? spec.reference : spec.gallery, &subjects,
      mode == PairwiseMode::vs_reference ? "reference" : "gallery");
  res.pairwise = pairwise_similarity_score(real_side, queries, mode, opt.exec);

  if (!oracle && !opt.prompt_pairs.empty()) {
    RecordList prompts;
    for (std::size_t i : slice.indices(Role::prompt)) prompts.push_back(&slice[i]);
    res.text_adherence = text_adherence_score(prompts, queries, opt.prompt_pairs);
  }

  std::map<std::string, std::vector<const ApResult*>> by_subject;
  for (const auto& q : res.per_query) by_subject[q.subject].push_back(&q);
  std::size_t ps = 0;
  for (const auto& [subject, rows] : by_subject) {
    SubjectBreakdown b;
    b.subject = subject;
    b.queries = rows.size();
    double sum = 0.0;
    std::size_t hits = 0;
    for (const auto* q : rows) {
      sum += q->ap;
      hits += q->first_relevant_rank == 1 ? 1 : 0;
    }
    b.map = sum / static_cast<double>(rows.size());
    b.top1 = static_cast<double>(hits) / static_cast<double>(rows.size());
    while (ps < res.pairwise.subjects.size() && res.pairwise.subjects[ps].subject < subject) ++ps;
    if (ps < res.pairwise.subjects.size() && res.pairwise.subjects[ps].subject == subject)
      b.pairwise = res.pairwise.subjects[ps].mean;
    res.per_subject.push_back(std::move(b));
  }

  res.gallery.subjects = spec.gallery.size();
  res.gallery.images = gallery.size();
  res.gallery.reference_images = spec.reference_size();
  res.gallery.strategy = spec.strategy;
  res.gallery.fingerprint = spec.fingerprint();
  res.config_fingerprint = opt.config_fingerprint;
  return res;
}

RunResult evaluate_oracle(const EmbeddingSet& slice, const GallerySpec& spec, const RunKey& key,
                          const EvalOptions& options) {
  return evaluate_queries(slice, spec, key, options, true);
}

RunResult evaluate_generated(const EmbeddingSet& slice, const GallerySpec& spec, const RunKey& key,
                             const EvalOptions& options) {
  return evaluate_queries(slice, spec, key, options, false);
}

namespace {

std::vector<RunResult> run_modes(const EvalConfig& config, Exec exec, bool oracle, bool generated) {
  const auto opt = make_options(config, exec);
  std::vector<RunResult> out;
  for (const auto& group : load_groups(config)) {
    const auto variants = selected_variants(config, group.set);
    // One spec per group, built from the primary variant and shared by every
    // method and variant.
    const auto spec = resolve_gallery(config, variant_slice(group.set, primary_variant(variants)));
    for (const auto& variant : variants) {
      const auto slice = variant_slice(group.set, variant);
      if (oracle)
        out.push_back(evaluate_oracle(slice, spec, {group.dataset, group.set.encoder(), kOracleMethod, variant},
                                      opt));
      if (generated) {
        const auto methods = selected_methods(config.methods, slice);
        if (methods.empty() && !oracle)
          throw ValidationError("no generated records in dataset '" + group.dataset + "'");
        for (const auto& m : methods)
          out.push_back(evaluate_generated(slice, spec, {group.dataset, group.set.encoder(), m, variant}, opt));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<RunResult> run_oracle_eval(const EvalConfig& config, Exec exec) {
  return run_modes(config, exec, true, false);
}

std::vector<RunResult> run_generated_eval(const EvalConfig& config, Exec exec) {
  return run_modes(config, exec, false, true);
}

std::vector<RunResult> run_eval(const EvalConfig& config, Exec exec) {
  return run_modes(config, exec, config.mode != EvalMode::generated,
                   config.mode != EvalMode::oracle);
}

std::string_view to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::images_per_subject: return "images-per-subject";
    case AblationAxis::subject_count: return "subject-count";
    case AblationAxis::sampling_strategy: return "sampling-strategy";
  }
  return "unknown";
}

AblationAxis parse_ablation_axis(std::string_view token) {
  for (auto a : {AblationAxis::images_per_subject, AblationAxis::subject_count,
                 AblationAxis::sampling_strategy})
    if (to_string(a) == token) return a;
  throw ValidationError("unknown ablation axis '" + std::string(token) + "'");
}

namespace {

std::vector<std::size_t> numeric_values(const AblationOptions& opt) {
  std::vector<std::size_t> out;
  for (const auto& v : opt.values) {
    std::size_t used = 0;
    unsigned long long n = 0;
    try {
      n = std::stoull(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || n == 0)
      throw ValidationError("ablation: grid value '" + v + "' is not a positive integer");
    out.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace

void AblationOptions::validate() const {
  if (values.empty()) throw ValidationError("ablation: empty grid");
  if (seeds.empty()) throw ValidationError("ablation: no repetition seeds");
  if (reference_count == 0 || gallery_count == 0)
    throw ValidationError("ablation: reference and gallery counts must be at least 1");
  if (queries == EvalMode::both) throw ValidationError("ablation: queries must be oracle or generated");
  if (axis == AblationAxis::sampling_strategy) {
    for (const auto& v : values) {
      const auto s = parse_strategy(v);
      if (s != SamplingStrategy::random && s != SamplingStrategy::kmeans)
        throw ValidationError("ablation: sampling axis supports random and kmeans, not '" + v + "'");
    }
    return;
  }
  const auto nums = numeric_values(*this);
  for (std::size_t i = 1; i < nums.size(); ++i)
    if (nums[i] <= nums[i - 1]) throw ValidationError("ablation: grid values must be strictly increasing");
}

AblationGrid run_ablation_sweep(const EmbeddingSet& pool, const AblationOptions& opt,
                                const EvalOptions& eval) {
  opt.validate();
  const bool oracle = opt.queries == EvalMode::oracle;
  const auto methods = oracle ? std::vector<std::string>{} : selected_methods(opt.methods, pool);
  if (!oracle && methods.empty()) throw ValidationError("ablation: pool has no generated records");

  // Real candidates per subject, and which subjects can issue queries.
  std::map<std::string, RecordList> real;
  for (const auto& s : pool.manifest().subjects)
    for (Role role : {Role::reference, Role::gallery})
      for (std::size_t i : pool.indices(s, role)) real[s].push_back(&pool[i]);
  std::vector<std::string> query_subjects, distractor_subjects;
  for (const auto& [s, cands] : real) {
    bool has_queries = oracle;
    if (!oracle)
      for (std::size_t i : pool.indices(s, Role::generated))
        has_queries = has_queries ||
                      std::find(methods.begin(), methods.end(), pool[i].method) != methods.end();
    (has_queries ? query_subjects : distractor_subjects).push_back(s);
  }
  if (query_subjects.empty()) throw ValidationError("ablation: no subject has both queries and real images");

  const bool numeric = opt.axis != AblationAxis::sampling_strategy;
  const auto nums = numeric ? numeric_values(opt) : std::vector<std::size_t>{};
  std::size_t need = opt.reference_count +
                     (opt.axis == AblationAxis::images_per_subject ? nums.back() : opt.gallery_count);
  if (opt.axis == AblationAxis::subject_count && nums.back() > real.size())
    throw ValidationError("ablation: grid exceeds pool (" + std::to_string(nums.back()) +
                          " subjects requested, " + std::to_string(real.size()) + " available)");

  AblationGrid grid;
  grid.axis = opt.axis;
  grid.values = opt.values;
  grid.seeds = opt.seeds;

  for (std::uint64_t seed : opt.seeds) {
    // Per-subject seeded order: reference = first reference_count, the rest is
    // the gallery order whose prefixes give nested galleries.
    std::map<std::string, std::vector<std::string>> reference, rest_order;
    std::map<std::string, RecordList> rest;
    for (const auto& [s, cands] : real) {
      if (cands.size() < need)
        throw ValidationError("ablation: grid exceeds pool: subject '" + s + "' has " +
                              std::to_string(cands.size()) + " real images, needs " +
                              std::to_string(need));
      auto order = random_order(cands, subject_seed(seed, s));
      auto& ref = reference[s];
      ref.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(opt.reference_count));
      rest_order[s].assign(order.begin() + static_cast<std::ptrdiff_t>(opt.reference_count), order.end());
      const std::set<std::string> ref_set(ref.begin(), ref.end());
      for (const auto* r : cands)
        if (!ref_set.contains(r->id)) rest[s].push_back(r);
      std::sort(ref.begin(), ref.end());
    }
    auto subject_sequence = [&](std::uint64_t key) {
      auto seq = subject_order(query_subjects, key);
      const auto tail = subject_order(distractor_subjects, key);
      seq.insert(seq.end(), tail.begin(), tail.end());
      return seq;
    };
    const auto nested_subjects = subject_sequence(seed);

    for (std::size_t vi = 0; vi < opt.values.size(); ++vi) {
      GallerySpec spec;
      spec.seed = seed;
      spec.strategy = SamplingStrategy::random;
      std::vector<std::string> qsubjects;
      auto add_prefix = [&](const std::string& s, std::size_t n) {
        auto ids = std::vector<std::string>(rest_order[s].begin(),
                                            rest_order[s].begin() + static_cast<std::ptrdiff_t>(n));
        std::sort(ids.begin(), ids.end());
        spec.gallery[s] = std::move(ids);
        spec.reference[s] = reference[s];
      };
      switch (opt.axis) {
        case AblationAxis::images_per_subject: {
          const std::size_t n = nums[vi];
          for (const auto& [s, cands] : real) {
            if (opt.full_resample) {
              spec.gallery[s] = sample_random(rest[s], n, derive_key(subject_seed(seed, s), {kTagResample, n}));
              spec.reference[s] = reference[s];
            } else {
              add_prefix(s, n);
            }
          }
          break;
        }
        case AblationAxis::subject_count: {
          const std::size_t m = nums[vi];
          const auto seq = opt.full_resample ? subject_sequence(derive_key(seed, {kTagResample, m}))
                                             : nested_subjects;
          for (std::size_t k = 0; k < m; ++k) add_prefix(seq[k], opt.gallery_count);
          // Nested: queries stay those of the smallest grid cell.
          const std::size_t nq = opt.full_resample ? m : nums.front();
          for (std::size_t k = 0; k < nq && k < seq.size(); ++k)
            if (std::find(query_subjects.begin(), query_subjects.end(), seq[k]) != query_subjects.end())
              qsubjects.push_back(seq[k]);
          if (qsubjects.empty())
            throw ValidationError("ablation: smallest subject-count cell has no query subjects");
          break;
        }
        case AblationAxis::sampling_strategy: {
          spec.strategy = parse_strategy(opt.values[vi]);
          for (const auto& [s, cands] : real) {
            const auto gseed = derive_key(subject_seed(seed, s), {kTagGallery});
            spec.gallery[s] = spec.strategy == SamplingStrategy::kmeans
                                  ? sample_kmeans(rest[s], opt.gallery_count, gseed, eval.exec)
                                  : sample_random(rest[s], opt.gallery_count, gseed);
            spec.reference[s] = reference[s];
          }
          break;
        }
      }
      spec.note = std::string(to_string(opt.axis)) + "=" + opt.values[vi];
      spec.check_disjoint();

      AblationCell cell;
      cell.value = opt.values[vi];
      cell.seed = seed;
      if (oracle) {
        cell.runs.push_back(evaluate_queries(pool, spec, {pool.name(), pool.encoder(), kOracleMethod, ""},
                                             eval, true, qsubjects));
      } else {
        for (const auto& m : methods)
          cell.runs.push_back(
              evaluate_queries(pool, spec, {pool.name(), pool.encoder(), m, ""}, eval, false, qsubjects));
      }
      std::vector<double> maps, sims;
      for (const auto& r : cell.runs) {
        maps.push_back(r.map(opt.metrics.aggregation));
        sims.push_back(r.pairwise.dataset_mean);
      }
      cell.map = mean_of(maps);
      cell.similarity = mean_of(sims);
      grid.cells.push_back(std::move(cell));
    }
  }
  return grid;
}

AblationGrid run_ablation_sweep(const EvalConfig& config, const AblationOptions& options, Exec exec) {
  auto groups = load_groups(config);
  const auto& group = groups.front();
  const auto variants = selected_variants(config, group.set);
  const auto slice = variant_slice(group.set, variants.front());
  auto eval = make_options(config, exec);
  eval.metrics = options.metrics;
  auto grid = run_ablation_sweep(slice, options, eval);
  for (auto& cell : grid.cells)
    for (auto& r : cell.runs) {
      r.key.dataset = group.dataset;
      r.key.variant = variants.front();
    }
  return grid;
}

VariantComparison compare_variants(const EvalConfig& config, const std::string& variant_a,
                                   const std::string& variant_b, Exec exec) {
  if (variant_a == variant_b) throw ValidationError("compare-variants: variants must differ");
  const auto opt = make_options(config, exec);
  VariantComparison cmp;
  cmp.variant_a = variant_a;
  cmp.variant_b = variant_b;
  const bool oracle = config.mode != EvalMode::generated;
  const bool generated = config.mode != EvalMode::oracle;

  for (const auto& group : load_groups(config)) {
    const auto full_a = variant_slice(group.set, variant_a);
    const auto full_b = variant_slice(group.set, variant_b);
    std::set<std::string> ids_a, ids_b;
    for (const auto& r : full_a.records())
      if (r.role != Role::prompt) ids_a.insert(r.id);
    for (const auto& r : full_b.records())
      if (r.role != Role::prompt) ids_b.insert(r.id);
    std::set<std::string> shared;
    for (const auto& id : ids_a) {
      if (ids_b.contains(id))
        shared.insert(id);
      else
        cmp.missing_in_b.push_back(id);
    }
    for (const auto& id : ids_b)
      if (!ids_a.contains(id)) cmp.missing_in_a.push_back(id);
    if (shared.empty())
      throw ValidationError("compare-variants: variants '" + variant_a + "' and '" + variant_b +
                            "' share no ids in dataset '" + group.dataset + "'");
    auto keep = [&](const EmbeddingRecord& r) { return r.role == Role::prompt || shared.contains(r.id); };
    const auto slice_a = full_a.filter(keep);
    const auto slice_b = full_b.filter(keep);
    const auto spec = resolve_gallery(config, slice_a);

    auto run_both = [&](const RunKey& ka, const RunKey& kb, bool as_oracle) {
      auto ra = evaluate_queries(slice_a, spec, ka, opt, as_oracle);
      auto rb = evaluate_queries(slice_b, spec, kb, opt, as_oracle);
      MetricDelta d;
      d.key = ka;
      d.key.variant = variant_a + "->" + variant_b;
      d.map_per_query = rb.map_per_query - ra.map_per_query;
      d.map_per_subject = rb.map_per_subject - ra.map_per_subject;
      d.pairwise = rb.pairwise.dataset_mean - ra.pairwise.dataset_mean;
      d.top1 = rb.top1_accuracy - ra.top1_accuracy;
      if (ra.text_adherence && rb.text_adherence) d.text_adherence = *rb.text_adherence - *ra.text_adherence;
      cmp.a.push_back(std::move(ra));
      cmp.b.push_back(std::move(rb));
      cmp.deltas.push_back(std::move(d));
    };
    const std::string enc = group.set.encoder();
    if (oracle)
      run_both({group.dataset, enc, kOracleMethod, variant_a}, {group.dataset, enc, kOracleMethod, variant_b},
               true);
    if (generated)
      for (const auto& m : selected_methods(config.methods, slice_a))
        run_both({group.dataset, enc, m, variant_a}, {group.dataset, enc, m, variant_b}, false);
  }
  return cmp;
}

std::string run_results_to_json(const std::vector<RunResult>& results) {
  json arr = json::array();
  for (const auto& r : results) arr.push_back(result_to_json(r));
  return json({{"results", arr}}).dump(2) + "\n";
}

std::vector<RunResult> run_results_from_json(std::string_view text) {
  std::vector<RunResult> out;
  try {
    const json doc = json::parse(text);
    for (const auto& r : doc.at("results")) out.push_back(result_from_json(r));
  } catch (const json::exception& e) {
    throw ParseError(std::string("results: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("results: bad number: ") + e.what());
  }
  return out;
}

std::string ablation_grid_to_json(const AblationGrid& grid) {
  json cells = json::array();
  for (const auto& c : grid.cells) {
    json runs = json::array();
    for (const auto& r : c.runs) runs.push_back(result_to_json(r));
    cells.push_back({{"value", c.value}, {"seed", c.seed}, {"map", c.map},
                     {"similarity", c.similarity}, {"runs", runs}});
  }
  return json({{"axis", to_string(grid.axis)}, {"values", grid.values}, {"seeds", grid.seeds},
               {"cells", cells}})
             .dump(2) +
         "\n";
}

std::string variant_comparison_to_json(const VariantComparison& cmp) {
  json deltas = json::array();
  for (const auto& d : cmp.deltas) {
    json e = {{"dataset", d.key.dataset}, {"encoder", d.key.encoder}, {"method", d.key.method},
              {"variants", d.key.variant}, {"map_per_query", d.map_per_query},
              {"map_per_subject", d.map_per_subject}, {"pairwise", d.pairwise}, {"top1", d.top1}};
    e["text_adherence"] = d.text_adherence ? json(*d.text_adherence) : json(nullptr);
    deltas.push_back(e);
  }
  json a = json::array(), b = json::array();
  for (const auto& r : cmp.a) a.push_back(result_to_json(r));
  for (const auto& r : cmp.b) b.push_back(result_to_json(r));
  return json({{"variant_a", cmp.variant_a},
               {"variant_b", cmp.variant_b},
               {"deltas", deltas},
               {"missing_in_a", cmp.missing_in_a},
               {"missing_in_b", cmp.missing_in_b},
               {"results_a", a},
               {"results_b", b}})
             .dump(2) +
         "\n";
}

}  // namespace fprk
