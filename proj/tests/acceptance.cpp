// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Every tolerance and frozen fixture is pinned below.
//
// `--expect-red a,b` names criteria known to fail; the exit status is then 0
// only when exactly that set fails. FAIL lines are printed either way.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fprk/embstore.hpp"
#include "fprk/engine.hpp"
#include "fprk/fileio.hpp"
#include "fprk/kmeans.hpp"
#include "fprk/metrics.hpp"
#include "fprk/report.hpp"
#include "fprk/rng.hpp"
#include "fprk/synth.hpp"
#include "table1_fixture.hpp"

namespace fs = std::filesystem;
using namespace fprk;

namespace {

// ---- pinned tolerances and budgets ----
constexpr double kApTolerance = 1e-12;
constexpr double kRankSimTolerance = 1e-6;
constexpr double kDriftMapAtZero = 0.99;
constexpr double kDriftFixtureTolerance = 0.02;
constexpr double kSamplingParity = 0.02;
constexpr double kKMeansOptimumShare = 0.95;
constexpr double kKMeansOptimumRelTol = 1e-9;

// Frozen 30-seed mean mAP per drift level (default SynthConfig, generated
// queries, role galleries), recorded from the synthetic oracle.
constexpr std::array<double, 5> kDriftGrid = {0.0, 0.25, 0.5, 0.75, 1.0};
constexpr std::array<double, 5> kDriftMapFixture = {0.99999999999999989, 0.99993754467754459, 0.33129712366809860,
                                                    0.32964441443180637, 0.17258425859805140};

constexpr std::size_t kSeeds = 30;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::set<std::string> failed;

void report(const std::string& name, const std::function<Outcome()>& fn, double budget_s) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += " [over budget " + std::to_string(budget_s) + " s]";
  }
  if (!o.pass) failed.insert(name);
  char t[32];
  std::snprintf(t, sizeof(t), "%.2f s", secs);
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << t << "): " << o.detail << std::endl;
}

std::string fmt(double v, int digits = 6) {
  char b[64];
  std::snprintf(b, sizeof(b), "%.*f", digits, v);
  return b;
}

std::string sci(double v) {
  char b[64];
  std::snprintf(b, sizeof(b), "%.3g", v);
  return b;
}

EmbeddingRecord make(std::string id, std::string subject, Role role, std::vector<float> v) {
  EmbeddingRecord r;
  r.id = std::move(id);
  r.subject = std::move(subject);
  r.role = role;
  r.encoder = "e";
  r.method = role == Role::generated ? "m" : "";
  r.vector = std::move(v);
  return r;
}

std::vector<float> random_vec(CounterRng& rng, std::size_t dim, bool coarse) {
  std::vector<float> v(dim);
  do {
    for (auto& x : v)
      x = coarse ? static_cast<float>(static_cast<int>(rng.next_below(5)) - 2)
                 : static_cast<float>(rng.next_gaussian());
  } while (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; }));
  return v;
}

// Random labeled gallery with at least one item of the query subject.
struct Instance {
  std::vector<EmbeddingRecord> gallery;
  EmbeddingRecord query;
};

Instance random_instance(std::uint64_t seed, std::size_t max_gallery, std::size_t max_dim) {
  CounterRng rng(derive_key(seed, {0x696e7374}));
  const std::size_t n = 1 + rng.next_below(max_gallery);
  const std::size_t dim = 1 + rng.next_below(max_dim);
  const bool coarse = rng.next_below(2) == 0;  // small integer grids produce exact ties
  Instance inst;
  for (std::size_t i = 0; i < n; ++i)
    inst.gallery.push_back(make("g" + std::to_string(rng.next_below(1000)) + "-" + std::to_string(i),
                                "s" + std::to_string(rng.next_below(4)), Role::gallery,
                                random_vec(rng, dim, coarse)));
  inst.query = make("q", inst.gallery[rng.next_below(n)].subject, Role::generated, random_vec(rng, dim, coarse));
  return inst;
}

std::vector<const EmbeddingRecord*> ptrs(const std::vector<EmbeddingRecord>& rs) {
  std::vector<const EmbeddingRecord*> out;
  for (const auto& r : rs) out.push_back(&r);
  return out;
}

double engine_ap(const Instance& inst) {
  const GalleryIndex index(ptrs(inst.gallery));
  return average_precision(rank_gallery(inst.query, index)).ap;
}

// ---------------------------------------------------------------------------

Outcome ap_oracle_equivalence() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto inst = random_instance(s, 20, 8);
    std::vector<double> sims;
    std::vector<std::string> ids;
    std::vector<std::uint8_t> rel;
    for (const auto& g : inst.gallery) {
      sims.push_back(cosine(inst.query.vector, g.vector));
      ids.push_back(g.id);
      rel.push_back(g.subject == inst.query.subject);
    }
    worst = std::max(worst, std::abs(engine_ap(inst) - brute_force_ap(sims, ids, rel)));
  }
  return {worst <= kApTolerance, "1000 instances, max |delta| = " + sci(worst)};
}

Outcome distractor_monotonicity() {
  std::size_t violations = 0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    auto inst = random_instance(s + 10000, 19, 8);
    const double before = engine_ap(inst);
    CounterRng rng(derive_key(s, {0x64697374}));
    const std::size_t dim = inst.query.vector.size();
    inst.gallery.push_back(make("d" + std::to_string(rng.next_below(1000)), "distractor", Role::gallery,
                                random_vec(rng, dim, rng.next_below(2) == 0)));
    if (engine_ap(inst) > before) ++violations;
  }
  return {violations == 0, "500 cases, " + std::to_string(violations) + " increases"};
}

// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
std::vector<double> random_orthogonal(std::size_t d, CounterRng& rng) {
  std::vector<double> q(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (;;) {
      for (std::size_t j = 0; j < d; ++j) q[i * d + j] = rng.next_gaussian();
      for (std::size_t k = 0; k < i; ++k) {
        double dot = 0;
        for (std::size_t j = 0; j < d; ++j) dot += q[i * d + j] * q[k * d + j];
        for (std::size_t j = 0; j < d; ++j) q[i * d + j] -= dot * q[k * d + j];
      }
      double n = 0;
      for (std::size_t j = 0; j < d; ++j) n += q[i * d + j] * q[i * d + j];
      n = std::sqrt(n);
      if (n < 1e-6) continue;
      for (std::size_t j = 0; j < d; ++j) q[i * d + j] /= n;
      break;
    }
  }
  return q;
}

std::vector<float> rotate(const std::vector<double>& q, const std::vector<float>& v) {
  const std::size_t d = v.size();
  std::vector<float> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < d; ++j) acc += q[i * d + j] * v[j];
    out[i] = static_cast<float>(acc);
  }
  return out;
}

Outcome ranking_invariance() {
  std::size_t order_changes = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    CounterRng rng(derive_key(s, {0x726f74}));
    const std::size_t n = 5 + rng.next_below(16), dim = 2 + rng.next_below(15);
    std::vector<EmbeddingRecord> gallery;
    for (std::size_t i = 0; i < n; ++i)
      gallery.push_back(make("g" + std::to_string(i), "s" + std::to_string(i % 3), Role::gallery,
                             random_vec(rng, dim, false)));
    auto query = make("q", "s0", Role::generated, random_vec(rng, dim, false));
    const auto base = rank_gallery(query, GalleryIndex(ptrs(gallery)));

    auto compare = [&](const RankedList& other) {
      for (std::size_t i = 0; i < n; ++i) {
        if (other.items[i].id != base.items[i].id) {
          ++order_changes;
          return;
        }
        worst = std::max(worst, std::abs(other.items[i].similarity - base.items[i].similarity));
      }
    };

    // Positive scaling of one gallery vector, then of the query.
    auto scaled = gallery;
    const float c = static_cast<float>(0.1 + 10.0 * rng.next_unit());
    for (auto& x : scaled[rng.next_below(n)].vector) x *= c;
    compare(rank_gallery(query, GalleryIndex(ptrs(scaled))));
    auto scaled_query = query;
    for (auto& x : scaled_query.vector) x *= c;
    compare(rank_gallery(scaled_query, GalleryIndex(ptrs(gallery))));

    // Common orthogonal transform.
    const auto q = random_orthogonal(dim, rng);
    auto rotated = gallery;
    for (auto& g : rotated) g.vector = rotate(q, g.vector);
    auto rotated_query = query;
    rotated_query.vector = rotate(q, query.vector);
    compare(rank_gallery(rotated_query, GalleryIndex(ptrs(rotated))));
  }
  return {order_changes == 0 && worst <= kRankSimTolerance,
          "200 cases, " + std::to_string(order_changes) + " order changes, max sim delta " + sci(worst)};
}

Outcome pairwise_gallery_independence() {
  SynthConfig cfg;
  cfg.identities = 10;
  cfg.drift = 0.3;
  cfg.seed = 21;
  const auto pool = generate_synthetic_dataset(cfg);
  AblationOptions opt;
  opt.axis = AblationAxis::subject_count;
  opt.values = {"2", "5", "10"};
  opt.queries = EvalMode::generated;
  opt.metrics.pairwise_mode = PairwiseMode::vs_reference;
  EvalOptions eval;
  eval.metrics = opt.metrics;
  const auto grid = run_ablation_sweep(pool, opt, eval);
  const auto& r2 = grid.cells[0].runs[0];
  bool same = true;
  std::string sizes;
  for (const auto& cell : grid.cells) {
    const auto& r = cell.runs[0];
    sizes += std::to_string(r.gallery.subjects) + " ";
    same = same && std::memcmp(&r.pairwise.dataset_mean, &r2.pairwise.dataset_mean, sizeof(double)) == 0 &&
           std::memcmp(&r.pairwise.pair_mean, &r2.pairwise.pair_mean, sizeof(double)) == 0 &&
           r.query_count == r2.query_count;
  }
  const bool sizes_ok = grid.cells[0].runs[0].gallery.subjects == 2 && grid.cells[1].runs[0].gallery.subjects == 5 &&
                        grid.cells[2].runs[0].gallery.subjects == 10;
  return {same && sizes_ok, "gallery subjects {" + sizes + "}, vs-reference score " +
                                fmt(r2.pairwise.dataset_mean, 17) + (same ? " bit-identical" : " differs")};
}

struct DriftPoint {
  double map = 0.0;
  double sim = 0.0;
};

Outcome drift_sensitivity() {
  std::array<DriftPoint, 5> mean{};
  for (std::size_t di = 0; di < kDriftGrid.size(); ++di) {
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      SynthConfig cfg;  // 10 identities x 10 gallery, d = 512, noise 0.05
      cfg.seed = seed;
      cfg.drift = kDriftGrid[di];
      const auto set = generate_synthetic_dataset(cfg);
      EvalOptions eval;
      eval.metrics.pairwise_mode = PairwiseMode::vs_reference;
      const auto r = evaluate_generated(set, gallery_from_roles(set), {"synth", cfg.encoder, cfg.method, "default"},
                                        eval);
      mean[di].map += r.map_per_query / kSeeds;
      mean[di].sim += r.pairwise.dataset_mean / kSeeds;
    }
  }
  bool decreasing = true, fixtures = true;
  std::string maps, sims;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (i > 0 && !(mean[i].map < mean[i - 1].map)) decreasing = false;
    if (std::abs(mean[i].map - kDriftMapFixture[i]) > kDriftFixtureTolerance) fixtures = false;
    maps += fmt(mean[i].map, 4) + " ";
    sims += fmt(mean[i].sim, 4) + " ";
  }
  const double sim_drop = (mean[0].sim - mean[2].sim) / mean[0].sim;
  const double map_drop = (mean[0].map - mean[2].map) / mean[0].map;
  const bool ok = decreasing && mean[0].map >= kDriftMapAtZero && sim_drop < map_drop && fixtures;
  return {ok, "mAP {" + maps + "} sim {" + sims + "} rel drop sim " + fmt(sim_drop, 3) + " < mAP " +
                  fmt(map_drop, 3) + (decreasing ? "" : " [not strictly decreasing]") +
                  (fixtures ? "" : " [fixture mismatch]")};
}

// Shared pool for the gallery-composition analogues: generated queries
// drifted toward a look-alike identity so mAP is informative (not saturated).
SynthConfig composition_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.identities = 10;
  cfg.reference_per_id = 5;
  cfg.gallery_per_id = 30;
  cfg.generated_per_id = 5;
  cfg.dim = 512;
  cfg.noise = 0.05;
  cfg.drift = 0.4;
  cfg.seed = seed;
  return cfg;
}

Outcome sampling_parity() {
  double random_map = 0, kmeans_map = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto pool = generate_synthetic_dataset(composition_config(seed));
    AblationOptions opt;
    opt.axis = AblationAxis::sampling_strategy;
    opt.values = {"random", "kmeans"};
    opt.seeds = {seed};
    opt.queries = EvalMode::generated;
    opt.gallery_count = 10;
    const auto grid = run_ablation_sweep(pool, opt, EvalOptions{});
    random_map += grid.cells[0].map / kSeeds;
    kmeans_map += grid.cells[1].map / kSeeds;
  }
  const double delta = std::abs(random_map - kmeans_map);
  return {delta <= kSamplingParity, "mAP random " + fmt(random_map, 4) + ", kmeans " + fmt(kmeans_map, 4) +
                                        ", |delta| " + fmt(delta, 4)};
}

Outcome subject_count_difficulty() {
  std::array<double, 3> mean{};
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto pool = generate_synthetic_dataset(composition_config(seed));
    AblationOptions opt;
    opt.axis = AblationAxis::subject_count;
    opt.values = {"2", "5", "10"};
    opt.seeds = {seed};
    opt.queries = EvalMode::generated;
    opt.gallery_count = 10;
    const auto grid = run_ablation_sweep(pool, opt, EvalOptions{});
    for (std::size_t i = 0; i < 3; ++i) mean[i] += grid.cells[i].map / kSeeds;
  }
  const bool ok = mean[0] > mean[1] && mean[1] > mean[2];
  return {ok, "mAP at 2/5/10 subjects: " + fmt(mean[0], 4) + " " + fmt(mean[1], 4) + " " + fmt(mean[2], 4)};
}

// Minimum 2-cluster inertia by enumerating every bipartition.
double best_bipartition(const std::vector<double>& pts, std::size_t dim) {
  const std::size_t n = pts.size() / dim;
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    std::vector<double> sum(2 * dim, 0.0);
    double count[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned g = (mask >> i) & 1u;
      count[g] += 1;
      for (std::size_t j = 0; j < dim; ++j) sum[g * dim + j] += pts[i * dim + j];
    }
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned g = (mask >> i) & 1u;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = pts[i * dim + j] - sum[g * dim + j] / count[g];
        inertia += d * d;
      }
    }
    best = std::min(best, inertia);
  }
  return best;
}

Outcome kmeans_properties() {
  std::size_t monotone_violations = 0, nondeterministic = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    CounterRng rng(derive_key(s, {0x6b6d}));
    const std::size_t n = 10 + rng.next_below(200), dim = 1 + rng.next_below(16);
    const std::size_t k = 1 + rng.next_below(std::min<std::size_t>(n, 12));
    std::vector<double> pts(n * dim);
    for (auto& x : pts) x = rng.next_gaussian() + 4.0 * static_cast<double>(rng.next_below(3));
    KMeansOptions opt;
    opt.k = k;
    opt.seed = s;
    const auto r = kmeans(pts, dim, opt);
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
      if (r.inertia_history[i] > r.inertia_history[i - 1]) ++monotone_violations;
    if (!(kmeans(pts, dim, opt) == r)) ++nondeterministic;
  }
  std::size_t matched = 0;
  const std::size_t trials = 200;
  for (std::uint64_t s = 0; s < trials; ++s) {
    CounterRng rng(derive_key(s, {0x6f7074}));
    const std::size_t n = 3 + rng.next_below(6), dim = 1 + rng.next_below(3);
    std::vector<double> pts(n * dim);
    for (auto& x : pts) x = rng.next_gaussian();
    KMeansOptions opt;
    opt.k = 2;
    opt.seed = s;
    const double best = best_bipartition(pts, dim);
    if (kmeans(pts, dim, opt).inertia <= best * (1 + kKMeansOptimumRelTol) + 1e-12) ++matched;
  }
  const double share = static_cast<double>(matched) / trials;
  return {monotone_violations == 0 && nondeterministic == 0 && share >= kKMeansOptimumShare,
          "200 runs: " + std::to_string(monotone_violations) + " inertia increases, " +
              std::to_string(nondeterministic) + " nondeterministic; optimum matched " + std::to_string(matched) +
              "/" + std::to_string(trials) + " (" + fmt(100.0 * share, 1) + "%, need " +
              fmt(100.0 * kKMeansOptimumShare, 0) + "%)"};
}

Outcome format_round_trip() {
  CounterRng rng(4242);
  std::vector<EmbeddingRecord> rs;
  for (std::size_t i = 0; i < 10000; ++i) {
    const Role role = static_cast<Role>(i % 4);
    auto r = make("rec-" + std::to_string(i), "subj-" + std::to_string(i % 97), role, random_vec(rng, 32, false));
    r.variant = i % 3 == 0 ? "bg-removed" : "default";
    if (role == Role::generated) r.method = "method-" + std::to_string(i % 5);
    for (auto& x : r.vector) x *= static_cast<float>(std::ldexp(1.0, static_cast<int>(rng.next_below(40)) - 20));
    rs.push_back(std::move(r));
  }
  const auto set = EmbeddingSet::create(rs);
  const auto jsonl = encode_jsonl(set.records());
  const auto bin = encode_binary(decode_jsonl(jsonl), set.dimension());
  const auto back = decode_jsonl(encode_jsonl(decode_binary(bin)));
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& a = back[i];
    const auto& b = set[i];
    if (a.id != b.id || a.subject != b.subject || a.role != b.role || a.encoder != b.encoder ||
        a.variant != b.variant || a.method != b.method ||
        std::memcmp(a.vector.data(), b.vector.data(), a.vector.size() * sizeof(float)) != 0)
      ++mismatches;
  }
  const bool ok = back.size() == set.size() && mismatches == 0 && encode_jsonl(back) == jsonl;
  return {ok, "10000 records JSONL->binary->JSONL, " + std::to_string(mismatches) + " mismatches"};
}

Outcome report_golden() {
  const auto [schema, rows] = fprk::testing::table1_fixture();
  const auto csv = emit_csv(rows, schema);
  const bool golden = csv == read_file(FPRK_GOLDEN_DIR "/table1.csv");
  TableSchema pct;
  pct.scale = Scale::percent;
  pct.row_header = "Sampling";
  pct.columns = {{"mAP", "map"}};
  const auto pcsv = emit_csv({TableRow{"Random", {{"map", 0.798}}}}, pct);
  const bool percent = pcsv == "Sampling,mAP\r\nRandom,79.8\r\n";
  return {golden && percent, std::string("table CSV ") + (golden ? "byte-identical" : "differs") +
                                 ", percent 0.798 -> " + (percent ? "79.8" : pcsv)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FPRK_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end_determinism() {
  const auto root = fs::temp_directory_path() / "fprk_acceptance_e2e";
  fs::remove_all(root);
  std::vector<std::string> outputs = {"s.jsonl", "s.manifest.json", "s.synth.json", "g.json",
                                      "r.json",  "t.csv",           "t.csv.meta.json"};
  // Each run happens in the same working directory so path-bearing outputs
  // (the config fingerprint covers set paths) are comparable; results are
  // copied aside afterwards.
  const auto work = root / "work";
  auto pipeline = [&](const std::string& name, int threads) {
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string d = "'" + work.string() + "'";
    const std::string t = " --threads " + std::to_string(threads);
    if (run_cli("synth --identities 10 --gallery-per-id 20 --drift 0.5 --seed 7 --dim 128 --out-dir " + d +
                " --name s" + t) != 0)
      return false;
    if (run_cli("build-gallery --set " + d + "/s.jsonl --strategy kmeans --reference-count 5 --gallery-count 10"
                " --seed 7 --out " + d + "/g.json" + t) != 0)
      return false;
    if (run_cli("evaluate --set " + d + "/s.jsonl --gallery " + d + "/g.json --seed 7 --out " + d +
                "/r.json --csv " + d + "/t.csv" + t) != 0)
      return false;
    fs::create_directories(root / name);
    for (const auto& f : outputs) fs::copy_file(work / f, root / name / f);
    return true;
  };
  if (!pipeline("a1", 1) || !pipeline("a8", 8) || !pipeline("b1", 1)) return {false, "pipeline failed"};
  std::size_t differing = 0;
  std::string which;
  for (const auto& f : outputs) {
    const auto ref = read_file(root / "a1" / f);
    if (read_file(root / "a8" / f) != ref || read_file(root / "b1" / f) != ref) {
      ++differing;
      which += " " + f;
    }
  }
  fs::remove_all(root);
  return {differing == 0, std::to_string(outputs.size()) + " output files, threads 1 vs 8 and repeat: " +
                              std::to_string(differing) + " differ" + which};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> expected_red;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--expect-red") != 0 || i + 1 >= argc) {
      std::cerr << "usage: acceptance [--expect-red name[,name...]]" << std::endl;
      return 2;
    }
    std::stringstream list(argv[++i]);
    for (std::string n; std::getline(list, n, ',');)
      if (!n.empty()) expected_red.insert(n);
  }
  report("ap-oracle-equivalence", ap_oracle_equivalence, 5);
  report("distractor-monotonicity", distractor_monotonicity, 5);
  report("ranking-invariance", ranking_invariance, 10);
  report("pairwise-gallery-independence", pairwise_gallery_independence, 0);
  report("drift-sensitivity", drift_sensitivity, 60);
  report("sampling-parity", sampling_parity, 60);
  report("subject-count-difficulty", subject_count_difficulty, 0);
  report("kmeans", kmeans_properties, 0);
  report("format-round-trip", format_round_trip, 5);
  report("report-golden", report_golden, 0);
  report("end-to-end-determinism", end_to_end_determinism, 0);
  std::cout << (failed.empty() ? "all criteria passed" : std::to_string(failed.size()) + " criteria failed")
            << std::endl;
  if (expected_red.empty()) return failed.empty() ? 0 : 1;
  if (failed == expected_red) {
    std::cout << "failing set matches --expect-red" << std::endl;
    return 0;
  }
  for (const auto& n : expected_red)
    if (!failed.contains(n)) std::cout << "expected red but passed: " << n << std::endl;
  for (const auto& n : failed)
    if (!expected_red.contains(n)) std::cout << "unexpected failure: " << n << std::endl;
  return 1;
}
