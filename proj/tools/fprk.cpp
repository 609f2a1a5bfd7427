// fprk: gallery-retrieval evaluation of identity preservation.
//
// Exit codes: 0 success, 1 validation / input error, 2 usage error.
// Diagnostics go to stderr as one line: "error: <kind>: <message>".

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fprk/embstore.hpp"
#include "fprk/engine.hpp"
#include "fprk/error.hpp"
#include "fprk/fileio.hpp"
#include "fprk/gallery.hpp"
#include "fprk/hash.hpp"
#include "fprk/report.hpp"
#include "fprk/synth.hpp"

namespace fs = std::filesystem;
using namespace fprk;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_provenance(std::uint64_t fingerprint, std::uint64_t seed) {
  std::cout << "fingerprint=" << to_hex64(fingerprint) << " seed=" << seed << "\n";
}

EmbeddingSet load_sets(const std::vector<std::string>& paths, const std::string& format) {
  std::optional<EmbeddingSet> merged;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw IoError("set file not found: '" + p + "'");
    auto s = load_set(p, format.empty() ? format_from_extension(p) : parse_format(format));
    merged = merged ? merge(*merged, s) : std::move(s);
  }
  if (!merged) throw ValidationError("no sets given");
  return std::move(*merged);
}

// Shared evaluate/ablate/compare flags. Values only override the config
// when the flag was given on the command line.
struct RunFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string gallery;
  std::uint64_t seed = 0;
  std::string mode;
  std::string aggregation;
  std::string pairwise_mode;
  std::string scale;
  std::vector<std::string> methods;
  std::vector<std::string> variants;

  CLI::Option* seed_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Run config JSON (paths relative to its directory)");
    app->add_option("--set", sets, "Embedding set file(s); replaces the config's sets");
    app->add_option("--gallery", gallery, "Gallery spec JSON; replaces the config's gallery source");
    seed_opt = app->add_option("--seed", seed, "Run seed");
    app->add_option("--mode", mode, "oracle | generated | both");
    app->add_option("--aggregation", aggregation, "per-query | per-subject-macro");
    app->add_option("--pairwise-mode", pairwise_mode, "vs-reference | vs-gallery");
    app->add_option("--scale", scale, "fraction | percent");
    app->add_option("--method", methods, "Restrict to these generator methods");
    app->add_option("--variant", variants, "Restrict to these variants");
  }

  EvalConfig build() const {
    EvalConfig cfg;
    if (!config.empty()) {
      if (!fs::exists(config)) throw IoError("config file not found: '" + config + "'");
      cfg = load_eval_config(config);
    } else if (sets.empty()) {
      throw CLI::RequiredError("--config or --set");
    }
    if (!sets.empty()) {
      cfg.sets.clear();
      for (const auto& s : sets) cfg.sets.push_back({fs::absolute(s), std::nullopt, {}});
    }
    if (!gallery.empty()) {
      cfg.gallery.kind = GallerySource::Kind::file;
      cfg.gallery.path = fs::absolute(gallery);
    }
    if (*seed_opt) cfg.seed = seed;
    if (!mode.empty()) cfg.mode = parse_eval_mode(mode);
    if (!aggregation.empty()) cfg.metrics.aggregation = parse_aggregation(aggregation);
    if (!pairwise_mode.empty()) cfg.metrics.pairwise_mode = parse_pairwise_mode(pairwise_mode);
    if (!scale.empty()) cfg.metrics.scale = parse_scale(scale);
    if (!methods.empty()) cfg.methods = methods;
    if (!variants.empty()) cfg.variants = variants;
    return cfg;
  }
};

void print_run(const RunResult& r) {
  std::cout << r.key.dataset << "/" << r.key.encoder << "/" << r.key.method << "/" << r.key.variant
            << " queries=" << r.query_count << " map=" << format_value(r.map_per_query, Scale::fraction, 4)
            << " map_subject=" << format_value(r.map_per_subject, Scale::fraction, 4)
            << " sim(" << to_string(r.pairwise.mode)
            << ")=" << format_value(r.pairwise.dataset_mean, Scale::fraction, 4)
            << " top1=" << format_value(r.top1_accuracy, Scale::fraction, 4) << "\n";
}

void write_tables(const std::vector<RunResult>& runs, const EvalConfig& cfg, const std::string& csv,
                  const std::string& md, RowKey row_key) {
  if (csv.empty() && md.empty()) return;
  TableLayout layout;
  layout.row_key = row_key;
  layout.aggregation = cfg.metrics.aggregation;
  auto [schema, rows] = build_table(runs, layout, cfg.metrics.scale);
  const auto sidecar = emit_sidecar(cfg.fingerprint(), cfg.seed);
  if (!csv.empty()) {
    write_file_atomic(csv, emit_csv(rows, schema));
    write_file_atomic(csv + ".meta.json", sidecar);
  }
  if (!md.empty()) {
    write_file_atomic(md, emit_markdown(rows, schema));
    write_file_atomic(md + ".meta.json", sidecar);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gallery-retrieval evaluation of identity preservation"};
  app.require_subcommand(1);
  app.fallthrough();  // global options are accepted after the subcommand too
  app.set_version_flag("--version", FPRK_VERSION);

  int threads = 0;
  if (const char* env = std::getenv("FPRK_THREADS")) threads = std::atoi(env);
  app.add_option("--threads", threads, "Worker threads (default: FPRK_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  // validate
  auto* validate = app.add_subcommand("validate", "Load and validate an embedding set");
  std::string v_set, v_format, v_manifest, v_write_manifest;
  validate->add_option("--set", v_set, "Embedding set file")->required();
  validate->add_option("--format", v_format, "jsonl | binary (default: from extension)");
  validate->add_option("--manifest", v_manifest, "Check against this manifest");
  validate->add_option("--write-manifest", v_write_manifest, "Write the derived manifest here");

  // build-gallery
  auto* build = app.add_subcommand("build-gallery", "Split a pool into reference and gallery lists");
  std::vector<std::string> b_sets;
  std::string b_out, b_strategy = "random", b_curated, b_format;
  SplitConfig b_split;
  build->add_option("--set", b_sets, "Embedding set file(s)")->required();
  build->add_option("--format", b_format, "jsonl | binary (default: from extension)");
  build->add_option("--out", b_out, "Gallery spec output (JSON)")->required();
  build->add_option("--strategy", b_strategy, "random | kmeans | curated | roles");
  build->add_option("--reference-count", b_split.reference_count, "Reference images per subject");
  build->add_option("--gallery-count", b_split.gallery_count, "Gallery images per subject");
  build->add_option("--subject-limit", b_split.subject_limit, "Keep this many subjects (0 = all)");
  build->add_option("--seed", b_split.seed, "Split seed");
  build->add_flag("--cap-to-available", b_split.cap_to_available,
                  "Shrink subjects with too few images instead of failing");
  build->add_option("--curated-list", b_curated, "Id list for strategy=curated");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Run oracle and/or generated evaluation");
  RunFlags e_flags;
  e_flags.add(evaluate);
  std::string e_out, e_csv, e_md, e_rows = "dataset";
  evaluate->add_option("--out", e_out, "Results JSON");
  evaluate->add_option("--csv", e_csv, "Summary table as CSV");
  evaluate->add_option("--markdown", e_md, "Summary table as markdown");
  evaluate->add_option("--rows", e_rows, "Table rows: dataset | method");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Sweep gallery composition");
  RunFlags a_flags;
  a_flags.add(ablate);
  std::string a_axis = "images-per-subject", a_values, a_seeds = "0", a_queries = "oracle", a_out,
              a_plot;
  AblationOptions a_opt;
  ablate->add_option("--axis", a_axis, "images-per-subject | subject-count | sampling-strategy");
  ablate->add_option("--values", a_values, "Comma-separated grid values")->required();
  ablate->add_option("--seeds", a_seeds, "Comma-separated repetition seeds");
  ablate->add_option("--queries", a_queries, "oracle | generated");
  ablate->add_option("--reference-count", a_opt.reference_count, "Reference images per subject");
  ablate->add_option("--gallery-count", a_opt.gallery_count, "Gallery images per subject");
  ablate->add_flag("--full-resample", a_opt.full_resample, "Resample each cell instead of nesting");
  ablate->add_option("--out", a_out, "Grid JSON");
  ablate->add_option("--plotdata", a_plot, "Long-form plot CSV");

  // compare-variants
  auto* compare = app.add_subcommand("compare-variants", "Compare two embedding variants");
  RunFlags c_flags;
  c_flags.add(compare);
  std::string c_a, c_b, c_out;
  compare->add_option("--a", c_a, "Baseline variant")->required();
  compare->add_option("--b", c_b, "Compared variant")->required();
  compare->add_option("--out", c_out, "Comparison JSON");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic identity dataset");
  SynthConfig s_cfg;
  std::string s_out_dir = ".", s_name = "synth", s_format = "jsonl";
  synth->add_option("--identities", s_cfg.identities, "Identity count");
  synth->add_option("--reference-per-id", s_cfg.reference_per_id, "Reference images per identity");
  synth->add_option("--gallery-per-id", s_cfg.gallery_per_id, "Gallery images per identity");
  synth->add_option("--generated-per-id", s_cfg.generated_per_id, "Generated images per identity");
  synth->add_option("--dim", s_cfg.dim, "Embedding dimension");
  synth->add_option("--noise", s_cfg.noise, "Within-identity noise scale");
  synth->add_option("--drift", s_cfg.drift, "Identity drift of generated samples, in [0, 1]");
  synth->add_option("--seed", s_cfg.seed, "Seed");
  synth->add_option("--method", s_cfg.method, "Method name on generated records");
  synth->add_option("--out-dir", s_out_dir, "Output directory");
  synth->add_option("--name", s_name, "Output file stem");
  synth->add_option("--format", s_format, "jsonl | binary");

  // report
  auto* report = app.add_subcommand("report", "Render results JSON as a table");
  std::string r_results, r_format = "csv", r_scale, r_rows = "dataset", r_encoders, r_out, r_agg;
  int r_decimals = -1;
  bool r_top1 = false;
  report->add_option("--results", r_results, "Results JSON from evaluate")->required();
  report->add_option("--format", r_format, "csv | markdown");
  report->add_option("--scale", r_scale, "fraction | percent");
  report->add_option("--decimals", r_decimals, "Decimal places");
  report->add_option("--rows", r_rows, "dataset | method");
  report->add_option("--encoders", r_encoders, "Comma-separated encoder column order");
  report->add_option("--aggregation", r_agg, "per-query | per-subject-macro");
  report->add_flag("--top1", r_top1, "Add a top-1 accuracy column");
  report->add_option("--out", r_out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << "\n";
    return kExitUsage;
  }

  set_thread_count(threads);

  try {
    if (*validate) {
      const auto set = load_set(v_set, v_format.empty() ? format_from_extension(v_set) : parse_format(v_format));
      if (!v_manifest.empty()) check_against_manifest(set, load_manifest(v_manifest));
      if (!v_write_manifest.empty()) write_manifest(set.manifest(), v_write_manifest);
      std::cout << "ok: " << v_set << " records=" << set.size() << " dimension=" << set.dimension()
                << " encoder=" << set.encoder() << " subjects=" << set.manifest().subjects.size() << "\n";
    } else if (*build) {
      const auto pool = load_sets(b_sets, b_format);
      b_split.strategy = parse_strategy(b_strategy);
      b_split.curated_list = b_curated;
      const auto spec = split_reference_gallery(pool, b_split);
      write_gallery_spec(spec, b_out);
      for (const auto& w : spec.warnings) std::cerr << "warning: " << one_line(w) << "\n";
      std::cout << "gallery: subjects=" << spec.subjects().size() << " reference=" << spec.reference_size()
                << " gallery=" << spec.gallery_size() << " strategy=" << to_string(spec.strategy) << "\n";
      print_provenance(spec.fingerprint(), spec.seed);
    } else if (*evaluate) {
      const auto cfg = e_flags.build();
      const auto runs = run_eval(cfg);
      for (const auto& r : runs) print_run(r);
      if (!e_out.empty()) write_file_atomic(e_out, run_results_to_json(runs));
      write_tables(runs, cfg, e_csv, e_md, e_rows == "method" ? RowKey::method : RowKey::dataset);
      print_provenance(cfg.fingerprint(), cfg.seed);
    } else if (*ablate) {
      const auto cfg = a_flags.build();
      a_opt.axis = parse_ablation_axis(a_axis);
      a_opt.values = split_list(a_values);
      a_opt.seeds.clear();
      for (const auto& s : split_list(a_seeds)) a_opt.seeds.push_back(std::stoull(s));
      a_opt.queries = parse_eval_mode(a_queries);
      a_opt.methods = cfg.methods;
      a_opt.metrics = cfg.metrics;
      const auto grid = run_ablation_sweep(cfg, a_opt);
      for (const auto& c : grid.cells)
        std::cout << to_string(grid.axis) << "=" << c.value << " seed=" << c.seed
                  << " map=" << format_value(c.map, Scale::fraction, 4)
                  << " sim=" << format_value(c.similarity, Scale::fraction, 4) << "\n";
      if (!a_out.empty()) write_file_atomic(a_out, ablation_grid_to_json(grid));
      if (!a_plot.empty()) write_file_atomic(a_plot, emit_plotdata(grid));
      print_provenance(cfg.fingerprint(), cfg.seed);
    } else if (*compare) {
      const auto cfg = c_flags.build();
      const auto cmp = compare_variants(cfg, c_a, c_b);
      for (const auto& d : cmp.deltas)
        std::cout << d.key.dataset << "/" << d.key.encoder << "/" << d.key.method << " " << d.key.variant
                  << " dmap=" << format_value(d.map_per_query, Scale::fraction, 4)
                  << " dsim=" << format_value(d.pairwise, Scale::fraction, 4)
                  << " dtop1=" << format_value(d.top1, Scale::fraction, 4) << "\n";
      std::cout << "missing_in_a=" << cmp.missing_in_a.size() << " missing_in_b=" << cmp.missing_in_b.size()
                << "\n";
      if (!c_out.empty()) write_file_atomic(c_out, variant_comparison_to_json(cmp));
      print_provenance(cfg.fingerprint(), cfg.seed);
    } else if (*synth) {
      s_cfg.validate();
      const auto format = parse_format(s_format);
      const auto set = generate_synthetic_dataset(s_cfg);
      fs::create_directories(s_out_dir);
      const fs::path dir(s_out_dir);
      const auto set_path = dir / (s_name + (format == Format::binary ? ".bin" : ".jsonl"));
      write_set(set, set_path, format);
      auto manifest = set.manifest();
      manifest.name = s_name;
      write_manifest(manifest, dir / (s_name + ".manifest.json"));
      const auto cfg_json = synth_config_to_json(s_cfg);
      write_file_atomic(dir / (s_name + ".synth.json"), cfg_json);
      std::cout << "synth: " << set_path.string() << " records=" << set.size() << "\n";
      print_provenance(fnv1a64(cfg_json), s_cfg.seed);
    } else if (*report) {
      if (!fs::exists(r_results)) throw IoError("results file not found: '" + r_results + "'");
      const auto runs = run_results_from_json(read_file(r_results));
      TableLayout layout;
      layout.row_key = r_rows == "method" ? RowKey::method : RowKey::dataset;
      layout.encoders = split_list(r_encoders);
      layout.include_top1 = r_top1;
      if (!r_agg.empty()) layout.aggregation = parse_aggregation(r_agg);
      auto [schema, rows] =
          build_table(runs, layout, r_scale.empty() ? Scale::fraction : parse_scale(r_scale));
      if (r_decimals >= 0) schema.decimals = r_decimals;
      std::string text;
      if (r_format == "csv")
        text = emit_csv(rows, schema);
      else if (r_format == "markdown" || r_format == "md")
        text = emit_markdown(rows, schema);
      else
        throw ValidationError("unknown report format '" + r_format + "'");
      const std::uint64_t fp = runs.empty() ? 0 : runs.front().config_fingerprint;
      if (r_out.empty()) {
        std::cout << text;
      } else {
        write_file_atomic(r_out, text);
        write_file_atomic(r_out + ".meta.json", emit_sidecar(fp, 0));
        std::cout << "fingerprint=" << to_hex64(fp) << "\n";
      }
    }
  } catch (const CLI::RequiredError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: parse: " << one_line(e.what()) << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: validation: " << one_line(e.what()) << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "error: io: " << one_line(e.what()) << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
