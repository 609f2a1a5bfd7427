#pragma once

// Result tables (CSV, markdown) and long-form plot data.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fprk/engine.hpp"

namespace fprk {

struct Column {
  std::string header;
  std::string key;
};

struct TableSchema {
  std::string row_header = "Dataset";
  std::vector<Column> columns;
  Scale scale = Scale::fraction;
  std::optional<int> decimals;  // 3 for fractions, 1 for percent when unset

  int effective_decimals() const { return decimals.value_or(scale == Scale::percent ? 1 : 3); }
};

/// A cell holding nullopt is an explicitly absent value and renders as "-".
/// A column key missing from `cells` altogether is an error.
struct TableRow {
  std::string label;
  std::map<std::string, std::optional<double>> cells;
};

inline constexpr std::string_view kMissingCell = "-";

/// Fixed-point rendering; percent multiplies by 100 first.
std::string format_value(double value, Scale scale, int decimals);

/// RFC-4180 CSV (CRLF records), header row first.
std::string emit_csv(const std::vector<TableRow>& rows, const TableSchema& schema);
std::string emit_markdown(const std::vector<TableRow>& rows, const TableSchema& schema);

/// Long-form CSV: axis_value,seed,metric,value with metrics "map" and
/// "similarity" per cell. Throws ValidationError on an empty grid.
std::string emit_plotdata(const AblationGrid& grid);

using CsvTable = std::vector<std::vector<std::string>>;

/// RFC-4180 parsing (quoted fields, doubled quotes, CRLF or LF records).
CsvTable parse_csv(std::string_view text);
std::string write_csv(const CsvTable& table);

enum class RowKey { dataset, method };

struct TableLayout {
  RowKey row_key = RowKey::dataset;
  std::vector<std::string> encoders;  // column order; sorted encoder names when empty
  Aggregation aggregation = Aggregation::per_query;
  bool include_top1 = false;
  bool include_adherence = true;  // only added when some run carries a value
};

/// Table with encoder x {Sim, mAP} columns: all Sim columns, then all mAP
/// columns, then optional adherence and top-1. Cells without a run are "-".
/// Row labels appear in first-seen order of `runs`. Labels become
/// "dataset/method" (or "method/dataset") when the other key varies, with
/// "@variant" appended when variants vary.
std::pair<TableSchema, std::vector<TableRow>> build_table(const std::vector<RunResult>& runs,
                                                          const TableLayout& layout, Scale scale);

/// Provenance sidecar for emitted tables.
std::string emit_sidecar(std::uint64_t config_fingerprint, std::uint64_t seed);

}  // namespace fprk
