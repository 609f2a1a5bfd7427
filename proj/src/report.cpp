#include "fprk/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

#include "fprk/error.hpp"
#include "fprk/hash.hpp"
#include "json.hpp"

namespace fprk {

namespace {

constexpr std::string_view kCrlf = "\r\n";

bool needs_quotes(std::string_view field) {
  return field.find_first_of(",\"\r\n") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view field) {
  if (!needs_quotes(field)) {
    out.append(field);
    return;
  }
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

std::vector<std::string> render_row(const TableRow& row, const TableSchema& schema) {
  std::vector<std::string> out{row.label};
  const int decimals = schema.effective_decimals();
  for (const auto& col : schema.columns) {
    auto it = row.cells.find(col.key);
    if (it == row.cells.end())
      throw ValidationError("table row '" + row.label + "' has no value for column '" + col.header +
                            "' (mark it absent explicitly)");
    out.push_back(it->second ? format_value(*it->second, schema.scale, decimals)
                             : std::string(kMissingCell));
  }
  return out;
}

std::vector<std::string> header_row(const TableSchema& schema) {
  std::vector<std::string> out{schema.row_header};
  for (const auto& c : schema.columns) out.push_back(c.header);
  return out;
}

std::string escape_markdown(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string format_value(double value, Scale scale, int decimals) {
  if (scale == Scale::percent) value *= 100.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  std::string s(buf);
  // "-0.000" carries no information beyond "0.000".
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string write_csv(const CsvTable& table) {
  std::string out;
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(',');
      append_field(out, row[i]);
    }
    out.append(kCrlf);
  }
  return out;
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    table.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) throw ParseError("csv: quote inside unquoted field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError("csv: unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return table;
}

std::string emit_csv(const std::vector<TableRow>& rows, const TableSchema& schema) {
  CsvTable table{header_row(schema)};
  for (const auto& r : rows) table.push_back(render_row(r, schema));
  return write_csv(table);
}

std::string emit_markdown(const std::vector<TableRow>& rows, const TableSchema& schema) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + escape_markdown(c) + " |";
    return out + "\n";
  };
  const auto header = header_row(schema);
  std::string out = line(header);
  out += "|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& r : rows) out += line(render_row(r, schema));
  return out;
}

std::string emit_plotdata(const AblationGrid& grid) {
  if (grid.cells.empty()) throw ValidationError("plot data: empty ablation grid");
  CsvTable table{{"axis_value", "seed", "metric", "value"}};
  for (const auto& c : grid.cells) {
    table.push_back({c.value, std::to_string(c.seed), "map", shortest(c.map)});
    table.push_back({c.value, std::to_string(c.seed), "similarity", shortest(c.similarity)});
  }
  return write_csv(table);
}

std::pair<TableSchema, std::vector<TableRow>> build_table(const std::vector<RunResult>& runs,
                                                          const TableLayout& layout, Scale scale) {
  TableSchema schema;
  schema.scale = scale;
  schema.row_header = layout.row_key == RowKey::dataset ? "Dataset" : "Method";

  std::vector<std::string> encoders = layout.encoders;
  if (encoders.empty()) {
    std::set<std::string> found;
    for (const auto& r : runs) found.insert(r.key.encoder);
    encoders.assign(found.begin(), found.end());
  }
  for (const auto& e : encoders) schema.columns.push_back({e + " Sim", "sim:" + e});
  for (const auto& e : encoders) schema.columns.push_back({e + " mAP", "map:" + e});
  const bool adherence =
      layout.include_adherence &&
      std::any_of(runs.begin(), runs.end(), [](const RunResult& r) { return r.text_adherence.has_value(); });
  if (adherence) schema.columns.push_back({"Text adherence", "adherence"});
  if (layout.include_top1) schema.columns.push_back({"Top-1", "top1"});

  // Qualify labels with the other key (and the variant) only when they would
  // otherwise merge distinct runs into one row.
  std::set<std::string> datasets, methods, variants;
  for (const auto& r : runs) {
    datasets.insert(r.key.dataset);
    methods.insert(r.key.method);
    variants.insert(r.key.variant);
  }
  const bool by_dataset = layout.row_key == RowKey::dataset;
  const bool qualify = (by_dataset ? methods.size() : datasets.size()) > 1;
  auto label_of = [&](const RunKey& k) {
    std::string label = by_dataset ? k.dataset : k.method;
    if (qualify) label += "/" + (by_dataset ? k.method : k.dataset);
    if (variants.size() > 1) label += "@" + k.variant;
    return label;
  };

  std::vector<TableRow> rows;
  std::map<std::string, std::size_t> row_of;
  for (const auto& r : runs) {
    const std::string label = label_of(r.key);
    auto [it, inserted] = row_of.emplace(label, rows.size());
    if (inserted) {
      TableRow row;
      row.label = label;
      for (const auto& c : schema.columns) row.cells[c.key] = std::nullopt;
      rows.push_back(std::move(row));
    }
    auto& cells = rows[it->second].cells;
    if (!cells.contains("sim:" + r.key.encoder)) continue;  // encoder not in the requested order
    cells["sim:" + r.key.encoder] = r.pairwise.dataset_mean;
    cells["map:" + r.key.encoder] = r.map(layout.aggregation);
    if (adherence && r.text_adherence) cells["adherence"] = *r.text_adherence;
    if (layout.include_top1) cells["top1"] = r.top1_accuracy;
  }
  return {std::move(schema), std::move(rows)};
}

std::string emit_sidecar(std::uint64_t config_fingerprint, std::uint64_t seed) {
  const nlohmann::json doc = {{"config_fingerprint", to_hex64(config_fingerprint)},
                              {"seed", seed},
                              {"tool", "fprk"},
                              {"tool_version", FPRK_VERSION}};
  return doc.dump(2) + "\n";
}

}  // namespace fprk
