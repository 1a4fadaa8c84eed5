#include "cli/report.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace qkdsync::cli {

Value percent(double probability) {
  return {fmt::format("{:.2f}%", probability * 100.0), probability};
}

Value number(double x, int decimals) { return {fmt::format("{:.{}f}", x, decimals), x}; }

Value scientific(double x, int digits) { return {fmt::format("{:.{}g}", x, digits), x}; }

Value integer(std::uint64_t n) { return {fmt::format("{}", n), n}; }

Value text(std::string s) { return {s, s}; }

Value empty() { return {"", nullptr}; }

namespace {

std::string csv_cell(const nlohmann::ordered_json& raw) {
  std::string cell;
  if (raw.is_null()) {
    cell = "";
  } else if (raw.is_number_float()) {
    cell = fmt::format("{}", raw.get<double>());
  } else if (raw.is_number_unsigned()) {
    cell = fmt::format("{}", raw.get<std::uint64_t>());
  } else if (raw.is_number_integer()) {
    cell = fmt::format("{}", raw.get<std::int64_t>());
  } else if (raw.is_boolean()) {
    cell = raw.get<bool>() ? "true" : "false";
  } else if (raw.is_string()) {
    cell = raw.get<std::string>();
  } else {
    cell = raw.dump();
  }
  if (cell.find_first_of(",\"\n") != std::string::npos) {
    std::string quoted = "\"";
    for (char c : cell) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    return quoted + "\"";
  }
  return cell;
}

std::string render_table(const Report& report) {
  std::string out;
  std::size_t key_width = 0;
  for (const auto& [key, value] : report.fields) key_width = std::max(key_width, key.size());
  for (const auto& [key, value] : report.fields) {
    out += fmt::format("{:<{}}  {}\n", key, key_width, value.display);
  }

  if (!report.rows.empty()) {
    if (!report.fields.empty()) out += "\n";
    std::vector<std::size_t> widths(report.columns.size());
    for (std::size_t c = 0; c < report.columns.size(); ++c) widths[c] = report.columns[c].size();
    for (const auto& row : report.rows) {
      for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c) {
        widths[c] = std::max(widths[c], row[c].display.size());
      }
    }
    auto line = [&](auto&& cell_at) {
      std::string l;
      for (std::size_t c = 0; c < widths.size(); ++c) {
        if (c > 0) l += "  ";
        l += fmt::format("{:<{}}", cell_at(c), widths[c]);
      }
      while (!l.empty() && l.back() == ' ') l.pop_back();
      return l + "\n";
    };
    out += line([&](std::size_t c) { return report.columns[c]; });
    for (const auto& row : report.rows) {
      out += line([&](std::size_t c) { return c < row.size() ? row[c].display : std::string(); });
    }
  }

  for (const auto& note : report.notes) out += "note: " + note + "\n";
  return out;
}

std::string render_csv(const Report& report) {
  std::string out;
  if (!report.rows.empty()) {
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
      out += (c ? "," : "") + report.columns[c];
    }
    out += "\n";
    for (const auto& row : report.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + csv_cell(row[c].raw);
      out += "\n";
    }
    return out;
  }
  out += "key,value\n";
  for (const auto& [key, value] : report.fields) out += key + "," + csv_cell(value.raw) + "\n";
  return out;
}

std::string render_json(const Report& report) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = report.command;
  nlohmann::ordered_json values = nlohmann::ordered_json::object();
  nlohmann::ordered_json display = nlohmann::ordered_json::object();
  for (const auto& [key, value] : report.fields) {
    values[key] = value.raw;
    display[key] = value.display;
  }
  doc["values"] = values;
  doc["display"] = display;
  if (!report.rows.empty()) {
    doc["columns"] = report.columns;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    nlohmann::ordered_json rows_display = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
      nlohmann::ordered_json r = nlohmann::ordered_json::object();
      nlohmann::ordered_json d = nlohmann::ordered_json::object();
      for (std::size_t c = 0; c < row.size() && c < report.columns.size(); ++c) {
        r[report.columns[c]] = row[c].raw;
        d[report.columns[c]] = row[c].display;
      }
      rows.push_back(r);
      rows_display.push_back(d);
    }
    doc["rows"] = rows;
    doc["rows_display"] = rows_display;
  }
  doc["notes"] = report.notes;
  return doc.dump(2) + "\n";
}

}  // namespace

std::string render(const Report& report, OutputFormat format) {
  switch (format) {
    case OutputFormat::Table:
      return render_table(report);
    case OutputFormat::Csv:
      return render_csv(report);
    case OutputFormat::Json:
      return render_json(report);
  }
  return {};
}

}  // namespace qkdsync::cli
