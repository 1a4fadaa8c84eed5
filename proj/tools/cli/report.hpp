#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

namespace qkdsync::cli {

enum class OutputFormat { Table, Csv, Json };

inline constexpr int kSchemaVersion = 1;

/// A reported quantity: what a human sees and the full-precision value.
struct Value {
  std::string display;
  nlohmann::ordered_json raw;
};

struct Report {
  std::string command;
  std::vector<std::pair<std::string, Value>> fields;
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
  std::vector<std::string> notes;

  void add(std::string key, Value value) { fields.emplace_back(std::move(key), std::move(value)); }
};

// Display helpers. Percentages carry two decimals.
Value percent(double probability);
Value number(double x, int decimals);
Value scientific(double x, int digits = 4);
Value integer(std::uint64_t n);
Value text(std::string s);
Value empty();

std::string render(const Report& report, OutputFormat format);

}  // namespace qkdsync::cli
