#include "cli/params.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "qkdsync/errors.hpp"

namespace qkdsync::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

std::optional<double> parse_real(std::string_view text) {
  std::string s = trim(text);
  std::replace(s.begin(), s.end(), ',', '.');
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> entries;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(std::string_view(content).substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    entries[key] = trim(std::string_view(content).substr(eq + 1));
  }
  return entries;
}

ParamSet::ParamSet(std::vector<ParamSpec> specs) : specs_(std::move(specs)) {
  for (const auto& spec : specs_) values_[spec.name] = spec.default_value;
}

bool ParamSet::known(std::string_view key) const { return values_.find(key) != values_.end(); }

std::string ParamSet::valid_keys() const {
  std::string out;
  for (const auto& spec : specs_) {
    if (!out.empty()) out += ", ";
    out += spec.name;
  }
  return out;
}

void ParamSet::set(const std::string& key, std::string value) {
  if (!known(key)) {
    throw ConfigError("unknown key '" + key + "'; valid keys: " + valid_keys());
  }
  values_[key] = std::move(value);
}

const std::string& ParamSet::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  return it->second;
}

bool ParamSet::has(const std::string& key) const { return !raw(key).empty(); }

std::string ParamSet::text(const std::string& key) const { return raw(key); }

double ParamSet::real(const std::string& key) const {
  const std::string& value = raw(key);
  if (value.empty()) throw ConfigError("missing value for '" + key + "'");
  const auto parsed = parse_real(value);
  if (!parsed || !std::isfinite(*parsed)) {
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  }
  return *parsed;
}

std::uint64_t ParamSet::count(const std::string& key) const {
  const double value = real(key);
  if (value < 0.0 || value != std::floor(value) || value > 1.8e19) {
    throw ConfigError("'" + key + "' expects a nonnegative integer, got '" + raw(key) + "'");
  }
  return static_cast<std::uint64_t>(value);
}

bool ParamSet::flag(const std::string& key) const {
  std::string value = raw(key);
  std::transform(value.begin(), value.end(), value.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + raw(key) + "'");
}

}  // namespace qkdsync::cli
