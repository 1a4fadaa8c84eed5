#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qkdsync::cli {

struct ParamSpec {
  std::string name;
  std::string default_value;  ///< empty means "unset"
  std::string help;
};

/// Flat key/value parameters for one subcommand, resolved from defaults,
/// the config file and command-line flags (in increasing priority).
class ParamSet {
 public:
  explicit ParamSet(std::vector<ParamSpec> specs);

  const std::vector<ParamSpec>& specs() const { return specs_; }
  bool known(std::string_view key) const;
  /// Comma-separated list of accepted keys, for error messages.
  std::string valid_keys() const;

  /// Throws ConfigError for unknown keys.
  void set(const std::string& key, std::string value);

  bool has(const std::string& key) const;
  std::string text(const std::string& key) const;
  double real(const std::string& key) const;
  std::uint64_t count(const std::string& key) const;
  bool flag(const std::string& key) const;

 private:
  const std::string& raw(const std::string& key) const;

  std::vector<ParamSpec> specs_;
  std::map<std::string, std::string, std::less<>> values_;
};

/// Parses a decimal number; accepts a comma as the decimal separator.
std::optional<double> parse_real(std::string_view text);

/// Reads a flat `key = value` document ('#' starts a comment).
std::map<std::string, std::string> read_config_file(const std::string& path);

}  // namespace qkdsync::cli
