#pragma once

#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbflow {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Flat `key = value` configuration over a fixed key set. Lines starting with
/// '#' and blank lines are ignored; unknown or repeated keys are errors.
/// Later sources override earlier ones (defaults, then file, then flags).
class Config {
 public:
  explicit Config(std::vector<KeySpec> keys);

  void load(std::istream& is, const std::string& source);
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);

  bool has_key(const std::string& key) const { return values_.count(key) != 0; }
  const std::vector<KeySpec>& keys() const { return keys_; }

  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  long integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  /// Comma-separated numbers; empty string gives an empty list.
  std::vector<double> list(const std::string& key) const;
  std::vector<std::string> words(const std::string& key) const;

  /// Resolved config in key order, re-ingestible by load().
  std::string render() const;

 private:
  std::vector<KeySpec> keys_;
  std::map<std::string, std::string> values_;
};

}  // namespace rbflow
