#include "rbflow/config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rbflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  return out;
}

}  // namespace

Config::Config(std::vector<KeySpec> keys) : keys_(std::move(keys)) {
  for (const auto& k : keys_) values_[k.key] = k.default_value;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second = value;
}

void Config::load(std::istream& is, const std::string& source) {
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError("config: " + where + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    if (!has_key(key)) throw ConfigError("config: " + where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config: " + where + ": key '" + key + "' repeated");
    values_[key] = value;
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  load(is, path);
}

const std::string& Config::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::logic_error("config: key '" + key + "' not declared");
  return it->second;
}

double Config::num(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "inf") return std::numeric_limits<double>::infinity();
  return parse_number(key, v);
}

long Config::integer(const std::string& key) const {
  const std::string& v = str(key);
  long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

bool Config::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no" || v.empty()) return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<std::string> Config::words(const std::string& key) const {
  std::vector<std::string> out;
  const std::string all = str(key);
  if (trim(all).empty()) return out;
  std::stringstream ss(all + ",");
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) throw ConfigError("config: key '" + key + "' has an empty list item");
    out.push_back(cell);
  }
  return out;
}

std::vector<double> Config::list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& w : words(key)) out.push_back(w == "inf" ? std::numeric_limits<double>::infinity() : parse_number(key, w));
  return out;
}

std::string Config::render() const {
  std::string out;
  for (const auto& k : keys_) out += k.key + " = " + values_.at(k.key) + "\n";
  return out;
}

}  // namespace rbflow
