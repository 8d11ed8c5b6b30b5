#include "stirlab/experiment_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "stirlab/errors.hpp"

namespace stirlab {

namespace {

std::string trim(const std::string& v) {
  const auto b = v.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = v.find_last_not_of(" \t\r");
  return v.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError("key " + key + ": '" + v + "' is not a number");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError("key " + key + ": '" + v + "' is not an integer");
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::istream& in, const std::string& source) {
  std::ostringstream all;
  all << in.rdbuf();
  return parse_text(all.str(), source);
}

ExperimentConfig ExperimentConfig::parse_text(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  cfg.text_ = text;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(number);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
      throw ConfigError(where + ": key '" + key + "' must look like section.key");
    }
    if (!cfg.entries_.emplace(key, value).second) {
      throw ConfigError(where + ": duplicate key " + key);
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse(in, path);
}

std::string ExperimentConfig::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing key " + key);
  return it->second;
}

std::string ExperimentConfig::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double ExperimentConfig::get_double(const std::string& key) const {
  return to_double(key, get_string(key));
}

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long ExperimentConfig::get_int(const std::string& key) const {
  return to_int(key, get_string(key));
}

long long ExperimentConfig::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool ExperimentConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key " + key + ": '" + v + "' is not a boolean");
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get_string(key))) out.push_back(to_double(key, item));
  return out;
}

std::vector<int> ExperimentConfig::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split_list(get_string(key))) {
    out.push_back(static_cast<int>(to_int(key, item)));
  }
  return out;
}

void ExperimentConfig::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : entries_) {
    if (!allowed.count(key)) throw ConfigError("unknown key " + key);
  }
}

}  // namespace stirlab
