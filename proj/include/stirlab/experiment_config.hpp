#pragma once

// Line-based experiment configuration: `section.key = value`, '#' comments.
// Every accessor that fails throws ConfigError naming the offending key.

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace stirlab {

class ExperimentConfig {
 public:
  // Duplicate keys and lines without '=' or without a "section." prefix are errors.
  static ExperimentConfig parse(std::istream& in, const std::string& source = "<config>");
  static ExperimentConfig parse_text(const std::string& text, const std::string& source = "<config>");
  static ExperimentConfig load(const std::string& path);

  const std::string& text() const { return text_; }
  const std::map<std::string, std::string>& entries() const { return entries_; }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated lists.
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;

  // Throws ConfigError for the first key not in `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

 private:
  std::string text_;
  std::string source_;
  std::map<std::string, std::string> entries_;
};

}  // namespace stirlab
