#pragma once

#include <map>
#include <string>
#include <vector>

namespace finn {

// Flat `key = value` text. Blank lines and lines starting with '#' are
// skipped; lists are comma separated. Unknown keys and repeated keys raise
// FormatError at parse time.
class Config {
 public:
  static Config parse(const std::string& text);
  // Throws FormatError when the file cannot be read.
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace finn
