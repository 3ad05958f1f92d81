#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace evorl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat dotted-key configuration with a fixed registry: every key has a
// declared type, a documented default, and unknown keys are rejected at parse
// time. Files use a TOML subset: [section] headers, `key = value` lines,
// quoted strings, ints, floats, booleans, # comments. `pbt.search.<hyper>`
// keys are pattern keys; their value is "low,high,scale" (scale: linear|log).
class Config {
 public:
  enum class Type { Int, Double, Bool, String };

  static Config defaults();
  static Config from_file(const std::string& path);

  // CLI-style override: bare `value` text parsed per the key's declared type.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;  // "64,64"

  // (suffix, value) pairs of keys under `prefix.`, sorted by key.
  std::vector<std::pair<std::string, std::string>> prefixed(const std::string& prefix) const;

  // "key=value" lines, sorted; embedded in the metrics header for provenance.
  std::string describe() const;

  // key -> (type, doc) of the full registry, for --help-style listings.
  static std::vector<std::pair<std::string, std::string>> documented_keys();

 private:
  struct Entry {
    Type type = Type::String;
    std::string value;
  };
  std::map<std::string, Entry> entries_;
};

}  // namespace evorl
