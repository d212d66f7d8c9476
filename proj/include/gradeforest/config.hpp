#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gradeforest/errors.hpp"
#include "gradeforest/text.hpp"

namespace gradeforest {

// Flat `key = value` text. '#' starts a comment line; later keys override
// earlier ones. Entries keep sorted key order, so writing is deterministic.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in) {
    KeyValues kv;
    std::string line;
    std::size_t line_no = 0;
    while (text::next_line(in, line)) {
      ++line_no;
      const auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
      const auto key = text::trim(t.substr(0, eq));
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      kv.set(std::string(key), std::string(text::trim(t.substr(eq + 1))));
    }
    return kv;
  }

  void set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  void merge(const KeyValues& other) {
    for (const auto& [k, v] : other.entries_) entries_[k] = v;
  }

  std::optional<std::string> get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_or(const std::string& key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    auto d = text::parse_double(*v);
    if (!d) throw ConfigError("'" + key + "' must be a number, got '" + *v + "'");
    return *d;
  }

  template <typename Int>
  Int get_int(const std::string& key, Int fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    auto i = text::parse_int<Int>(*v);
    if (!i) throw ConfigError("'" + key + "' must be an integer, got '" + *v + "'");
    return *i;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("'" + key + "' must be true or false, got '" + *v + "'");
  }

  // Keys under "prefix." with the prefix stripped.
  std::map<std::string, std::string> with_prefix(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : entries_)
      if (k.rfind(prefix + ".", 0) == 0) out[k.substr(prefix.size() + 1)] = v;
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return entries_; }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
  }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace gradeforest
