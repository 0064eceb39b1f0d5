#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spdcal/quantities.hpp"

namespace spdcal {

/// Line-oriented `key = value` text. `#` starts a comment; blank lines are
/// ignored; keys are unique. Values keep their source line for diagnostics.
class KeyValueFile {
public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static KeyValueFile load(const std::filesystem::path& path);
  static KeyValueFile parse(const std::string& text, const std::string& origin);

  const std::string& origin() const { return origin_; }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  /// Keys starting with `prefix`, in lexical order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  std::string get_string(const std::string& key) const;
  std::optional<std::string> find_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  /// `value u` or `value u%` (relative, percent of |value|).
  Uncertain get_uncertain(const std::string& key) const;
  std::optional<Uncertain> find_uncertain(const std::string& key) const;

  /// Relative standard uncertainty given as `x%` (percent) or a bare fraction.
  double get_relative(const std::string& key) const;

  [[noreturn]] void fail(const std::string& key, const std::string& expectation) const;

private:
  std::string origin_;
  std::map<std::string, Entry> entries_;
};

/// Parse a double, accepting the whole token only.
std::optional<double> parse_double(const std::string& token);

/// Split on `sep` (or whitespace when sep == ' ') and trim each piece.
std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

/// Whole file contents; ParseError naming `what` when unreadable.
std::string read_text_file(const std::filesystem::path& path, const std::string& what);

/// Shortest round-trip decimal text for a double.
std::string format_double(double x);

}  // namespace spdcal
