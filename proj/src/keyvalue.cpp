#include "spdcal/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace spdcal {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (sep == ' ') {
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(const std::string& token) {
  const std::string t = trim(token);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "a readable key = value file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, line_no, "'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(origin, line_no, "a non-empty key before '='");
    if (kv.entries_.count(key)) throw ParseError(origin, line_no, "unique key, '" + key + "' repeats");
    kv.entries_[key] = Entry{trim(line.substr(eq + 1)), line_no};
  }
  return kv;
}

std::vector<std::string> KeyValueFile::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

void KeyValueFile::fail(const std::string& key, const std::string& expectation) const {
  const auto it = entries_.find(key);
  throw ParseError(origin_, it == entries_.end() ? 0 : it->second.line,
                   expectation + " for key '" + key + "'");
}

std::string KeyValueFile::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ParseError(origin_, 0, "required key '" + key + "'");
  return it->second.value;
}

std::optional<std::string> KeyValueFile::find_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

double KeyValueFile::get_double(const std::string& key) const {
  const auto v = parse_double(get_string(key));
  if (!v) fail(key, "a finite number");
  return *v;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

long long KeyValueFile::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(key, "an integer");
  return v;
}

long long KeyValueFile::get_int(const std::string& key, long long fallback) const {
  return contains(key) ? get_int(key) : fallback;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  if (!contains(key)) return fallback;
  const std::string s = get_string(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(key, "a boolean (true/false)");
}

namespace {

// List values may be separated by commas, whitespace or both.
std::vector<std::string> list_tokens(std::string text) {
  for (char& ch : text)
    if (ch == ',') ch = ' ';
  std::vector<std::string> out;
  for (auto& tok : split(text, ' '))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

}  // namespace

std::vector<double> KeyValueFile::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : list_tokens(get_string(key))) {
    const auto v = parse_double(tok);
    if (!v) fail(key, "a list of numbers");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::string> KeyValueFile::get_strings(const std::string& key) const {
  std::vector<std::string> out;
  for (auto& tok : list_tokens(get_string(key))) out.push_back(tok);
  return out;
}

Uncertain KeyValueFile::get_uncertain(const std::string& key) const {
  const auto parts = split(get_string(key), ' ');
  if (parts.size() != 2) fail(key, "'value u' or 'value u%'");
  const auto value = parse_double(parts[0]);
  if (!value) fail(key, "a numeric value");
  std::string ut = parts[1];
  const bool percent = !ut.empty() && ut.back() == '%';
  if (percent) ut.pop_back();
  const auto u = parse_double(ut);
  if (!u || *u < 0.0) fail(key, "a non-negative uncertainty");
  return percent ? Uncertain::from_relative(*value, *u / 100.0) : Uncertain(*value, *u);
}

std::optional<Uncertain> KeyValueFile::find_uncertain(const std::string& key) const {
  if (!contains(key)) return std::nullopt;
  return get_uncertain(key);
}

double KeyValueFile::get_relative(const std::string& key) const {
  std::string s = get_string(key);
  const bool percent = !s.empty() && s.back() == '%';
  if (percent) s.pop_back();
  const auto v = parse_double(s);
  if (!v || *v < 0.0) fail(key, "a non-negative relative uncertainty (fraction or x%)");
  return percent ? *v / 100.0 : *v;
}

std::string read_text_file(const std::filesystem::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "a readable " + what);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace spdcal
