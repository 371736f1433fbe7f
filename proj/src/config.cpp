#include "tankdiag/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tankdiag/errors.hpp"

namespace tankdiag {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::string section;
  cfg.order_.push_back(section);
  cfg.sections_[section];

  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ParseError(source, lineno, "malformed section header '" + line + "'");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!cfg.sections_.count(section)) cfg.order_.push_back(section);
      cfg.sections_[section];
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source, lineno, "expected 'key = value', got '" + line + "'");
    }
    Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
    if (e.key.empty()) throw ParseError(source, lineno, "empty key");
    auto& entries = cfg.sections_[section];
    if (std::any_of(entries.begin(), entries.end(),
                    [&](const Entry& other) { return other.key == e.key; })) {
      throw ParseError(source, lineno, "duplicate key '" + e.key + "' in [" + section + "]");
    }
    entries.push_back(std::move(e));
  }
  return cfg;
}

Config Config::parse_string(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse(in, source);
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return parse(in, path.string());
}

bool Config::has_section(const std::string& section) const { return sections_.count(section) > 0; }

std::vector<std::string> Config::sections() const { return order_; }

const std::vector<Config::Entry>& Config::entries(const std::string& section) const {
  static const std::vector<Entry> empty;
  const auto it = sections_.find(section);
  return it == sections_.end() ? empty : it->second;
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
  for (const auto& e : entries(section)) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

std::optional<std::string> Config::get(const std::string& section, const std::string& key) const {
  if (const Entry* e = find(section, key)) return e->value;
  return std::nullopt;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  double v = 0.0;
  const char* end = e->value.data() + e->value.size();
  auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(source_, e->line, "'" + key + "' expects a number, got '" + e->value + "'");
  }
  return v;
}

long long Config::get_int(const std::string& section, const std::string& key,
                          long long fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  long long v = 0;
  const char* end = e->value.data() + e->value.size();
  auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(source_, e->line, "'" + key + "' expects an integer, got '" + e->value + "'");
  }
  return v;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  throw ParseError(source_, e->line, "'" + key + "' expects a boolean, got '" + e->value + "'");
}

void Config::require_keys(const std::string& section,
                          const std::vector<std::string>& allowed) const {
  for (const auto& e : entries(section)) {
    if (std::find(allowed.begin(), allowed.end(), e.key) == allowed.end()) {
      throw ParseError(source_, e.line, "unknown key '" + e.key + "' in [" + section + "]");
    }
  }
}

}  // namespace tankdiag
