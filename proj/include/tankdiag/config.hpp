#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tankdiag {

/// Sectioned `key = value` text configuration.
///
///     # comment
///     [plant]
///     d1 = 0.1
///
/// Keys before the first section header belong to the section "". Entry
/// order is preserved so structural models keep their declaration order.
class Config {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
  };

  static Config parse(std::istream& in, const std::string& source = "<input>");
  static Config parse_string(const std::string& text, const std::string& source = "<string>");
  static Config load(const std::filesystem::path& path);

  const std::string& source() const { return source_; }
  bool has_section(const std::string& section) const;
  std::vector<std::string> sections() const;
  const std::vector<Entry>& entries(const std::string& section) const;

  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  /// Throws ParseError naming the line of the first key in `section` that
  /// is not in `allowed`.
  void require_keys(const std::string& section, const std::vector<std::string>& allowed) const;

 private:
  const Entry* find(const std::string& section, const std::string& key) const;

  std::string source_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<Entry>> sections_;
};

std::string trim(const std::string& s);
std::vector<std::string> split_ws(const std::string& s);

}  // namespace tankdiag
