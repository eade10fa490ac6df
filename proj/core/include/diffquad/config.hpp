#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace diffquad {

/// Flat key/value configuration document. Lines look like
///
///   key = value [value ...]     # comment
///
/// Keys may repeat (used for explicit cylinder lists in scene files).
/// Every consumer marks the keys it reads; require_all_consumed() rejects
/// documents containing keys nobody recognized.
class Config {
 public:
  Config() = default;

  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;

  /// All values of a repeated key, in file order.
  std::vector<std::vector<double>> get_all_doubles(const std::string& key) const;

  /// Insert or replace a key (CLI overrides take this path: CLI > file > defaults).
  void set(const std::string& key, const std::string& value);

  /// Throws listing every key no consumer claimed.
  void require_all_consumed() const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::optional<std::string> find(const std::string& key) const;

  std::string origin_ = "<empty>";
  std::vector<std::pair<std::string, std::string>> entries_;
  mutable std::set<std::string> consumed_;
};

}  // namespace diffquad
