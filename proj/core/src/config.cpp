#include "diffquad/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace diffquad {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& key, const std::string& value) {
  std::istringstream iss(value);
  std::vector<double> out;
  double d = 0.0;
  while (iss >> d) out.push_back(d);
  if (out.empty() || !iss.eof())
    throw std::runtime_error("config key '" + key + "': expected numbers, got '" +
                             value + "'");
  return out;
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.entries_.emplace_back(key, value);
  }
  return cfg;
}

bool Config::has(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return true;
  return false;
}

std::optional<std::string> Config::find(const std::string& key) const {
  consumed_.insert(key);
  const std::string* last = nullptr;
  for (const auto& [k, v] : entries_)
    if (k == key) last = &v;
  if (!last) return std::nullopt;
  return *last;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  const auto nums = parse_numbers(key, *v);
  if (nums.size() != 1)
    throw std::runtime_error("config key '" + key + "': expected one number");
  return nums[0];
}

int Config::get_int(const std::string& key, int fallback) const {
  const double d = get_double(key, static_cast<double>(fallback));
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d)
    throw std::runtime_error("config key '" + key + "': expected an integer");
  return i;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "on" || *v == "1") return true;
  if (*v == "false" || *v == "off" || *v == "0") return false;
  throw std::runtime_error("config key '" + key + "': expected a boolean, got '" +
                           *v + "'");
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  const auto v = find(key);
  return v ? *v : fallback;
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  return parse_numbers(key, *v);
}

std::vector<std::vector<double>> Config::get_all_doubles(const std::string& key) const {
  consumed_.insert(key);
  std::vector<std::vector<double>> out;
  for (const auto& [k, v] : entries_)
    if (k == key) out.push_back(parse_numbers(key, v));
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void Config::require_all_consumed() const {
  std::string unknown;
  for (const auto& [k, v] : entries_) {
    if (!consumed_.count(k)) {
      if (!unknown.empty()) unknown += ", ";
      unknown += k;
    }
  }
  if (!unknown.empty())
    throw std::runtime_error(origin_ + ": unknown config keys: " + unknown);
}

}  // namespace diffquad
