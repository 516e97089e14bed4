#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace blowup::harness {

/// Malformed input or command line; maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ConfigValue = std::variant<bool, double, std::string, std::vector<double>, std::vector<std::string>>;

/// Flat view of a TOML-subset document: keys are full dotted paths ("forcing.p").
///
/// Supported: [section] headers, key = value, bare or quoted keys, basic strings with escapes,
/// booleans, numbers (including inf/nan), homogeneous arrays of numbers or strings that may span
/// lines, and # comments. Tables-in-arrays, dates and inline tables are rejected.
class Config {
 public:
  static Config parse(std::string_view text, std::string_view origin = "<config>");
  static Config load(const std::filesystem::path& path);

  [[nodiscard]] bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  [[nodiscard]] const ConfigValue& at(const std::string& key) const;
  void set(const std::string& key, ConfigValue value) { entries_[key] = std::move(value); }
  void erase(const std::string& key) { entries_.erase(key); }
  [[nodiscard]] const std::map<std::string, ConfigValue>& entries() const noexcept { return entries_; }

  [[nodiscard]] double number(const std::string& key) const;
  [[nodiscard]] int integer(const std::string& key) const;
  [[nodiscard]] bool flag(const std::string& key) const;
  [[nodiscard]] const std::string& text(const std::string& key) const;
  [[nodiscard]] std::vector<double> numbers(const std::string& key) const;

  /// Serialises back into the same subset, grouped by section; keys under `verbatim_tables`
  /// are written as quoted keys of that table (e.g. sweep axes).
  [[nodiscard]] std::string dump(const std::vector<std::string>& verbatim_tables = {}) const;

 private:
  std::map<std::string, ConfigValue> entries_;
};

/// %.17g, with inf / -inf / nan spelled as in TOML.
[[nodiscard]] std::string format_number(double value);
[[nodiscard]] std::string format_value(const ConfigValue& value);
[[nodiscard]] std::string_view type_name(const ConfigValue& value) noexcept;

}  // namespace blowup::harness
