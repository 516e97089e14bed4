#include "blowup/harness/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace blowup::harness {

namespace {

class Cursor {
 public:
  Cursor(std::string_view text, std::string_view origin, int line) : text_(text), origin_(origin), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw UsageError(std::string(origin_) + ":" + std::to_string(line_) + ": " + what);
  }

  void skip_blank() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r' ||
                                   text_[pos_] == '\n')) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ < text_.size() && text_[pos_] == '#') {
      while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      skip_blank();
    }
  }
  void skip_inline() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
  }
  [[nodiscard]] bool done() const { return pos_ >= text_.size(); }
  [[nodiscard]] char peek() const { return done() ? '\0' : text_[pos_]; }
  char take() { return text_[pos_++]; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  [[nodiscard]] int line() const { return line_; }

  // After a value or header: only blanks and a comment until the end of the line.
  void end_of_line() {
    skip_inline();
    if (peek() == '#')
      while (!done() && peek() != '\n') ++pos_;
    if (!done() && peek() != '\n') fail("unexpected trailing characters");
  }

  std::string quoted() {
    expect('"');
    std::string out;
    while (true) {
      if (done() || peek() == '\n') fail("unterminated string");
      const char c = take();
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (done()) fail("unterminated escape");
      switch (take()) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail("unsupported escape sequence");
      }
    }
  }

  std::string bare_key() {
    std::string out;
    while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) out += take();
    if (out.empty()) fail("expected a key");
    return out;
  }

  // Dotted key, each segment bare or quoted; quoted segments keep their dots.
  std::string key() {
    std::string out;
    while (true) {
      skip_inline();
      out += peek() == '"' ? quoted() : bare_key();
      skip_inline();
      if (peek() != '.') return out;
      ++pos_;
      out += '.';
    }
  }

  double number() {
    const std::size_t start = pos_;
    while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                       peek() == '.' || peek() == '_'))
      ++pos_;
    std::string token(text_.substr(start, pos_ - start));
    std::erase(token, '_');
    if (token.empty()) fail("expected a value");
    std::string_view body = token;
    double sign = 1.0;
    if (body.front() == '+' || body.front() == '-') {
      sign = body.front() == '-' ? -1.0 : 1.0;
      body.remove_prefix(1);
    }
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    double value = 0.0;
    const auto [end, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
    if (ec != std::errc() || end != body.data() + body.size()) fail("malformed number '" + token + "'");
    return sign * value;
  }

  ConfigValue scalar() {
    if (peek() == '"') return quoted();
    if (text_.substr(pos_).starts_with("true")) {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_).starts_with("false")) {
      pos_ += 5;
      return false;
    }
    return number();
  }

  ConfigValue value() {
    skip_inline();
    if (peek() != '[') return scalar();
    ++pos_;
    std::vector<double> numbers;
    std::vector<std::string> strings;
    while (true) {
      skip_blank();
      if (peek() == ']') {
        ++pos_;
        break;
      }
      if (done()) fail("unterminated array");
      const ConfigValue item = scalar();
      if (const auto* x = std::get_if<double>(&item)) numbers.push_back(*x);
      else if (const auto* s = std::get_if<std::string>(&item)) strings.push_back(*s);
      else fail("arrays hold numbers or strings");
      if (!numbers.empty() && !strings.empty()) fail("mixed array");
      skip_blank();
      if (peek() == ',') ++pos_;
      else if (peek() != ']') fail("expected ',' or ']' in array");
    }
    if (!strings.empty()) return strings;
    return numbers;
  }

 private:
  std::string_view text_;
  std::string_view origin_;
  int line_;
  std::size_t pos_ = 0;
};

std::string quote(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + '"';
}

bool is_bare(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  return true;
}

std::string write_key(const std::string& key) { return is_bare(key) ? key : quote(key); }

}  // namespace

Config Config::parse(std::string_view text, std::string_view origin) {
  Config config;
  Cursor in(text, origin, 1);
  std::string section;
  while (true) {
    in.skip_blank();
    if (in.done()) break;
    if (in.peek() == '[') {
      in.take();
      if (in.peek() == '[') in.fail("arrays of tables are not supported");
      section = in.key();
      in.expect(']');
      in.end_of_line();
      continue;
    }
    const int line = in.line();
    const std::string key = in.key();
    in.skip_inline();
    in.expect('=');
    ConfigValue value = in.value();
    in.end_of_line();
    const std::string full = section.empty() ? key : section + "." + key;
    if (config.contains(full))
      throw UsageError(std::string(origin) + ":" + std::to_string(line) + ": duplicate key '" + full + "'");
    config.entries_.emplace(full, std::move(value));
  }
  return config;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw UsageError("cannot read config file " + path.string());
  std::ostringstream text;
  text << file.rdbuf();
  return parse(text.str(), path.string());
}

const ConfigValue& Config::at(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw UsageError("missing config key '" + key + "'");
  return it->second;
}

double Config::number(const std::string& key) const {
  const auto* x = std::get_if<double>(&at(key));
  if (!x) throw UsageError("config key '" + key + "' must be a number");
  return *x;
}

int Config::integer(const std::string& key) const {
  const double x = number(key);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw UsageError("config key '" + key + "' must be an integer");
  return static_cast<int>(x);
}

bool Config::flag(const std::string& key) const {
  const auto* x = std::get_if<bool>(&at(key));
  if (!x) throw UsageError("config key '" + key + "' must be a boolean");
  return *x;
}

const std::string& Config::text(const std::string& key) const {
  const auto* x = std::get_if<std::string>(&at(key));
  if (!x) throw UsageError("config key '" + key + "' must be a string");
  return *x;
}

std::vector<double> Config::numbers(const std::string& key) const {
  const auto* x = std::get_if<std::vector<double>>(&at(key));
  if (!x) throw UsageError("config key '" + key + "' must be an array of numbers");
  return *x;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string format_value(const ConfigValue& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, double>) return format_number(v);
        else if constexpr (std::is_same_v<T, std::string>) return quote(v);
        else {
          std::string out = "[";
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            if constexpr (std::is_same_v<T, std::vector<double>>) out += format_number(v[i]);
            else out += quote(v[i]);
          }
          return out + "]";
        }
      },
      value);
}

std::string_view type_name(const ConfigValue& value) noexcept {
  constexpr std::string_view names[] = {"boolean", "number", "string", "number array", "string array"};
  return names[value.index()];
}

std::string Config::dump(const std::vector<std::string>& verbatim_tables) const {
  // section -> ordered (key, value) lines
  std::map<std::string, std::vector<std::pair<std::string, const ConfigValue*>>> sections;
  for (const auto& [full, value] : entries_) {
    std::string section;
    std::string key = full;
    bool placed = false;
    for (const auto& table : verbatim_tables) {
      if (full.size() > table.size() + 1 && full.starts_with(table + ".")) {
        section = table;
        key = full.substr(table.size() + 1);
        placed = true;
        break;
      }
    }
    if (!placed) {
      const auto dot = full.rfind('.');
      if (dot != std::string::npos) {
        section = full.substr(0, dot);
        key = full.substr(dot + 1);
      }
    }
    sections[section].emplace_back(key, &value);
  }
  std::string out;
  for (const auto& [section, lines] : sections) {
    if (!section.empty()) out += (out.empty() ? "[" : "\n[") + section + "]\n";
    for (const auto& [key, value] : lines) out += write_key(key) + " = " + format_value(*value) + "\n";
  }
  return out;
}

}  // namespace blowup::harness
