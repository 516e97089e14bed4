#include "blowup/harness/csv.hpp"

#include <cmath>
#include <stdexcept>

#include "blowup/harness/config.hpp"

namespace blowup::harness {

CsvWriter::CsvWriter(std::ostream& out, std::vector<CsvColumn> columns) : out_(out), columns_(std::move(columns)) {
  std::string header;
  for (const auto& column : columns_) {
    if (!header.empty()) header += ',';
    header += escape(column.name);
    if (column.singular) header += ',' + escape(column.name + "_is_inf");
  }
  out_ << header << '\n';
}

std::string CsvWriter::escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string CsvWriter::format(const CsvCell& cell) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) return format_number(v);
        else if constexpr (std::is_same_v<T, long long>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else return escape(v);
      },
      cell);
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
  if (cells.size() != columns_.size()) throw std::logic_error("CSV row width does not match the header");
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += format(cells[i]);
    if (columns_[i].singular) {
      const auto* x = std::get_if<double>(&cells[i]);
      line += (x && std::isinf(*x)) ? ",1" : ",0";
    }
  }
  out_ << line << '\n';
  ++rows_;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool pending = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    pending = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      pending = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (pending) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace blowup::harness
