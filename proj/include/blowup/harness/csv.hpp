#pragma once

#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace blowup::harness {

using CsvCell = std::variant<double, long long, std::string, bool>;

/// Named value of a summary row; singular fields get an "_is_inf" companion column.
struct Field {
  std::string name;
  CsvCell value;
  bool singular = false;
};
using Record = std::vector<Field>;

struct CsvColumn {
  std::string name;
  /// Adds a companion "<name>_is_inf" column; infinite values are written as the token inf.
  bool singular = false;
};

/// RFC 4180 writer: LF line endings, '.' decimal point, 17 significant digits, quoting only when a
/// field contains a comma, quote or line break.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<CsvColumn> columns);

  void row(const std::vector<CsvCell>& cells);
  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }

  [[nodiscard]] static std::string escape(const std::string& field);
  [[nodiscard]] static std::string format(const CsvCell& cell);

 private:
  std::ostream& out_;
  std::vector<CsvColumn> columns_;
  std::size_t rows_ = 0;
};

/// Splits one CSV document into rows of unescaped fields (used to read artifacts back in tests).
[[nodiscard]] std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace blowup::harness
