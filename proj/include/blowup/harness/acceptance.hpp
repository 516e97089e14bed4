#pragma once

#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace blowup::harness {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs the acceptance criteria (all of them when `only` is empty). One line per criterion is
/// written to `progress` as it completes.
[[nodiscard]] std::vector<CriterionResult> run_acceptance(std::ostream* progress = nullptr,
                                                          const std::set<int>& only = {});

[[nodiscard]] bool all_passed(const std::vector<CriterionResult>& results);
[[nodiscard]] std::string format_line(const CriterionResult& result);
void write_acceptance_csv(std::ostream& out, const std::vector<CriterionResult>& results);

}  // namespace blowup::harness
