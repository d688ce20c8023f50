#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace finn::verify {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

inline constexpr int kCriterionCount = 10;

// Criteria 1..10. Exceptions inside a check become a failed result.
CheckResult run_check(int id);
std::vector<CheckResult> run_checks(const std::vector<int>& ids);

// Checks that finish in seconds: everything except the training runs.
std::vector<int> quick_ids();
std::vector<int> all_ids();

std::string check_name(int id);
// "PASS [3] name: detail (1.2 s)"
std::string format_result(const CheckResult& r);
void print_table(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace finn::verify
