#pragma once

#include <functional>
#include <string>
#include <vector>

namespace fluctlab {

struct SelfTestResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// The definition-level checks (periodicity, conservation, fixed points,
/// gauge, cancellation, ...) that every build must satisfy. Runs them all
/// and never throws; an exception inside a check counts as a failure.
std::vector<SelfTestResult> run_selftests();

}  // namespace fluctlab
