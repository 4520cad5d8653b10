#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mvg {

struct CriterionInfo {
  int id = 0;
  std::string name;
  std::string summary;
  double time_limit_seconds = 0.0;  // 0: no limit
};

const std::vector<CriterionInfo>& verification_criteria();

struct VerifyOptions {
  std::uint64_t seed = 20240;
  // Criterion names or numeric ids; empty runs everything.
  std::set<std::string> only;
  // Perturbs one analytic gradient entry so the gradient check must fail.
  bool inject_gradient_fault = false;
  // Scratch space for corpus runs; a fresh temporary directory when empty.
  std::filesystem::path work_dir;
  bool keep_work_dir = false;
};

struct CriterionResult {
  CriterionInfo info;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Runs the selected criteria sequentially. Failures are reported, not thrown.
std::vector<CriterionResult> run_verification(const VerifyOptions& options = {});

std::string format_result(const CriterionResult& result);
nlohmann::json verification_to_json(const std::vector<CriterionResult>& results);

}  // namespace mvg
