#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace weakkam {

/// One measured quantity against its target.
struct AcceptanceCheck {
  enum class Kind { Near, AtMost, AtLeast, Holds };

  std::string name;
  Kind kind = Kind::Near;
  double measured = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
};

AcceptanceCheck near_check(std::string name, double measured, double target, double tolerance);
AcceptanceCheck at_most_check(std::string name, double measured, double bound);
AcceptanceCheck at_least_check(std::string name, double measured, double bound);
AcceptanceCheck holds_check(std::string name, bool holds);

struct CriterionInfo {
  int id = 0;
  std::string title;
};

/// The twelve criteria in order.
const std::vector<CriterionInfo>& acceptance_criteria();

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<AcceptanceCheck> checks;
  /// Set when the computation itself failed; the criterion then fails.
  std::string error;
  double seconds = 0.0;

  bool pass() const;
  nlohmann::json to_json() const;
};

struct AcceptanceOptions {
  /// Overrides every spatial grid (LP and inf-max base grids, set sampling,
  /// weak KAM nodes). Coarse values make criteria fail in a controlled way.
  std::optional<int> grid;
  std::uint64_t seed = 2024;
  /// Kernel cache; empty falls back to WEAKKAM_CACHE_DIR.
  std::filesystem::path cache_dir;
};

/// Runs criteria one at a time. Quantities shared by several criteria (the
/// pendulum potential table, the flat of alpha) are computed once.
class AcceptanceSuite {
 public:
  struct Shared;

  explicit AcceptanceSuite(AcceptanceOptions opts = {});
  ~AcceptanceSuite();

  /// Never throws for computational failures: they land in the result.
  CriterionResult run(int id);
  std::vector<CriterionResult> run_all(const std::vector<int>& ids = {});

  const AcceptanceOptions& options() const { return opts_; }

 private:
  AcceptanceOptions opts_;
  std::unique_ptr<Shared> shared_;
};

/// {"criteria": [...], "pass": bool, "options": {...}}
nlohmann::json acceptance_report(const std::vector<CriterionResult>& results, const AcceptanceOptions& opts);

/// "criterion  7 PASS  sets and inclusions (12.3 s)"
std::string summary_line(const CriterionResult& r);

}  // namespace weakkam
