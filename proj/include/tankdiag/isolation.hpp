#pragma once

#include <string>
#include <vector>

#include "tankdiag/detection.hpp"
#include "tankdiag/structural.hpp"

namespace tankdiag {

/// Sorted set of equation ids.
using Candidate = std::vector<std::string>;

/// Natural order for ids such as e2 < e10.
bool id_less(const std::string& a, const std::string& b);
/// Cardinality first, then element-wise natural order.
bool candidate_less(const Candidate& a, const Candidate& b);

struct SupportTable {
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> supports;

  const std::vector<std::string>& support(const std::string& id) const;
};

struct SingleFaultResult {
  bool no_fault = false;  // nothing alarmed
  Candidate equations;    // intersection of alarmed supports
};

/// Intersection of the supports of the alarmed residuals. Residuals that do
/// not alarm carry no information.
SingleFaultResult isolate_single(const std::vector<std::string>& alarmed, const SupportTable& table);

/// All minimal hitting sets of the conflicts (HS-tree, breadth first, with
/// subset closing), ranked by candidate_less. Every conflict must be nonempty.
std::vector<Candidate> minimal_hitting_sets(const std::vector<Candidate>& conflicts);

enum class DiagnosisMode { single, multiple };

std::string to_string(DiagnosisMode m);
DiagnosisMode parse_diagnosis_mode(const std::string& s);

struct Diagnosis {
  DiagnosisMode mode = DiagnosisMode::single;
  std::vector<std::string> alarmed;
  bool no_fault = false;
  /// Alarms exist but no single equation explains all of them.
  bool inconsistent_pattern = false;
  std::vector<Candidate> candidates;
  /// Parallel to `candidates`: descriptions of the member equations.
  std::vector<std::vector<std::string>> descriptions;

  std::string to_csv() const;
  std::string to_text() const;
};

/// Builds the diagnosis for the residuals alarmed in `report`. Descriptions
/// come from `model` when given.
Diagnosis diagnose(const AlarmReport& report, const SupportTable& table, DiagnosisMode mode,
                   const StructuralModel* model = nullptr);
Diagnosis diagnose(const std::vector<std::string>& alarmed, const SupportTable& table, DiagnosisMode mode,
                   const StructuralModel* model = nullptr);

}  // namespace tankdiag
