#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tankdiag/config.hpp"

namespace tankdiag {

/// Sorted list of equation indices into StructuralModel::equations().
using EquationSet = std::vector<std::size_t>;

/// Qualitative model as a bipartite equation/variable incidence structure.
///
/// Variables are either unknown or known. A differential pair equation
/// links a state to its time derivative (both unknowns); structurally it is
/// an ordinary equation, but matching treats it as an integrator.
class StructuralModel {
 public:
  struct DifferentialPair {
    std::size_t state;       // index into unknowns()
    std::size_t derivative;  // index into unknowns()
    std::size_t equation;    // index into equations()
  };

  struct EquationSpec {
    std::string id;
    std::vector<std::string> variables;
    std::string description;
  };

  struct PairSpec {
    std::string id;
    std::string state;
    std::string derivative;
  };

  /// Builds and validates the model. Unknowns are every variable not listed
  /// in `knowns`, ordered by first appearance. Throws std::invalid_argument
  /// when an invariant is violated.
  StructuralModel(const std::vector<EquationSpec>& equations, const std::vector<PairSpec>& pairs,
                  const std::vector<std::string>& knowns);

  /// Reads `[equations]`, `[differential]`, `[knowns]` and optional
  /// `[descriptions]` sections. Errors carry the offending line.
  static StructuralModel from_config(const Config& cfg);

  /// The two-tank model: e1..e8 plus the pairs e9 (x1, dx1) and e10 (x2, dx2).
  static StructuralModel two_tank();
  static const char* two_tank_text();

  const std::vector<std::string>& equations() const { return equations_; }
  const std::vector<std::string>& unknowns() const { return unknowns_; }
  const std::vector<std::string>& knowns() const { return knowns_; }
  const std::vector<DifferentialPair>& differential_pairs() const { return pairs_; }

  std::size_t equation_count() const { return equations_.size(); }
  std::size_t unknown_count() const { return unknowns_.size(); }

  bool has_unknown(std::size_t eq, std::size_t x) const { return unknown_inc_[eq][x] != 0; }
  bool has_known(std::size_t eq, std::size_t k) const { return known_inc_[eq][k] != 0; }

  std::vector<std::size_t> unknowns_of(std::size_t eq) const;
  std::vector<std::size_t> unknowns_of(const EquationSet& eqs) const;
  std::vector<std::string> knowns_of(const EquationSet& eqs) const;

  std::optional<std::size_t> equation_index(const std::string& id) const;
  std::optional<std::size_t> unknown_index(const std::string& id) const;
  const std::string& description(std::size_t eq) const { return descriptions_[eq]; }

  /// Pair whose equation is `eq`, if any.
  const DifferentialPair* pair_of_equation(std::size_t eq) const;
  bool is_differential(std::size_t eq) const { return pair_of_equation(eq) != nullptr; }

  std::vector<std::string> names(const EquationSet& eqs) const;
  EquationSet indices(const std::vector<std::string>& ids) const;
  EquationSet all_equations() const;

 private:
  std::vector<std::string> equations_;
  std::vector<std::string> descriptions_;
  std::vector<std::string> unknowns_;
  std::vector<std::string> knowns_;
  std::vector<std::vector<char>> unknown_inc_;
  std::vector<std::vector<char>> known_inc_;
  std::vector<DifferentialPair> pairs_;
};

struct DmPartition {
  EquationSet under;
  EquationSet just;
  EquationSet over;
  std::vector<std::size_t> over_unknowns;

  /// |over| - |unknowns reachable in the over-determined part|.
  std::size_t redundancy() const { return over.size() - over_unknowns.size(); }
};

/// Maximum matching between `eqs` and the unknowns they touch. Returns the
/// matched unknown per entry of `eqs` (nullopt if unmatched).
std::vector<std::optional<std::size_t>> maximum_matching(const StructuralModel& model,
                                                         const EquationSet& eqs);

/// Coarse Dulmage-Mendelsohn decomposition of the sub-model `eqs`.
DmPartition dm_decompose(const StructuralModel& model, const EquationSet& eqs);
DmPartition dm_decompose(const StructuralModel& model);

/// |eqs| minus the size of a maximum matching onto unknowns.
std::size_t structural_redundancy(const StructuralModel& model, const EquationSet& eqs);

struct RedundantSet {
  EquationSet equations;
  std::vector<std::size_t> unknowns_covered;
  /// `equations` without differential pair equations.
  EquationSet core;
};

/// All minimal redundant (redundancy-one) equation sets, ordered
/// lexicographically by equation index.
std::vector<RedundantSet> find_redundant_sets(const StructuralModel& model);

enum class Causality { algebraic, integral };

struct Assignment {
  std::size_t unknown;
  std::size_t equation;
  Causality causality = Causality::algebraic;
};

struct ComputationalSequence {
  std::vector<Assignment> assignments;
  std::size_t residual_equation = 0;
};

/// Computational sequence for `set` with `residual_eq` left over as the
/// residual. Differential pairs are only ever used to integrate their state.
/// Throws std::invalid_argument if `residual_eq` is not in the set and
/// NoIntegralMatching if every sequence would need derivative causality.
ComputationalSequence match_equations(const RedundantSet& set, const StructuralModel& model,
                                      std::size_t residual_eq);

std::string describe(const ComputationalSequence& seq, const StructuralModel& model);

/// Dense boolean matrix with row and column ids.
struct BoolMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<char> cells;

  BoolMatrix() = default;
  BoolMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_ids);

  bool at(std::size_t i, std::size_t j) const { return cells[i * cols.size() + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { cells[i * cols.size() + j] = v ? 1 : 0; }

  /// `id,c1,c2,...` header, then one `row,0,1,...` line per row.
  std::string to_csv() const;
  bool operator==(const BoolMatrix&) const = default;
};

/// Residuals x equations; entry true iff the equation is in the support.
BoolMatrix fault_signature_matrix(const std::vector<std::string>& residual_ids,
                                  const std::vector<std::vector<std::string>>& supports,
                                  const std::vector<std::string>& equation_ids);

/// Equations x equations; entry (i, j) true iff a fault in e_i cannot be
/// isolated from a fault in e_j, i.e. every residual supporting e_i also
/// supports e_j.
BoolMatrix isolability_matrix(const BoolMatrix& signature);

}  // namespace tankdiag
