#include "tankdiag/structural.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tankdiag/errors.hpp"

namespace tankdiag {

namespace {

constexpr const char* kTwoTankModel = R"(# Qualitative two-tank model.
[equations]
e1 = dx1 xf1 u
e2 = dx2 xf1 xf2
e3 = xf1 x1
e4 = xf2 x2
e5 = y1 x1
e6 = y2 x2
e7 = y3 xf1
e8 = y4 xf2

[differential]
e9 = x1 dx1
e10 = x2 dx2

[knowns]
variables = u y1 y2 y3 y4

[descriptions]
e1 = tank-1 level dynamics
e2 = tank-2 level dynamics
e3 = tank-1 outflow vs level
e4 = tank-2 outflow vs level
e5 = tank-1 level sensor
e6 = tank-2 level sensor
e7 = tank-1 outflow sensor
e8 = tank-2 outflow sensor
e9 = tank-1 level integrates its derivative
e10 = tank-2 level integrates its derivative
)";

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

StructuralModel::StructuralModel(const std::vector<EquationSpec>& equations,
                                 const std::vector<PairSpec>& pairs,
                                 const std::vector<std::string>& knowns)
    : knowns_(knowns) {
  std::vector<std::vector<std::string>> vars;
  for (const auto& eq : equations) {
    if (contains(equations_, eq.id)) throw std::invalid_argument("duplicate equation " + eq.id);
    if (eq.variables.empty()) {
      throw std::invalid_argument("equation " + eq.id + " mentions no variable");
    }
    equations_.push_back(eq.id);
    descriptions_.push_back(eq.description);
    vars.push_back(eq.variables);
  }
  for (const auto& p : pairs) {
    if (contains(equations_, p.id)) throw std::invalid_argument("duplicate equation " + p.id);
    if (p.state == p.derivative) {
      throw std::invalid_argument("differential pair " + p.id + " needs two distinct variables");
    }
    equations_.push_back(p.id);
    descriptions_.push_back(p.state + " integrates " + p.derivative);
    vars.push_back({p.state, p.derivative});
  }
  for (const auto& row : vars) {
    for (const auto& v : row) {
      if (!contains(knowns_, v) && !contains(unknowns_, v)) unknowns_.push_back(v);
    }
  }

  unknown_inc_.assign(equations_.size(), std::vector<char>(unknowns_.size(), 0));
  known_inc_.assign(equations_.size(), std::vector<char>(knowns_.size(), 0));
  for (std::size_t e = 0; e < vars.size(); ++e) {
    for (const auto& v : vars[e]) {
      auto k = std::find(knowns_.begin(), knowns_.end(), v);
      if (k != knowns_.end()) {
        known_inc_[e][static_cast<std::size_t>(k - knowns_.begin())] = 1;
      } else {
        unknown_inc_[e][*unknown_index(v)] = 1;
      }
    }
  }

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (contains(knowns_, p.state) || contains(knowns_, p.derivative)) {
      throw std::invalid_argument("differential pair " + p.id + " must relate unknowns");
    }
    const std::size_t eq = equations.size() + i;
    pairs_.push_back({*unknown_index(p.state), *unknown_index(p.derivative), eq});
  }
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs_.size(); ++j) {
      if (pairs_[i].state == pairs_[j].state) {
        throw std::invalid_argument("state " + unknowns_[pairs_[i].state] +
                                    " has more than one differential pair");
      }
    }
  }
}

StructuralModel StructuralModel::from_config(const Config& cfg) {
  const std::string& src = cfg.source();
  if (!cfg.has_section("equations")) throw ParseError(src, 0, "missing [equations] section");

  std::vector<std::string> knowns;
  for (const auto& e : cfg.entries("knowns")) {
    if (e.key != "variables") {
      throw ParseError(src, e.line, "[knowns] expects 'variables = ...', got key '" + e.key + "'");
    }
    for (auto& k : split_ws(e.value)) knowns.push_back(k);
  }

  std::vector<EquationSpec> eqs;
  for (const auto& e : cfg.entries("equations")) {
    auto vars = split_ws(e.value);
    if (vars.empty()) throw ParseError(src, e.line, "equation '" + e.key + "' lists no variables");
    eqs.push_back({e.key, vars, cfg.get_string("descriptions", e.key, "")});
  }
  std::vector<PairSpec> pairs;
  for (const auto& e : cfg.entries("differential")) {
    auto vars = split_ws(e.value);
    if (vars.size() != 2) {
      throw ParseError(src, e.line, "differential pair '" + e.key + "' needs 'state derivative'");
    }
    pairs.push_back({e.key, vars[0], vars[1]});
  }
  for (const auto& e : cfg.entries("descriptions")) {
    const bool known_eq =
        std::any_of(eqs.begin(), eqs.end(), [&](const auto& q) { return q.id == e.key; }) ||
        std::any_of(pairs.begin(), pairs.end(), [&](const auto& p) { return p.id == e.key; });
    if (!known_eq) throw ParseError(src, e.line, "description for unknown equation '" + e.key + "'");
  }

  try {
    StructuralModel model(eqs, pairs, knowns);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (auto d = cfg.get("descriptions", pairs[i].id)) {
        model.descriptions_[eqs.size() + i] = *d;
      }
    }
    return model;
  } catch (const std::invalid_argument& err) {
    throw ParseError(src, 0, err.what());
  }
}

const char* StructuralModel::two_tank_text() { return kTwoTankModel; }

StructuralModel StructuralModel::two_tank() {
  return from_config(Config::parse_string(kTwoTankModel, "two_tank"));
}

std::vector<std::size_t> StructuralModel::unknowns_of(std::size_t eq) const {
  std::vector<std::size_t> out;
  for (std::size_t x = 0; x < unknowns_.size(); ++x) {
    if (unknown_inc_[eq][x]) out.push_back(x);
  }
  return out;
}

std::vector<std::size_t> StructuralModel::unknowns_of(const EquationSet& eqs) const {
  std::vector<std::size_t> out;
  for (std::size_t x = 0; x < unknowns_.size(); ++x) {
    if (std::any_of(eqs.begin(), eqs.end(), [&](std::size_t e) { return unknown_inc_[e][x]; })) {
      out.push_back(x);
    }
  }
  return out;
}

std::vector<std::string> StructuralModel::knowns_of(const EquationSet& eqs) const {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < knowns_.size(); ++k) {
    if (std::any_of(eqs.begin(), eqs.end(), [&](std::size_t e) { return known_inc_[e][k]; })) {
      out.push_back(knowns_[k]);
    }
  }
  return out;
}

std::optional<std::size_t> StructuralModel::equation_index(const std::string& id) const {
  auto it = std::find(equations_.begin(), equations_.end(), id);
  if (it == equations_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - equations_.begin());
}

std::optional<std::size_t> StructuralModel::unknown_index(const std::string& id) const {
  auto it = std::find(unknowns_.begin(), unknowns_.end(), id);
  if (it == unknowns_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - unknowns_.begin());
}

const StructuralModel::DifferentialPair* StructuralModel::pair_of_equation(std::size_t eq) const {
  for (const auto& p : pairs_) {
    if (p.equation == eq) return &p;
  }
  return nullptr;
}

std::vector<std::string> StructuralModel::names(const EquationSet& eqs) const {
  std::vector<std::string> out;
  out.reserve(eqs.size());
  for (auto e : eqs) out.push_back(equations_.at(e));
  return out;
}

EquationSet StructuralModel::indices(const std::vector<std::string>& ids) const {
  EquationSet out;
  for (const auto& id : ids) {
    auto idx = equation_index(id);
    if (!idx) throw std::invalid_argument("unknown equation id " + id);
    out.push_back(*idx);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EquationSet StructuralModel::all_equations() const {
  EquationSet out(equations_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

// --- matching and DM decomposition -----------------------------------------

std::vector<std::optional<std::size_t>> maximum_matching(const StructuralModel& model,
                                                         const EquationSet& eqs) {
  const std::size_t nx = model.unknown_count();
  std::vector<std::optional<std::size_t>> eq_mate(eqs.size());
  std::vector<std::optional<std::size_t>> var_mate(nx);  // position in eqs

  // Kuhn's augmenting paths; sizes here are a handful of equations.
  std::vector<char> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t i) {
    for (std::size_t x = 0; x < nx; ++x) {
      if (!model.has_unknown(eqs[i], x) || seen[x]) continue;
      seen[x] = 1;
      if (!var_mate[x] || augment(*var_mate[x])) {
        var_mate[x] = i;
        eq_mate[i] = x;
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    seen.assign(nx, 0);
    augment(i);
  }
  return eq_mate;
}

std::size_t structural_redundancy(const StructuralModel& model, const EquationSet& eqs) {
  const auto mate = maximum_matching(model, eqs);
  const auto matched =
      static_cast<std::size_t>(std::count_if(mate.begin(), mate.end(), [](auto m) { return m.has_value(); }));
  return eqs.size() - matched;
}

DmPartition dm_decompose(const StructuralModel& model, const EquationSet& eqs) {
  const auto eq_mate = maximum_matching(model, eqs);
  const auto vars = model.unknowns_of(eqs);
  const std::size_t nx = model.unknown_count();
  std::vector<std::optional<std::size_t>> var_mate(nx);
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    if (eq_mate[i]) var_mate[*eq_mate[i]] = i;
  }

  // Over-determined part: alternating paths from unmatched equations.
  std::vector<char> eq_over(eqs.size(), 0), var_over(nx, 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    if (!eq_mate[i]) {
      eq_over[i] = 1;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (auto x : vars) {
      if (!model.has_unknown(eqs[i], x) || var_over[x]) continue;
      var_over[x] = 1;
      const std::size_t j = *var_mate[x];  // maximality: every reachable unknown is matched
      if (!eq_over[j]) {
        eq_over[j] = 1;
        queue.push_back(j);
      }
    }
  }

  // Under-determined part: alternating paths from unmatched unknowns.
  std::vector<char> eq_under(eqs.size(), 0), var_under(nx, 0);
  std::deque<std::size_t> vqueue;
  for (auto x : vars) {
    if (!var_mate[x]) {
      var_under[x] = 1;
      vqueue.push_back(x);
    }
  }
  while (!vqueue.empty()) {
    const std::size_t x = vqueue.front();
    vqueue.pop_front();
    for (std::size_t i = 0; i < eqs.size(); ++i) {
      if (!model.has_unknown(eqs[i], x) || eq_under[i]) continue;
      eq_under[i] = 1;
      const std::size_t y = *eq_mate[i];
      if (!var_under[y]) {
        var_under[y] = 1;
        vqueue.push_back(y);
      }
    }
  }

  DmPartition out;
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    if (eq_over[i]) {
      out.over.push_back(eqs[i]);
    } else if (eq_under[i]) {
      out.under.push_back(eqs[i]);
    } else {
      out.just.push_back(eqs[i]);
    }
  }
  for (auto x : vars) {
    if (var_over[x]) out.over_unknowns.push_back(x);
  }
  std::sort(out.over.begin(), out.over.end());
  std::sort(out.under.begin(), out.under.end());
  std::sort(out.just.begin(), out.just.end());
  return out;
}

DmPartition dm_decompose(const StructuralModel& model) {
  return dm_decompose(model, model.all_equations());
}

// --- redundant sets ----------------------------------------------------------

std::vector<RedundantSet> find_redundant_sets(const StructuralModel& model) {
  std::set<EquationSet> found;
  std::set<EquationSet> visited;

  // Top-down removal: every minimal redundant set is reached by deleting
  // equations one at a time from the over-determined part, re-taking the
  // over-determined part after each deletion.
  std::function<void(const EquationSet&)> descend = [&](const EquationSet& m) {
    if (!visited.insert(m).second) return;
    const auto dm = dm_decompose(model, m);
    if (dm.redundancy() == 1) {
      found.insert(dm.over);
      return;
    }
    for (std::size_t k = 0; k < m.size(); ++k) {
      EquationSet rest;
      rest.reserve(m.size() - 1);
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (i != k) rest.push_back(m[i]);
      }
      const auto sub = dm_decompose(model, rest);
      if (sub.redundancy() >= 1) descend(sub.over);
    }
  };

  const auto top = dm_decompose(model);
  if (top.redundancy() >= 1) descend(top.over);

  std::vector<RedundantSet> out;
  for (const auto& eqs : found) {
    RedundantSet rs;
    rs.equations = eqs;
    rs.unknowns_covered = model.unknowns_of(eqs);
    for (auto e : eqs) {
      if (!model.is_differential(e)) rs.core.push_back(e);
    }
    out.push_back(std::move(rs));
  }
  return out;
}

// --- computational sequences ---------------------------------------------------

ComputationalSequence match_equations(const RedundantSet& set, const StructuralModel& model,
                                      std::size_t residual_eq) {
  if (std::find(set.equations.begin(), set.equations.end(), residual_eq) == set.equations.end()) {
    throw std::invalid_argument("residual equation " + model.equations().at(residual_eq) +
                                " is not in the redundant set");
  }

  ComputationalSequence seq;
  seq.residual_equation = residual_eq;

  // Every remaining differential pair integrates its state; the state's
  // previous value is then available to the algebraic part.
  std::vector<Assignment> integrations;
  std::vector<char> computed(model.unknown_count(), 0);
  std::vector<std::size_t> algebraic;
  for (auto e : set.equations) {
    if (e == residual_eq) continue;
    if (const auto* pair = model.pair_of_equation(e)) {
      integrations.push_back({pair->state, e, Causality::integral});
      computed[pair->state] = 1;
    } else {
      algebraic.push_back(e);
    }
  }

  std::vector<std::size_t> pending;
  for (auto x : set.unknowns_covered) {
    if (!computed[x]) pending.push_back(x);
  }
  if (algebraic.size() != pending.size()) {
    throw NoIntegralMatching("equation set cannot be solved without differentiating a state");
  }

  std::vector<char> used(algebraic.size(), 0);
  for (std::size_t step = 0; step < algebraic.size(); ++step) {
    bool progressed = false;
    for (std::size_t i = 0; i < algebraic.size() && !progressed; ++i) {
      if (used[i]) continue;
      std::optional<std::size_t> only;
      std::size_t open = 0;
      for (auto x : model.unknowns_of(algebraic[i])) {
        if (!computed[x]) {
          ++open;
          only = x;
        }
      }
      if (open == 1) {
        used[i] = 1;
        computed[*only] = 1;
        seq.assignments.push_back({*only, algebraic[i], Causality::algebraic});
        progressed = true;
      }
    }
    if (!progressed) {
      // Either a leftover equation has no unknown left (it would need a
      // differentiated state) or the rest forms an algebraic loop. Neither
      // yields a sequential integral-causality computation.
      throw NoIntegralMatching("no sequential integral-causality computation for this set");
    }
  }

  for (const auto& a : integrations) {
    const auto* pair = model.pair_of_equation(a.equation);
    if (!computed[pair->derivative]) {
      throw NoIntegralMatching("derivative " + model.unknowns()[pair->derivative] +
                               " is never computed");
    }
    seq.assignments.push_back(a);
  }
  return seq;
}

std::string describe(const ComputationalSequence& seq, const StructuralModel& model) {
  std::ostringstream out;
  for (const auto& a : seq.assignments) {
    out << model.unknowns()[a.unknown] << " <- " << model.equations()[a.equation];
    if (a.causality == Causality::integral) out << " (integrate)";
    out << "; ";
  }
  out << "residual " << model.equations()[seq.residual_equation];
  return out.str();
}

// --- signature and isolability -------------------------------------------------

BoolMatrix::BoolMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_ids)
    : rows(std::move(row_ids)), cols(std::move(col_ids)), cells(rows.size() * cols.size(), 0) {}

std::string BoolMatrix::to_csv() const {
  std::ostringstream out;
  out << "id";
  for (const auto& c : cols) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << rows[i];
    for (std::size_t j = 0; j < cols.size(); ++j) out << ',' << (at(i, j) ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

BoolMatrix fault_signature_matrix(const std::vector<std::string>& residual_ids,
                                  const std::vector<std::vector<std::string>>& supports,
                                  const std::vector<std::string>& equation_ids) {
  if (residual_ids.size() != supports.size()) {
    throw std::invalid_argument("one support per residual required");
  }
  BoolMatrix m(residual_ids, equation_ids);
  for (std::size_t i = 0; i < supports.size(); ++i) {
    for (const auto& e : supports[i]) {
      auto it = std::find(equation_ids.begin(), equation_ids.end(), e);
      if (it == equation_ids.end()) throw std::invalid_argument("support names unknown equation " + e);
      m.set(i, static_cast<std::size_t>(it - equation_ids.begin()), true);
    }
  }
  return m;
}

BoolMatrix isolability_matrix(const BoolMatrix& signature) {
  BoolMatrix out(signature.cols, signature.cols);
  const std::size_t n = signature.cols.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      bool indistinct = true;
      for (std::size_t r = 0; r < signature.rows.size() && indistinct; ++r) {
        if (signature.at(r, i) && !signature.at(r, j)) indistinct = false;
      }
      out.set(i, j, indistinct);
    }
  }
  return out;
}

}  // namespace tankdiag
