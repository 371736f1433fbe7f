#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "tankdiag/errors.hpp"
#include "tankdiag/structural.hpp"

using namespace tankdiag;

namespace {

std::vector<std::string> table1_equations() { return {"e1", "e2", "e3", "e4", "e5", "e6", "e7", "e8"}; }

const std::vector<std::string> kResidualIds = {"r1", "r2", "r3", "r4", "r5", "r6", "r7"};

// Model supports of the seven residuals, one row per residual.
const std::vector<std::vector<std::string>> kSupports = {
    {"e4", "e6", "e8"},       {"e3", "e5", "e7"},       {"e2", "e4", "e7", "e8"},
    {"e2", "e3", "e4", "e5", "e6"}, {"e1", "e3", "e7"},       {"e1", "e5", "e7"},
    {"e1", "e2", "e3", "e4", "e6"},
};

StructuralModel single(const std::vector<std::string>& vars, const std::vector<std::string>& knowns) {
  return StructuralModel({{"e", vars, ""}}, {}, knowns);
}

}  // namespace

TEST_CASE("two-tank model layout") {
  const auto m = StructuralModel::two_tank();
  CHECK(m.equation_count() == 10);
  CHECK(m.unknown_count() == 6);
  CHECK(m.knowns() == std::vector<std::string>{"u", "y1", "y2", "y3", "y4"});
  REQUIRE(m.differential_pairs().size() == 2);
  for (const auto& p : m.differential_pairs()) {
    // pair equations touch exactly their state and derivative
    CHECK(m.unknowns_of(p.equation) == std::vector<std::size_t>{std::min(p.state, p.derivative),
                                                                 std::max(p.state, p.derivative)});
  }
  CHECK(m.description(0) == "tank-1 level dynamics");
}

TEST_CASE("model invariants are enforced") {
  CHECK_THROWS_AS(StructuralModel({{"e1", {}, ""}}, {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(StructuralModel({{"e1", {"x"}, ""}, {"e1", {"x"}, ""}}, {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(StructuralModel({{"e1", {"x", "u"}, ""}}, {{"e2", "u", "x"}}, {"u"}),
                  std::invalid_argument);
}

TEST_CASE("model config errors carry line numbers") {
  const char* text = "[equations]\ne1 = x y\n[differential]\ne2 = x\n";
  try {
    StructuralModel::from_config(Config::parse_string(text, "bad.model"));
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.line() == 4);
  }
  CHECK_THROWS_AS(Config::parse_string("[equations\n"), ParseError);
  CHECK_THROWS_AS(Config::parse_string("[equations]\ne1 x y\n"), ParseError);
}

TEST_CASE("dm_decompose examples") {
  SUBCASE("two-tank model is entirely over-determined") {
    const auto m = StructuralModel::two_tank();
    const auto dm = dm_decompose(m);
    CHECK(dm.under.empty());
    CHECK(dm.just.empty());
    CHECK(dm.over == m.all_equations());
    CHECK(dm.redundancy() == 4);
    const auto ref = oracle::dm(m, m.all_equations());
    CHECK(ref.over == dm.over);
  }
  SUBCASE("y = x is exactly determined") {
    const auto m = single({"y", "x"}, {"y"});
    const auto dm = dm_decompose(m);
    CHECK(dm.over.empty());
    CHECK(dm.just == EquationSet{0});
  }
  SUBCASE("an equation of knowns only is over-determined") {
    const auto m = single({"y", "u"}, {"y", "u"});
    const auto dm = dm_decompose(m);
    CHECK(dm.over == EquationSet{0});
    CHECK(dm.redundancy() == 1);
  }
}

TEST_CASE("dm_decompose agrees with exhaustive matching enumeration") {
  std::mt19937 rng(20240611);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = oracle::random_model(rng, 8, 6);
    const auto dm = dm_decompose(m);
    const auto ref = oracle::dm(m, m.all_equations());
    INFO("trial " << trial);
    CHECK(dm.over == ref.over);
    CHECK(dm.just == ref.just);
    CHECK(dm.under == ref.under);
    CHECK(dm.over.size() >= dm.over_unknowns.size());
  }
}

TEST_CASE("find_redundant_sets on the two-tank model") {
  const auto m = StructuralModel::two_tank();
  const auto sets = find_redundant_sets(m);
  std::vector<EquationSet> got;
  for (const auto& s : sets) got.push_back(s.equations);
  CHECK(got == oracle::minimal_redundant_sets(m));
  CHECK(std::is_sorted(got.begin(), got.end()));

  auto has_core = [&](const std::vector<std::string>& ids) {
    const auto want = m.indices(ids);
    return std::any_of(sets.begin(), sets.end(), [&](const RedundantSet& s) { return s.core == want; });
  };
  CHECK(has_core({"e1", "e3", "e5"}));
  CHECK(has_core({"e4", "e6", "e8"}));
  for (const auto& support : kSupports) CHECK(has_core(support));

  // {e1, e3, e5} is reported together with the integrator e9.
  const auto e135 = std::find_if(sets.begin(), sets.end(), [&](const RedundantSet& s) {
    return s.core == m.indices({"e1", "e3", "e5"});
  });
  REQUIRE(e135 != sets.end());
  CHECK(m.names(e135->equations) == std::vector<std::string>{"e1", "e3", "e5", "e9"});

  for (const auto& s : sets) {
    CHECK(s.equations.size() == s.unknowns_covered.size() + 1);
    for (std::size_t k = 0; k < s.equations.size(); ++k) {
      EquationSet rest = s.equations;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
      CHECK(structural_redundancy(m, rest) == 0);
    }
  }
}

TEST_CASE("find_redundant_sets agrees with subset enumeration on random models") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const auto m = oracle::random_model(rng, 8, 6);
    std::vector<EquationSet> got;
    for (const auto& s : find_redundant_sets(m)) got.push_back(s.equations);
    INFO("trial " << trial);
    CHECK(got == oracle::minimal_redundant_sets(m));
  }
}

TEST_CASE("exactly determined model has no redundant sets") {
  const auto m = StructuralModel({{"e1", {"x1", "u"}, ""}, {"e2", {"x1", "x2"}, ""}}, {}, {"u"});
  CHECK(find_redundant_sets(m).empty());
}

TEST_CASE("match_equations") {
  const auto m = StructuralModel::two_tank();
  const auto sets = find_redundant_sets(m);
  auto set_with_core = [&](const std::vector<std::string>& ids) {
    const auto want = m.indices(ids);
    return *std::find_if(sets.begin(), sets.end(), [&](const RedundantSet& s) { return s.core == want; });
  };
  auto x = [&](const char* id) { return *m.unknown_index(id); };
  auto e = [&](const char* id) { return *m.equation_index(id); };

  SUBCASE("{e1, e3, e5} with residual e5 integrates x1") {
    const auto seq = match_equations(set_with_core({"e1", "e3", "e5"}), m, e("e5"));
    REQUIRE(seq.assignments.size() == 3);
    CHECK(seq.assignments[0].unknown == x("xf1"));
    CHECK(seq.assignments[0].equation == e("e3"));
    CHECK(seq.assignments[1].unknown == x("dx1"));
    CHECK(seq.assignments[1].equation == e("e1"));
    CHECK(seq.assignments[2].unknown == x("x1"));
    CHECK(seq.assignments[2].equation == e("e9"));
    CHECK(seq.assignments[2].causality == Causality::integral);
    CHECK(seq.residual_equation == e("e5"));
  }
  SUBCASE("{e4, e6, e8} with residual e8 is a static chain") {
    const auto seq = match_equations(set_with_core({"e4", "e6", "e8"}), m, e("e8"));
    REQUIRE(seq.assignments.size() == 2);
    CHECK(seq.assignments[0].unknown == x("x2"));
    CHECK(seq.assignments[0].equation == e("e6"));
    CHECK(seq.assignments[1].unknown == x("xf2"));
    CHECK(seq.assignments[1].equation == e("e4"));
    for (const auto& a : seq.assignments) CHECK(a.causality == Causality::algebraic);
  }
  SUBCASE("residual equation outside the set") {
    CHECK_THROWS_AS(match_equations(set_with_core({"e4", "e6", "e8"}), m, e("e1")), std::invalid_argument);
  }
  SUBCASE("using e1 as residual would need dy1/dt") {
    CHECK_THROWS_AS(match_equations(set_with_core({"e1", "e3", "e5"}), m, e("e1")), NoIntegralMatching);
  }
  SUBCASE("sequences replay without touching unassigned unknowns") {
    for (const auto& s : sets) {
      for (auto res : s.equations) {
        ComputationalSequence seq;
        try {
          seq = match_equations(s, m, res);
        } catch (const NoIntegralMatching&) {
          continue;
        }
        std::vector<char> known(m.unknown_count(), 0);
        for (const auto& p : m.differential_pairs()) {
          for (const auto& a : seq.assignments) {
            if (a.causality == Causality::integral && a.unknown == p.state) known[p.state] = 1;
          }
        }
        std::set<std::size_t> assigned;
        for (const auto& a : seq.assignments) {
          CHECK(assigned.insert(a.unknown).second);
          if (a.causality == Causality::algebraic) {
            for (auto v : m.unknowns_of(a.equation)) {
              if (v != a.unknown) CHECK(known[v]);
            }
            CHECK_FALSE(m.is_differential(a.equation));
            known[a.unknown] = 1;
          } else {
            CHECK(known[m.pair_of_equation(a.equation)->derivative]);
          }
        }
        CHECK(assigned.size() == s.unknowns_covered.size());
      }
    }
  }
}

TEST_CASE("fault signature matrix reproduces the residual supports") {
  const auto sig = fault_signature_matrix(kResidualIds, kSupports, table1_equations());
  CHECK(sig.to_csv() ==
        "id,e1,e2,e3,e4,e5,e6,e7,e8\n"
        "r1,0,0,0,1,0,1,0,1\n"
        "r2,0,0,1,0,1,0,1,0\n"
        "r3,0,1,0,1,0,0,1,1\n"
        "r4,0,1,1,1,1,1,0,0\n"
        "r5,1,0,1,0,0,0,1,0\n"
        "r6,1,0,0,0,1,0,1,0\n"
        "r7,1,1,1,1,0,1,0,0\n");

  const auto empty = fault_signature_matrix({"r"}, {{}}, table1_equations());
  for (std::size_t j = 0; j < 8; ++j) CHECK_FALSE(empty.at(0, j));
  const auto full = fault_signature_matrix({"r"}, {table1_equations()}, table1_equations());
  for (std::size_t j = 0; j < 8; ++j) CHECK(full.at(0, j));
}

TEST_CASE("isolability matrix") {
  SUBCASE("seven supports leave e2, e6, e8 inseparable from e4") {
    const auto iso = isolability_matrix(fault_signature_matrix(kResidualIds, kSupports, table1_equations()));
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) {
        const bool expected = i == j || (j == 3 && (i == 1 || i == 5 || i == 7));
        CHECK_MESSAGE(iso.at(i, j) == expected, "(e" << i + 1 << ",e" << j + 1 << ")");
      }
    }
  }
  SUBCASE("no residuals: nothing is isolable") {
    const auto iso = isolability_matrix(BoolMatrix({}, table1_equations()));
    for (auto c : iso.cells) CHECK(c);
  }
  SUBCASE("singleton supports give full isolability") {
    std::vector<std::vector<std::string>> supports;
    for (const auto& e : table1_equations()) supports.push_back({e});
    const auto iso = isolability_matrix(fault_signature_matrix(table1_equations(), supports, table1_equations()));
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) CHECK(iso.at(i, j) == (i == j));
    }
  }
  SUBCASE("matches the defining rule on random signatures") {
    std::mt19937 rng(3);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 50; ++trial) {
      BoolMatrix sig({"a", "b", "c", "d"}, table1_equations());
      for (std::size_t k = 0; k < sig.cells.size(); ++k) sig.cells[k] = coin(rng);
      const auto iso = isolability_matrix(sig);
      for (std::size_t i = 0; i < 8; ++i) {
        CHECK(iso.at(i, i));
        for (std::size_t j = 0; j < 8; ++j) {
          bool isolable = false;
          for (std::size_t r = 0; r < 4; ++r) isolable = isolable || (sig.at(r, i) && !sig.at(r, j));
          CHECK(iso.at(i, j) == !isolable);
        }
      }
    }
  }
}
