#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "tankdiag/isolation.hpp"

using namespace tankdiag;

namespace {

const SupportTable kTable{
    {"r1", "r2", "r3", "r4", "r5", "r6", "r7"},
    {{"e4", "e6", "e8"},
     {"e3", "e5", "e7"},
     {"e2", "e4", "e7", "e8"},
     {"e2", "e3", "e4", "e5", "e6"},
     {"e1", "e3", "e7"},
     {"e1", "e5", "e7"},
     {"e1", "e2", "e3", "e4", "e6"}},
};

std::set<std::set<std::string>> as_sets(const std::vector<Candidate>& cs) {
  std::set<std::set<std::string>> out;
  for (const auto& c : cs) out.insert(std::set<std::string>(c.begin(), c.end()));
  return out;
}

AlarmReport report_for(const std::vector<std::string>& alarmed) {
  AlarmReport r;
  for (const auto& id : kTable.ids) {
    AlarmEntry e;
    e.residual = id;
    e.alarmed = std::find(alarmed.begin(), alarmed.end(), id) != alarmed.end();
    if (e.alarmed) e.first_alarm_sample = 1100;
    r.entries.push_back(e);
  }
  return r;
}

}  // namespace

TEST_CASE("natural id order") {
  CHECK(id_less("e2", "e10"));
  CHECK_FALSE(id_less("e10", "e2"));
  CHECK(id_less("e1", "e2"));
  CHECK(id_less("a9", "b1"));
  CHECK(candidate_less({"e9"}, {"e1", "e2"}));
  CHECK(candidate_less({"e1", "e4"}, {"e1", "e6"}));
}

TEST_CASE("single-fault isolation") {
  CHECK(isolate_single({"r5", "r6"}, kTable).equations == Candidate{"e1", "e7"});
  CHECK(isolate_single({"r1", "r4"}, kTable).equations == Candidate{"e4", "e6"});
  CHECK(isolate_single({"r1", "r4", "r3"}, kTable).equations == Candidate{"e4"});
  CHECK(isolate_single({"r1", "r2"}, kTable).equations.empty());
  const auto none = isolate_single({}, kTable);
  CHECK(none.no_fault);
  CHECK(none.equations.empty());
  CHECK_THROWS(isolate_single({"r8"}, kTable));
}

TEST_CASE("isolate_single is monotone") {
  std::mt19937 rng(1);
  for (int c = 0; c < 300; ++c) {
    std::vector<std::string> alarmed;
    for (const auto& id : kTable.ids) {
      if (rng() % 2) alarmed.push_back(id);
    }
    if (alarmed.empty()) continue;
    const auto base = isolate_single(alarmed, kTable).equations;
    for (const auto& extra : kTable.ids) {
      auto more = alarmed;
      more.push_back(extra);
      const auto narrowed = isolate_single(more, kTable).equations;
      CHECK(std::includes(base.begin(), base.end(), narrowed.begin(), narrowed.end(), id_less));
    }
  }
}

TEST_CASE("minimal hitting sets: examples") {
  CHECK(minimal_hitting_sets({}) == std::vector<Candidate>{Candidate{}});
  CHECK(minimal_hitting_sets({{"e1"}}) == std::vector<Candidate>{{"e1"}});
  CHECK(minimal_hitting_sets({{"e1", "e7"}, {"e4", "e6", "e8"}}) ==
        std::vector<Candidate>{{"e1", "e4"}, {"e1", "e6"}, {"e1", "e8"}, {"e4", "e7"}, {"e6", "e7"}, {"e7", "e8"}});
  // Shared elements give singletons ahead of pairs.
  CHECK(minimal_hitting_sets({{"e1", "e2"}, {"e2", "e3"}}) == std::vector<Candidate>{{"e2"}, {"e1", "e3"}});
  // Duplicate and nested conflicts.
  CHECK(minimal_hitting_sets({{"e1"}, {"e1"}, {"e1", "e2"}}) == std::vector<Candidate>{{"e1"}});
  CHECK_THROWS(minimal_hitting_sets({{"e1"}, {}}));
}

TEST_CASE("minimal hitting sets agree with brute force on random families") {
  std::mt19937 rng(2024);
  for (int c = 0; c < 300; ++c) {
    const std::size_t universe_size = 1 + rng() % 10;
    std::vector<std::string> universe;
    for (std::size_t i = 1; i <= universe_size; ++i) universe.push_back("e" + std::to_string(i));
    const std::size_t count = rng() % 7;
    std::vector<Candidate> conflicts;
    std::vector<std::set<std::string>> oracle_in;
    for (std::size_t k = 0; k < count; ++k) {
      std::set<std::string> s;
      const std::size_t size = 1 + rng() % std::min<std::size_t>(universe_size, 5);
      while (s.size() < size) s.insert(universe[rng() % universe_size]);
      conflicts.emplace_back(s.begin(), s.end());
      oracle_in.push_back(s);
    }
    const auto got = minimal_hitting_sets(conflicts);
    const auto expected = oracle::minimal_hitting_sets(oracle_in, universe);
    CHECK(as_sets(got) == std::set<std::set<std::string>>(expected.begin(), expected.end()));
    CHECK(got.size() == expected.size());
    CHECK(std::is_sorted(got.begin(), got.end(), candidate_less));
  }
}

TEST_CASE("isolability consistency") {
  // For each pair (ei, ej) that is not isolable, alarming exactly the
  // residuals that support ei leaves ej among the single-fault candidates.
  std::vector<std::string> eqs;
  for (int i = 1; i <= 8; ++i) eqs.push_back("e" + std::to_string(i));
  const auto iso = isolability_matrix(fault_signature_matrix(kTable.ids, kTable.supports, eqs));
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    std::vector<std::string> alarmed;
    for (std::size_t r = 0; r < kTable.ids.size(); ++r) {
      const auto& s = kTable.supports[r];
      if (std::find(s.begin(), s.end(), eqs[i]) != s.end()) alarmed.push_back(kTable.ids[r]);
    }
    const auto cand = isolate_single(alarmed, kTable).equations;
    for (std::size_t j = 0; j < eqs.size(); ++j) {
      const bool in = std::find(cand.begin(), cand.end(), eqs[j]) != cand.end();
      CAPTURE(eqs[i]);
      CAPTURE(eqs[j]);
      CHECK(in == iso.at(i, j));
    }
  }
}

TEST_CASE("diagnose") {
  const auto model = StructuralModel::two_tank();
  SUBCASE("no alarms") {
    const auto d = diagnose(report_for({}), kTable, DiagnosisMode::single, &model);
    CHECK(d.no_fault);
    CHECK(d.candidates.empty());
    CHECK(d.to_text().find("no fault") != std::string::npos);
  }
  SUBCASE("leak pattern") {
    const auto d = diagnose(report_for({"r5", "r6"}), kTable, DiagnosisMode::single, &model);
    CHECK(d.candidates == std::vector<Candidate>{{"e1"}, {"e7"}});
    CHECK(d.descriptions[0][0] == "tank-1 level dynamics");
    CHECK(d.to_text().find("{e1}") != std::string::npos);
    CHECK(d.to_csv() ==
          "rank,candidate,description\n"
          "1,e1,\"e1: tank-1 level dynamics\"\n"
          "2,e7,\"e7: tank-1 outflow sensor\"\n");
  }
  SUBCASE("disjoint supports") {
    const auto single = diagnose(report_for({"r1", "r2"}), kTable, DiagnosisMode::single, &model);
    CHECK(single.inconsistent_pattern);
    CHECK(single.candidates.empty());
    const auto multi = diagnose(report_for({"r1", "r2"}), kTable, DiagnosisMode::multiple, &model);
    CHECK(multi.candidates.size() == 9);
    for (const auto& c : multi.candidates) CHECK(c.size() == 2);
  }
  SUBCASE("without a model there are no descriptions") {
    const auto d = diagnose(report_for({"r1", "r4"}), kTable, DiagnosisMode::single);
    CHECK(d.candidates == std::vector<Candidate>{{"e4"}, {"e6"}});
    CHECK(d.descriptions[0][0].empty());
  }
  SUBCASE("report must cover every residual") {
    AlarmReport partial;
    partial.entries.push_back({"r1", true, 5, 1.0, false, std::nullopt, 0});
    CHECK_THROWS(diagnose(partial, kTable, DiagnosisMode::single));
  }
  SUBCASE("mode names") {
    CHECK(parse_diagnosis_mode("multiple") == DiagnosisMode::multiple);
    CHECK(to_string(DiagnosisMode::single) == "single");
    CHECK_THROWS(parse_diagnosis_mode("both"));
  }
}
