// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.
//
//   acceptance <path-to-tankdiag-cli>
//
// Criteria 4-7 share one default scenario-suite run; criterion 9 runs the CLI
// twice (different thread counts) and compares the reports byte for byte.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tankdiag/pipeline.hpp"

using namespace tankdiag;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void verdict(int n, bool ok, const std::string& what, const std::string& detail) {
  std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << " - " << what << " (" << detail << ")"
            << std::endl;
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

void structural_reproduction() {
  const auto t0 = Clock::now();
  const auto model = StructuralModel::two_tank();
  const auto a = analyze_model(model);
  const std::string table1 =
      "id,e1,e2,e3,e4,e5,e6,e7,e8\n"
      "r1,0,0,0,1,0,1,0,1\n"
      "r2,0,0,1,0,1,0,1,0\n"
      "r3,0,1,0,1,0,0,1,1\n"
      "r4,0,1,1,1,1,1,0,0\n"
      "r5,1,0,1,0,0,0,1,0\n"
      "r6,1,0,0,0,1,0,1,0\n"
      "r7,1,1,1,1,0,1,0,0\n";
  std::set<std::pair<std::string, std::string>> off;
  for (std::size_t i = 0; i < a.isolability.rows.size(); ++i) {
    for (std::size_t j = 0; j < a.isolability.cols.size(); ++j) {
      if (i != j && a.isolability.at(i, j)) off.insert({a.isolability.rows[i], a.isolability.cols[j]});
    }
  }
  const std::set<std::pair<std::string, std::string>> table2{{"e2", "e4"}, {"e6", "e4"}, {"e8", "e4"}};
  bool diag = true;
  for (std::size_t i = 0; i < a.isolability.rows.size(); ++i) diag = diag && a.isolability.at(i, i);
  const double secs = seconds_since(t0);
  const bool sig_ok = a.uses_bank_supports && a.signature.to_csv() == table1;
  verdict(1, sig_ok && off == table2 && diag && secs < 1.0, "signature and isolability of the two-tank model",
          std::string("signature ") + (sig_ok ? "matches" : "differs") + ", " + std::to_string(off.size()) +
              " non-isolable pairs" + (off == table2 ? " as expected" : " (unexpected)") + ", " + fmt(secs) + " s");
}

void redundant_set_oracle() {
  const auto t0 = Clock::now();
  bool ok = true;
  const auto m = StructuralModel::two_tank();
  const auto sets = find_redundant_sets(m);
  std::vector<EquationSet> got;
  for (const auto& s : sets) got.push_back(s.equations);
  ok = ok && got == oracle::minimal_redundant_sets(m);
  const auto e135 = m.indices({"e1", "e3", "e5"});
  const bool has_example = std::any_of(sets.begin(), sets.end(), [&](const RedundantSet& s) { return s.core == e135; });
  std::mt19937 rng(2);
  int agree = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto rm = oracle::random_model(rng, 8, 6);
    std::vector<EquationSet> g;
    for (const auto& s : find_redundant_sets(rm)) g.push_back(s.equations);
    if (g == oracle::minimal_redundant_sets(rm)) ++agree;
  }
  const double secs = seconds_since(t0);
  verdict(2, ok && has_example && agree == 50 && secs < 10.0, "redundant sets equal brute-force enumeration",
          std::to_string(sets.size()) + " sets on the two-tank model, {e1,e3,e5} " +
              (has_example ? "found" : "missing") + ", " + std::to_string(agree) + "/50 random models agree, " +
              fmt(secs) + " s");
}

void gradient_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(3);
  const auto r = gradcheck::random_mlp_cases(rng, 100);
  const double secs = seconds_since(t0);
  verdict(3, r.max_relative_error < 1e-5 && secs < 30.0, "backward pass vs central differences, 100 random cases",
          "max relative error " + fmt(r.max_relative_error) + " over " + std::to_string(r.partials) + " partials, " +
              fmt(secs) + " s");
}

std::string check_summary(const ScenarioResult& s) {
  std::string out;
  for (const auto& [what, ok] : s.checks) {
    if (!ok) out += (out.empty() ? "failed: " : "; ") + what;
  }
  if (out.empty()) out = std::to_string(s.checks.size()) + " checks passed";
  std::string alarmed;
  for (const auto& id : s.alarms.alarmed()) alarmed += (alarmed.empty() ? "" : ",") + id;
  return "alarmed {" + alarmed + "}, " + out;
}

void suite_criteria() {
  const auto res = run_suite(SuiteConfig{});

  double worst = 1.0;
  std::string worst_id;
  bool overlap = true;
  for (const auto& c : res.nominal) {
    if (c.inside_fraction < worst) {
      worst = c.inside_fraction;
      worst_id = c.id;
    }
    overlap = overlap && c.halves_overlap;
  }
  verdict(4, res.nominal_passed() && res.training.failures() == 0 && res.training_seconds < 600.0,
          "held-out nominal traces inside the 1%/99% bands",
          "lowest inside fraction " + fmt(worst, 4) + " (" + worst_id + "), half-bands " +
              (overlap ? "overlap" : "do not overlap") + ", " + std::to_string(res.training.failures()) +
              " diverged, training " + fmt(res.training_seconds) + " s");

  verdict(5, res.leak.passed(), "leak in tank 1 isolates {e1,e7}", check_summary(res.leak));
  verdict(6, res.clog.passed(), "clogged tank-2 outflow isolates {e4,e6}, refined to {e4} by r3",
          check_summary(res.clog));

  std::size_t expected = 0, identical = 0;
  for (const auto& c : res.decoupling) {
    if (c.expected_decoupled) {
      ++expected;
      if (c.identical) ++identical;
    }
  }
  verdict(7, res.decoupling_passed() && res.decoupling.size() == 28, "sensor-bias decoupling over the 7x4 grid",
          std::to_string(identical) + "/" + std::to_string(expected) + " decoupled pairs bit-identical");
}

void hitting_set_oracle() {
  const auto t0 = Clock::now();
  std::mt19937 rng(8);
  int agree = 0;
  for (int c = 0; c < 200; ++c) {
    const std::size_t n = 1 + rng() % 10;
    std::vector<std::string> universe;
    for (std::size_t i = 1; i <= n; ++i) universe.push_back("e" + std::to_string(i));
    std::vector<Candidate> conflicts;
    std::vector<std::set<std::string>> sets;
    const std::size_t count = rng() % 8;
    for (std::size_t k = 0; k < count; ++k) {
      std::set<std::string> s;
      const std::size_t size = 1 + rng() % n;
      while (s.size() < size) s.insert(universe[rng() % n]);
      conflicts.emplace_back(s.begin(), s.end());
      sets.push_back(s);
    }
    std::set<std::set<std::string>> got;
    for (const auto& h : minimal_hitting_sets(conflicts)) got.insert({h.begin(), h.end()});
    const auto want = oracle::minimal_hitting_sets(sets, universe);
    if (got == std::set<std::set<std::string>>(want.begin(), want.end())) ++agree;
  }
  const double secs = seconds_since(t0);
  verdict(8, agree == 200 && secs < 5.0, "minimal hitting sets equal brute-force enumeration",
          std::to_string(agree) + "/200 random families agree, " + fmt(secs) + " s");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism(const std::string& cli) {
  const auto dir = std::filesystem::temp_directory_path() / "tankdiag_acceptance";
  std::filesystem::create_directories(dir);
  std::string reports[2];
  int codes[2];
  const char* threads[2] = {"1", "4"};
  for (int i = 0; i < 2; ++i) {
    const auto out = dir / ("report" + std::to_string(i) + ".txt");
    std::filesystem::remove(out);
    const std::string cmd = "\"" + cli + "\" scenario-suite --threads " + threads[i] + " -o \"" + out.string() +
                            "\" > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    codes[i] = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    reports[i] = slurp(out);
  }
  const bool ran = (codes[0] == 0 || codes[0] == 3) && (codes[1] == 0 || codes[1] == 3);
  verdict(9, ran && !reports[0].empty() && reports[0] == reports[1], "scenario-suite reports are byte-identical",
          "exit codes " + std::to_string(codes[0]) + "/" + std::to_string(codes[1]) + ", " +
              std::to_string(reports[0].size()) + " bytes, " + (reports[0] == reports[1] ? "identical" : "different"));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <path-to-tankdiag-cli>\n";
    return 2;
  }
  structural_reproduction();
  redundant_set_oracle();
  gradient_correctness();
  suite_criteria();
  hitting_set_oracle();
  determinism(argv[1]);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
