#include "tankdiag/isolation.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tankdiag {

bool id_less(const std::string& a, const std::string& b) {
  auto split = [](const std::string& s) {
    std::size_t i = s.size();
    while (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) --i;
    return std::pair{s.substr(0, i), s.substr(i)};
  };
  const auto [pa, na] = split(a);
  const auto [pb, nb] = split(b);
  if (pa != pb) return pa < pb;
  if (na.size() != nb.size()) return na.size() < nb.size();
  return na < nb;
}

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), id_less);
}

const std::vector<std::string>& SupportTable::support(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return supports[i];
  }
  throw std::invalid_argument("unknown residual " + id);
}

namespace {

Candidate sorted(Candidate c) {
  std::sort(c.begin(), c.end(), id_less);
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

bool subset_of(const Candidate& small, const Candidate& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end(), id_less);
}

}  // namespace

SingleFaultResult isolate_single(const std::vector<std::string>& alarmed, const SupportTable& table) {
  SingleFaultResult res;
  if (alarmed.empty()) {
    res.no_fault = true;
    return res;
  }
  Candidate acc = sorted(table.support(alarmed.front()));
  for (std::size_t i = 1; i < alarmed.size(); ++i) {
    const Candidate s = sorted(table.support(alarmed[i]));
    Candidate next;
    std::set_intersection(acc.begin(), acc.end(), s.begin(), s.end(), std::back_inserter(next), id_less);
    acc = std::move(next);
  }
  res.equations = std::move(acc);
  return res;
}

std::vector<Candidate> minimal_hitting_sets(const std::vector<Candidate>& conflicts) {
  std::vector<Candidate> cs;
  for (const auto& c : conflicts) {
    if (c.empty()) throw std::invalid_argument("conflict sets must be nonempty");
    cs.push_back(sorted(c));
  }

  std::vector<Candidate> found;
  std::deque<Candidate> queue{Candidate{}};
  std::set<Candidate> seen{Candidate{}};
  while (!queue.empty()) {
    Candidate h = std::move(queue.front());
    queue.pop_front();
    // Closing: a node containing a known hitting set cannot be minimal.
    if (std::any_of(found.begin(), found.end(), [&](const Candidate& f) { return subset_of(f, h); })) continue;
    const auto unhit = std::find_if(cs.begin(), cs.end(), [&](const Candidate& c) {
      return std::none_of(c.begin(), c.end(), [&](const std::string& e) { return std::binary_search(h.begin(), h.end(), e, id_less); });
    });
    if (unhit == cs.end()) {
      // Breadth-first order reaches every subset of h first, so h is minimal.
      found.push_back(h);
      continue;
    }
    for (const auto& e : *unhit) {
      Candidate child = h;
      child.insert(std::upper_bound(child.begin(), child.end(), e, id_less), e);
      if (seen.insert(child).second) queue.push_back(std::move(child));
    }
  }
  std::sort(found.begin(), found.end(), candidate_less);
  return found;
}

std::string to_string(DiagnosisMode m) { return m == DiagnosisMode::single ? "single" : "multiple"; }

DiagnosisMode parse_diagnosis_mode(const std::string& s) {
  if (s == "single") return DiagnosisMode::single;
  if (s == "multiple") return DiagnosisMode::multiple;
  throw std::invalid_argument("diagnosis mode must be 'single' or 'multiple', got '" + s + "'");
}

Diagnosis diagnose(const AlarmReport& report, const SupportTable& table, DiagnosisMode mode,
                   const StructuralModel* model) {
  for (const auto& id : table.ids) {
    if (!report.find(id)) throw std::invalid_argument("alarm report has no entry for " + id);
  }
  return diagnose(report.alarmed(), table, mode, model);
}

Diagnosis diagnose(const std::vector<std::string>& alarmed, const SupportTable& table, DiagnosisMode mode,
                   const StructuralModel* model) {
  Diagnosis d;
  d.mode = mode;
  d.alarmed = alarmed;
  if (alarmed.empty()) {
    d.no_fault = true;
    return d;
  }
  if (mode == DiagnosisMode::single) {
    const auto single = isolate_single(alarmed, table);
    for (const auto& e : single.equations) d.candidates.push_back({e});
    d.inconsistent_pattern = d.candidates.empty();
  } else {
    std::vector<Candidate> conflicts;
    for (const auto& id : alarmed) conflicts.push_back(table.support(id));
    d.candidates = minimal_hitting_sets(conflicts);
  }
  for (const auto& c : d.candidates) {
    std::vector<std::string> desc;
    for (const auto& e : c) {
      const auto idx = model ? model->equation_index(e) : std::nullopt;
      desc.push_back(idx ? model->description(*idx) : "");
    }
    d.descriptions.push_back(std::move(desc));
  }
  return d;
}

namespace {

std::string braces(const Candidate& c) {
  std::string s = "{";
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + c[i];
  return s + "}";
}

}  // namespace

std::string Diagnosis::to_csv() const {
  std::ostringstream out;
  out << "rank,candidate,description\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::string desc;
    for (std::size_t k = 0; k < descriptions[i].size(); ++k) {
      desc += (k ? "; " : "") + candidates[i][k] + ": " + descriptions[i][k];
    }
    std::string cand;
    for (std::size_t k = 0; k < candidates[i].size(); ++k) cand += (k ? " " : "") + candidates[i][k];
    out << i + 1 << ',' << cand << ",\"" << desc << "\"\n";
  }
  return out.str();
}

std::string Diagnosis::to_text() const {
  std::ostringstream out;
  out << "mode: " << to_string(mode) << '\n';
  out << "alarmed:";
  for (const auto& a : alarmed) out << ' ' << a;
  out << '\n';
  if (no_fault) {
    out << "result: no fault\n";
    return out.str();
  }
  if (inconsistent_pattern) {
    out << "result: inconsistent pattern (no single equation explains every alarm; "
           "multiple faults or model mismatch)\n";
    return out.str();
  }
  out << "candidates:\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out << "  " << i + 1 << ". " << braces(candidates[i]);
    bool any = false;
    for (const auto& d : descriptions[i]) any = any || !d.empty();
    if (any) {
      out << "  ";
      for (std::size_t k = 0; k < descriptions[i].size(); ++k) {
        out << (k ? "; " : "") << candidates[i][k] << ": " << descriptions[i][k];
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace tankdiag
