#include "tankdiag/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tankdiag/errors.hpp"

namespace tankdiag {

TrainConfig train_config_from(const Config& cfg, const std::string& section) {
  cfg.require_keys(section, {"learning_rate", "beta1", "beta2", "epsilon", "epochs", "bptt_window",
                             "windows_per_update", "seed", "validation_split", "grad_clip", "lr_final_fraction",
                             "keep_best"});
  TrainConfig t;
  t.learning_rate = cfg.get_double(section, "learning_rate", t.learning_rate);
  t.beta1 = cfg.get_double(section, "beta1", t.beta1);
  t.beta2 = cfg.get_double(section, "beta2", t.beta2);
  t.epsilon = cfg.get_double(section, "epsilon", t.epsilon);
  t.epochs = static_cast<std::size_t>(cfg.get_int(section, "epochs", static_cast<long long>(t.epochs)));
  t.bptt_window = static_cast<std::size_t>(cfg.get_int(section, "bptt_window", static_cast<long long>(t.bptt_window)));
  t.windows_per_update =
      static_cast<std::size_t>(cfg.get_int(section, "windows_per_update", static_cast<long long>(t.windows_per_update)));
  t.seed = static_cast<std::uint64_t>(cfg.get_int(section, "seed", static_cast<long long>(t.seed)));
  t.validation_split = cfg.get_double(section, "validation_split", t.validation_split);
  t.grad_clip = cfg.get_double(section, "grad_clip", t.grad_clip);
  t.lr_final_fraction = cfg.get_double(section, "lr_final_fraction", t.lr_final_fraction);
  t.keep_best = cfg.get_bool(section, "keep_best", t.keep_best);
  t.validate();
  return t;
}

DetectionConfig detection_config_from(const Config& cfg, const std::string& section) {
  cfg.require_keys(section, {"window", "min_fraction", "cusum_drift_sigmas", "cusum_threshold_sigmas"});
  DetectionConfig d;
  d.window = static_cast<std::size_t>(cfg.get_int(section, "window", static_cast<long long>(d.window)));
  d.min_fraction = cfg.get_double(section, "min_fraction", d.min_fraction);
  d.cusum_drift_sigmas = cfg.get_double(section, "cusum_drift_sigmas", d.cusum_drift_sigmas);
  d.cusum_threshold_sigmas = cfg.get_double(section, "cusum_threshold_sigmas", d.cusum_threshold_sigmas);
  d.validate();
  return d;
}

// --- structural analysis -----------------------------------------------------------------------

namespace {

std::string join(const std::vector<std::string>& v, const std::string& sep = " ") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

std::string brace_list(const std::vector<std::string>& v) {
  std::string s = "{";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s + "}";
}

std::vector<std::string> static_equations(const StructuralModel& model) {
  std::vector<std::string> out;
  for (std::size_t e = 0; e < model.equation_count(); ++e) {
    if (!model.is_differential(e)) out.push_back(model.equations()[e]);
  }
  return out;
}

bool bank_fits(const StructuralModel& model) {
  for (const auto& spec : two_tank_residual_specs()) {
    if (!check_structure(spec, model).empty()) return false;
  }
  return true;
}

}  // namespace

ModelAnalysis analyze_model(const StructuralModel& model) {
  ModelAnalysis a;
  a.dm = dm_decompose(model);
  a.redundant_sets = find_redundant_sets(model);
  a.uses_bank_supports = bank_fits(model);
  if (a.uses_bank_supports) {
    for (const auto& spec : two_tank_residual_specs()) {
      a.residual_ids.push_back(spec.id);
      a.supports.push_back(spec.support);
    }
  } else {
    for (std::size_t i = 0; i < a.redundant_sets.size(); ++i) {
      a.residual_ids.push_back("m" + std::to_string(i + 1));
      a.supports.push_back(model.names(a.redundant_sets[i].core));
    }
  }
  a.signature = fault_signature_matrix(a.residual_ids, a.supports, static_equations(model));
  a.isolability = isolability_matrix(a.signature);
  return a;
}

std::string ModelAnalysis::dm_text(const StructuralModel& model) const {
  std::ostringstream out;
  out << "under-determined: " << brace_list(model.names(dm.under)) << '\n';
  out << "just-determined: " << brace_list(model.names(dm.just)) << '\n';
  out << "over-determined: " << brace_list(model.names(dm.over)) << '\n';
  out << "redundancy: " << dm.redundancy() << '\n';
  return out.str();
}

std::string ModelAnalysis::redundant_sets_csv(const StructuralModel& model) const {
  std::ostringstream out;
  out << "set,equations,static_equations,knowns\n";
  for (std::size_t i = 0; i < redundant_sets.size(); ++i) {
    const auto& r = redundant_sets[i];
    out << 'm' << i + 1 << ',' << join(model.names(r.equations)) << ',' << join(model.names(r.core)) << ','
        << join(model.knowns_of(r.equations)) << '\n';
  }
  return out.str();
}

std::string ModelAnalysis::report(const StructuralModel& model) const {
  std::ostringstream out;
  out << "# structural analysis\n\n";
  out << "equations: " << model.equation_count() << ", unknowns: " << model.unknown_count()
      << ", knowns: " << model.knowns().size() << "\n\n";
  out << "## Dulmage-Mendelsohn decomposition\n" << dm_text(model) << '\n';
  if (redundant_sets.empty()) {
    out << "no redundancy, 0 residual candidates\n";
    return out.str();
  }
  out << "## minimal redundant sets (" << redundant_sets.size() << ")\n";
  for (std::size_t i = 0; i < redundant_sets.size(); ++i) {
    const auto& r = redundant_sets[i];
    out << 'm' << i + 1 << ' ' << brace_list(model.names(r.equations));
    std::optional<ComputationalSequence> seq;
    for (auto it = r.core.rbegin(); it != r.core.rend() && !seq; ++it) {
      try {
        seq = match_equations(r, model, *it);
      } catch (const NoIntegralMatching&) {
      }
    }
    if (seq) {
      out << "  residual from " << model.equations()[seq->residual_equation] << ": " << describe(*seq, model) << '\n';
    } else {
      out << "  (derivative causality only)\n";
    }
  }
  out << "\n## fault signature matrix" << (uses_bank_supports ? " (residual bank r1-r7)" : "") << '\n'
      << signature.to_csv();
  out << "\n## isolability matrix (1 = row fault not isolable from column fault)\n" << isolability.to_csv();
  std::vector<std::string> pairs;
  for (std::size_t i = 0; i < isolability.rows.size(); ++i) {
    for (std::size_t j = 0; j < isolability.cols.size(); ++j) {
      if (i != j && isolability.at(i, j)) pairs.push_back("(" + isolability.rows[i] + "," + isolability.cols[j] + ")");
    }
  }
  out << "non-isolable pairs: " << (pairs.empty() ? std::string("none") : join(pairs)) << '\n';
  return out.str();
}

// --- calibration -------------------------------------------------------------------------------

const QuantileBand& BankCalibration::band(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return bands[i];
  }
  throw std::out_of_range("no band for residual " + id);
}

std::string BankCalibration::to_csv() const {
  std::ostringstream out;
  out << "residual,lower,upper,burn_in,mean,stddev\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& b = bands[i];
    out << ids[i] << ',' << format_double(b.lower) << ',' << format_double(b.upper) << ',' << b.burn_in << ','
        << format_double(b.mean) << ',' << format_double(b.stddev) << '\n';
  }
  return out.str();
}

BankCalibration BankCalibration::from_csv(std::istream& in, const std::string& source) {
  BankCalibration cal;
  std::string line;
  std::size_t lineno = 0;
  auto number = [&](const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(source, lineno, "bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "residual,lower,upper,burn_in,mean,stddev") throw ParseError(source, lineno, "unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw ParseError(source, lineno, "expected 6 fields");
    QuantileBand b;
    b.lower = number(f[1]);
    b.upper = number(f[2]);
    b.burn_in = static_cast<std::size_t>(number(f[3]));
    b.mean = number(f[4]);
    b.stddev = number(f[5]);
    if (b.lower > b.upper) throw ParseError(source, lineno, "lower bound above upper bound");
    cal.ids.push_back(f[0]);
    cal.bands.push_back(b);
  }
  return cal;
}

BankCalibration calibrate_bank(const ResidualBank& bank, const std::vector<std::vector<double>>& nominal_traces) {
  if (nominal_traces.size() != bank.residuals.size()) throw DimensionMismatch("one nominal trace per residual expected");
  BankCalibration cal;
  for (std::size_t i = 0; i < bank.residuals.size(); ++i) {
    cal.ids.push_back(bank.residuals[i].spec.id);
    cal.bands.push_back(calibrate(nominal_traces[i], bank.burn_in));
  }
  return cal;
}

AlarmReport detect_bank(const BankCalibration& cal, const std::vector<std::vector<double>>& traces,
                        const DetectionConfig& cfg) {
  if (traces.size() != cal.ids.size()) throw DimensionMismatch("one trace per calibrated residual expected");
  AlarmReport report;
  for (std::size_t i = 0; i < cal.ids.size(); ++i) report.entries.push_back(detect(cal.ids[i], traces[i], cal.bands[i], cfg));
  return report;
}

SupportTable support_table(const ResidualBank& bank) { return {bank.ids(), bank.supports()}; }

void check_bank_against_model(const ResidualBank& bank, const StructuralModel& model) {
  std::set<std::string> ids;
  for (const auto& r : bank.residuals) {
    if (!ids.insert(r.spec.id).second) throw std::runtime_error("residual " + r.spec.id + " appears twice in the bank");
    const auto problems = check_structure(r.spec, model);
    if (!problems.empty()) throw std::runtime_error("bank does not match the structural model: " + problems.front());
  }
  const auto analysis = analyze_model(model);
  if (!analysis.uses_bank_supports || bank.ids() != analysis.residual_ids ||
      bank.signature(analysis.signature.cols) != analysis.signature) {
    throw std::runtime_error("bank signature differs from the structural analysis of the model");
  }
}

// --- diagnosis report --------------------------------------------------------------------------

DiagnosisReport build_diagnosis(const AlarmReport& report, const SupportTable& table, const StructuralModel& model) {
  DiagnosisReport d;
  d.single = diagnose(report, table, DiagnosisMode::single, &model);
  d.multiple = diagnose(report, table, DiagnosisMode::multiple, &model);
  std::vector<std::string> sustained;
  for (const auto& e : report.entries) {
    if (!e.alarmed) continue;
    if (e.outside_fraction < kMarginalFraction) {
      d.marginal.push_back(e.residual);
    } else {
      sustained.push_back(e.residual);
    }
  }
  if (!d.marginal.empty() && !sustained.empty()) {
    d.without_marginal = diagnose(sustained, table, DiagnosisMode::single, &model);
  }
  return d;
}

namespace {

std::string indent(const std::string& text, const std::string& pad) {
  std::istringstream in(text);
  std::string out, line;
  while (std::getline(in, line)) out += pad + line + "\n";
  return out;
}

}  // namespace

std::string DiagnosisReport::to_text() const {
  std::ostringstream out;
  out << "single-fault diagnosis (all band alarms)\n" << indent(single.to_text(), "  ");
  if (!marginal.empty()) {
    out << "marginal alarms (outside fraction < " << format_double(kMarginalFraction) << "): " << join(marginal) << '\n';
    if (without_marginal) {
      out << "single-fault diagnosis without marginal alarms\n" << indent(without_marginal->to_text(), "  ");
    }
  }
  out << "multiple-fault diagnosis (minimal hitting sets)\n" << indent(multiple.to_text(), "  ");
  return out.str();
}

// --- files -------------------------------------------------------------------------------------

std::string traces_csv(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& traces) {
  std::ostringstream out;
  out << 't';
  for (const auto& id : ids) out << ',' << id;
  out << '\n';
  const std::size_t n = traces.empty() ? 0 : traces.front().size();
  for (std::size_t t = 0; t < n; ++t) {
    out << t;
    for (const auto& tr : traces) out << ',' << format_double(tr[t]);
    out << '\n';
  }
  return out.str();
}

std::string histogram_summary_csv(const BankCalibration& cal, const std::vector<std::vector<double>>& traces,
                                  std::size_t split) {
  std::ostringstream out;
  out << "residual,segment,count,mean,stddev,q01,q50,q99,outside_fraction\n";
  for (std::size_t i = 0; i < cal.ids.size(); ++i) {
    const auto& band = cal.bands[i];
    const std::size_t from = std::min(band.burn_in, traces[i].size());
    const std::size_t mid = std::clamp(split, from, traces[i].size());
    const std::pair<std::size_t, std::size_t> segs[] = {{from, mid}, {mid, traces[i].size()}};
    const char* names[] = {"pre", "post"};
    for (int s = 0; s < 2; ++s) {
      std::vector<double> v(traces[i].begin() + static_cast<std::ptrdiff_t>(segs[s].first),
                            traces[i].begin() + static_cast<std::ptrdiff_t>(segs[s].second));
      out << cal.ids[i] << ',' << names[s] << ',' << v.size();
      if (v.empty()) {
        out << ",,,,,,\n";
        continue;
      }
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      std::size_t outside = 0;
      for (double x : v) {
        ss += (x - mean) * (x - mean);
        if (x < band.lower || x > band.upper) ++outside;
      }
      out << ',' << format_double(mean) << ',' << format_double(std::sqrt(ss / static_cast<double>(v.size()))) << ','
          << format_double(quantile(v, 0.01)) << ',' << format_double(quantile(v, 0.5)) << ','
          << format_double(quantile(v, 0.99)) << ','
          << format_double(static_cast<double>(outside) / static_cast<double>(v.size())) << '\n';
    }
  }
  return out.str();
}

std::string residual_svg(const std::string& id, const std::vector<double>& trace, const QuantileBand& band,
                         std::optional<std::size_t> onset) {
  const double width = 800, height = 240, left = 60, right = 10, top = 24, bottom = 30;
  const double pw = width - left - right, ph = height - top - bottom;
  const std::size_t n = trace.size();
  double lo = std::min(band.lower, 0.0), hi = std::max(band.upper, 0.0);
  for (std::size_t t = std::min(band.burn_in, n); t < n; ++t) {
    if (std::isfinite(trace[t])) {
      lo = std::min(lo, trace[t]);
      hi = std::max(hi, trace[t]);
    }
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto sx = [&](double t) { return left + pw * (n > 1 ? t / static_cast<double>(n - 1) : 0.0); };
  auto sy = [&](double v) { return top + ph * (hi - v) / (hi - lo); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 "
      << width << ' ' << height << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">" << id
      << " residual</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"0.8\" points=\"";
  for (std::size_t t = 0; t < n; ++t) {
    const double v = std::isfinite(trace[t]) ? std::clamp(trace[t], lo, hi) : lo;
    out << num(sx(static_cast<double>(t))) << ',' << num(sy(v)) << (t + 1 < n ? " " : "");
  }
  out << "\"/>\n";
  for (double b : {band.lower, band.upper}) {
    out << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << num(sy(b)) << "\" y2=\"" << num(sy(b))
        << "\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n";
  }
  if (onset && *onset < n) {
    const double x = sx(static_cast<double>(*onset));
    out << "<line x1=\"" << num(x) << "\" x2=\"" << num(x) << "\" y1=\"" << top << "\" y2=\"" << top + ph
        << "\" stroke=\"black\" stroke-dasharray=\"2,3\"/>\n";
    out << "<text x=\"" << num(x + 4) << "\" y=\"" << top + 12 << "\" font-family=\"sans-serif\" font-size=\"11\">onset</text>\n";
  }
  out << "<text x=\"4\" y=\"" << num(sy(hi - pad)) << "\" font-family=\"sans-serif\" font-size=\"10\">"
      << format_double(std::round((hi - pad) * 1e4) / 1e4) << "</text>\n";
  out << "<text x=\"4\" y=\"" << num(sy(lo + pad)) << "\" font-family=\"sans-serif\" font-size=\"10\">"
      << format_double(std::round((lo + pad) * 1e4) / 1e4) << "</text>\n";
  out << "<text x=\"" << left << "\" y=\"" << height - 8 << "\" font-family=\"sans-serif\" font-size=\"10\">0</text>\n";
  out << "<text x=\"" << left + pw - 30 << "\" y=\"" << height - 8 << "\" font-family=\"sans-serif\" font-size=\"10\">"
      << (n ? n - 1 : 0) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_analysis(const ModelAnalysis& analysis, const StructuralModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "dm.txt", analysis.dm_text(model));
  write_file(dir / "redundant_sets.csv", analysis.redundant_sets_csv(model));
  write_file(dir / "signature.csv", analysis.signature.to_csv());
  write_file(dir / "isolability.csv", analysis.isolability.to_csv());
  write_file(dir / "report.txt", analysis.report(model));
}

DiagnoseOutputs run_diagnose(const ResidualBank& bank, const BankCalibration& cal, const TimeSeries& data,
                             const DetectionConfig& cfg, const StructuralModel& model,
                             const std::filesystem::path& out_dir, std::optional<std::size_t> onset) {
  if (cal.ids != bank.ids()) throw std::runtime_error("calibration does not match the bank's residuals");
  DiagnoseOutputs res;
  res.traces = evaluate_bank(bank, data);
  res.alarms = detect_bank(cal, res.traces, cfg);
  res.diagnosis = build_diagnosis(res.alarms, support_table(bank), model);

  std::filesystem::create_directories(out_dir / "plots");
  write_file(out_dir / "residuals.csv", traces_csv(bank.ids(), res.traces));
  write_file(out_dir / "histogram_summary.csv",
             histogram_summary_csv(cal, res.traces, onset.value_or(data.size() / 2)));
  write_file(out_dir / "alarms.csv", res.alarms.to_csv());
  write_file(out_dir / "alarms.txt", res.alarms.to_text());
  write_file(out_dir / "diagnosis.txt", res.diagnosis.to_text());
  write_file(out_dir / "diagnosis.csv", res.diagnosis.single.to_csv());
  for (std::size_t i = 0; i < cal.ids.size(); ++i) {
    write_file(out_dir / "plots" / (cal.ids[i] + ".svg"), residual_svg(cal.ids[i], res.traces[i], cal.bands[i], onset));
  }
  return res;
}

// --- scenario suite ----------------------------------------------------------------------------

SuiteConfig SuiteConfig::from_config(const Config& cfg) {
  SuiteConfig s;
  if (cfg.has_section("plant")) s.plant = PlantParams::from_config(cfg);
  if (cfg.has_section("input")) s.input = ProfileOptions::from_config(cfg);
  if (cfg.has_section("train")) s.train = train_config_from(cfg);
  if (cfg.has_section("detection")) s.detection = detection_config_from(cfg);
  const std::string sec = "suite";
  cfg.require_keys(sec, {"samples", "onset", "leak_magnitude", "clog_magnitude", "bias_magnitude", "bank_seed",
                         "train_seed", "calibration_seed", "heldout_seed", "scenario_seed", "hidden", "feedback_gain",
                         "burn_in", "threads"});
  auto size = [&](const std::string& key, std::size_t fallback) {
    const auto v = cfg.get_int(sec, key, static_cast<long long>(fallback));
    if (v < 0) throw std::invalid_argument(key + " must be nonnegative");
    return static_cast<std::size_t>(v);
  };
  s.samples = size("samples", s.samples);
  s.onset = size("onset", s.onset);
  s.leak_magnitude = cfg.get_double(sec, "leak_magnitude", s.leak_magnitude);
  s.clog_magnitude = cfg.get_double(sec, "clog_magnitude", s.clog_magnitude);
  s.bias_magnitude = cfg.get_double(sec, "bias_magnitude", s.bias_magnitude);
  s.bank_seed = size("bank_seed", s.bank_seed);
  s.train_seed = size("train_seed", s.train_seed);
  s.calibration_seed = size("calibration_seed", s.calibration_seed);
  s.heldout_seed = size("heldout_seed", s.heldout_seed);
  s.scenario_seed = size("scenario_seed", s.scenario_seed);
  if (const auto h = cfg.get(sec, "hidden")) {
    s.hidden.clear();
    for (const auto& w : split_ws(*h)) s.hidden.push_back(static_cast<std::size_t>(std::stoul(w)));
  }
  s.feedback_gain = cfg.get_double(sec, "feedback_gain", s.feedback_gain);
  s.burn_in = size("burn_in", s.burn_in);
  s.threads = static_cast<unsigned>(size("threads", s.threads));
  if (s.onset >= s.samples) throw std::invalid_argument("onset must lie inside the series");
  return s;
}

TimeSeries simulate_run(const SuiteConfig& cfg, const FaultScenario& fault, std::uint64_t seed) {
  return simulate(cfg.plant, input_profile(cfg.input, cfg.samples, seed), fault, cfg.samples, seed);
}

bool ScenarioResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.second; });
}

bool SuiteResult::nominal_passed() const {
  return std::all_of(nominal.begin(), nominal.end(),
                     [](const NominalCheck& c) { return c.inside_fraction >= 0.95 && c.halves_overlap; });
}

bool SuiteResult::decoupling_passed() const {
  return std::all_of(decoupling.begin(), decoupling.end(),
                     [](const DecouplingCheck& c) { return !c.expected_decoupled || c.identical; });
}

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::vector<std::string> without(std::vector<std::string> v, const std::vector<std::string>& drop) {
  v.erase(std::remove_if(v.begin(), v.end(), [&](const std::string& s) { return contains(drop, s); }), v.end());
  return v;
}

struct Expectation {
  std::vector<std::string> required;
  std::vector<std::string> forbidden;
  std::vector<std::string> either;  // permitted to alarm or not
  Candidate intersection;           // over required alarms
  /// Residual whose alarm (band or CUSUM) refines the intersection, and the result.
  std::string refining;
  Candidate refined;
};

void check_expectation(ScenarioResult& s, const Expectation& e, const SupportTable& table) {
  const auto alarmed = s.alarms.alarmed();
  for (const auto& r : e.required) {
    const auto* entry = s.alarms.find(r);
    s.checks.push_back({r + " alarms after onset",
                        entry && entry->alarmed && *entry->first_alarm_sample > s.fault.onset_sample});
  }
  for (const auto& r : e.forbidden) s.checks.push_back({r + " does not alarm", !contains(alarmed, r)});
  const auto core = without(alarmed, e.either);
  const auto single = isolate_single(core, table);
  s.checks.push_back({"intersection over {" + join(core, ",") + "} = {" + join(e.intersection, ",") + "}",
                      !single.no_fault && single.equations == e.intersection});
  if (!e.refining.empty()) {
    const auto* entry = s.alarms.find(e.refining);
    const bool fired = entry && (entry->alarmed || entry->cusum_alarmed);
    s.checks.push_back({e.refining + " alarms (band or CUSUM)", fired});
    auto with = core;
    with.push_back(e.refining);
    const auto refined = isolate_single(with, table);
    s.checks.push_back({"refinement with " + e.refining + " = {" + join(e.refined, ",") + "}",
                        fired && refined.equations == e.refined});
  }
}

std::string check_lines(const std::vector<std::pair<std::string, bool>>& checks) {
  std::string s;
  for (const auto& [what, ok] : checks) s += std::string("  [") + (ok ? "PASS" : "FAIL") + "] " + what + "\n";
  return s;
}

}  // namespace

SuiteResult run_suite(const SuiteConfig& cfg) {
  const auto model = StructuralModel::two_tank();
  SuiteResult res;

  const auto nominal = simulate_run(cfg, {}, cfg.train_seed);
  const auto t0 = std::chrono::steady_clock::now();
  res.training = train_bank(build_residual_bank(cfg.bank_seed, cfg.hidden, cfg.feedback_gain, cfg.burn_in), nominal,
                            cfg.train, cfg.threads);
  res.training_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ResidualBank& bank = res.training.bank;
  check_bank_against_model(bank, model);
  const auto table = support_table(bank);

  res.calibration = calibrate_bank(bank, evaluate_bank(bank, simulate_run(cfg, {}, cfg.calibration_seed)));

  auto scenario = [&](const std::string& name, const FaultScenario& fault, std::uint64_t seed) {
    ScenarioResult s;
    s.name = name;
    s.fault = fault;
    s.traces = evaluate_bank(bank, simulate_run(cfg, fault, seed));
    s.alarms = detect_bank(res.calibration, s.traces, cfg.detection);
    s.diagnosis = build_diagnosis(s.alarms, table, model);
    return s;
  };

  res.heldout = scenario("nominal (held-out)", {}, cfg.heldout_seed);
  for (std::size_t i = 0; i < bank.residuals.size(); ++i) {
    const auto& trace = res.heldout.traces[i];
    const auto& band = res.calibration.bands[i];
    NominalCheck c;
    c.id = bank.residuals[i].spec.id;
    c.inside_fraction = 1.0 - band_alarm(trace, band, cfg.detection.window, cfg.detection.min_fraction).outside_fraction;
    const std::size_t mid = band.burn_in + (trace.size() - band.burn_in) / 2;
    c.first_half = calibrate(std::span(trace).subspan(0, mid), band.burn_in);
    c.second_half = calibrate(std::span(trace).subspan(mid), 0);
    c.halves_overlap = std::max(c.first_half.lower, c.second_half.lower) <= std::min(c.first_half.upper, c.second_half.upper);
    c.alarmed = res.heldout.alarms.entries[i].alarmed;
    res.nominal.push_back(c);
  }
  res.heldout.checks.push_back({"no residual alarms", res.heldout.alarms.alarmed().empty()});

  res.leak = scenario("leak in tank 1", {FaultKind::leak_tank1, cfg.leak_magnitude, cfg.onset, 1}, cfg.scenario_seed);
  check_expectation(res.leak, {{"r5", "r6"}, {"r1", "r2", "r3", "r4"}, {"r7"}, {"e1", "e7"}, "", {}}, table);

  res.clog = scenario("clogged outflow of tank 2", {FaultKind::clog_outflow2, cfg.clog_magnitude, cfg.onset, 1},
                      cfg.scenario_seed);
  check_expectation(res.clog, {{"r1", "r4"}, {"r2", "r5", "r6"}, {"r3", "r7"}, {"e4", "e6"}, "r3", {"e4"}}, table);

  // Sensor-bias grid against the nominal run with the same seed.
  const auto twin = evaluate_bank(bank, simulate_run(cfg, {}, cfg.scenario_seed));
  for (int k = 1; k <= 4; ++k) {
    const std::string sensor = "y" + std::to_string(k);
    const auto traces = evaluate_bank(bank, simulate_run(cfg, {FaultKind::sensor_bias, cfg.bias_magnitude, cfg.onset, k},
                                                         cfg.scenario_seed));
    std::string sensor_eq;
    const auto& knowns = model.knowns();
    const auto kidx = static_cast<std::size_t>(std::find(knowns.begin(), knowns.end(), sensor) - knowns.begin());
    for (std::size_t e = 0; e < model.equation_count(); ++e) {
      if (model.has_known(e, kidx)) sensor_eq = model.equations()[e];
    }
    for (std::size_t i = 0; i < bank.residuals.size(); ++i) {
      const auto& spec = bank.residuals[i].spec;
      DecouplingCheck c;
      c.residual = spec.id;
      c.sensor = sensor;
      c.expected_decoupled = !contains(spec.support, sensor_eq) && !contains(spec.channels_used(), sensor);
      c.identical = traces[i] == twin[i];
      res.decoupling.push_back(c);
    }
  }
  return res;
}

std::string SuiteResult::report() const {
  std::ostringstream out;
  out << "# scenario suite report\n\n";
  out << "## training\n";
  for (const auto& r : training.residuals) {
    out << r.id << ": ";
    if (!r.error.empty()) {
      out << "FAILED (" << r.error << ")\n";
      continue;
    }
    if (r.result.train_loss.empty()) {
      out << "not trained (zero epochs)\n";
      continue;
    }
    out << "train mse " << format_double(r.result.train_loss.back()) << ", validation mse "
        << format_double(r.result.validation_loss.back()) << ", compare-channel variance "
        << format_double(r.compare_variance) << '\n';
  }

  out << "\n## calibration (1% / 99% bands)\n" << calibration.to_csv();

  out << "\n## held-out nominal run\n";
  out << "residual,inside_fraction,first_half_band,second_half_band,halves_overlap,alarmed\n";
  for (const auto& c : nominal) {
    out << c.id << ',' << format_double(c.inside_fraction) << ",[" << format_double(c.first_half.lower) << ' '
        << format_double(c.first_half.upper) << "],[" << format_double(c.second_half.lower) << ' '
        << format_double(c.second_half.upper) << "]," << (c.halves_overlap ? 1 : 0) << ',' << (c.alarmed ? 1 : 0) << '\n';
  }
  out << check_lines({{"every residual inside its band for >= 95% of samples, half-bands overlap", nominal_passed()}});
  out << check_lines(heldout.checks);

  for (const ScenarioResult* s : {&leak, &clog}) {
    out << "\n## scenario: " << s->name << " (magnitude " << format_double(s->fault.magnitude) << ", onset "
        << s->fault.onset_sample << ")\n";
    out << s->alarms.to_text();
    out << s->diagnosis.to_text();
    out << check_lines(s->checks);
  }

  out << "\n## sensor-bias decoupling\n";
  out << "residual,sensor,expected_decoupled,identical\n";
  for (const auto& c : decoupling) {
    out << c.residual << ',' << c.sensor << ',' << (c.expected_decoupled ? 1 : 0) << ',' << (c.identical ? 1 : 0) << '\n';
  }
  out << check_lines({{"decoupled traces bit-identical to nominal", decoupling_passed()}});

  const bool all = nominal_passed() && heldout.passed() && leak.passed() && clog.passed() && decoupling_passed();
  out << "\nresult: " << (all ? "PASS" : "FAIL") << '\n';
  return out.str();
}

}  // namespace tankdiag
