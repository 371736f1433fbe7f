#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tankdiag/config.hpp"
#include "tankdiag/detection.hpp"
#include "tankdiag/isolation.hpp"
#include "tankdiag/neural.hpp"
#include "tankdiag/plant.hpp"
#include "tankdiag/residuals.hpp"
#include "tankdiag/structural.hpp"

namespace tankdiag {

TrainConfig train_config_from(const Config& cfg, const std::string& section = "train");
DetectionConfig detection_config_from(const Config& cfg, const std::string& section = "detection");

// --- structural analysis -----------------------------------------------------------------------

struct ModelAnalysis {
  DmPartition dm;
  std::vector<RedundantSet> redundant_sets;
  /// True when the built-in residual bank fits the model; the signature rows
  /// are then r1..r7, otherwise one row m1, m2, ... per redundant set.
  bool uses_bank_supports = false;
  std::vector<std::string> residual_ids;
  std::vector<std::vector<std::string>> supports;
  BoolMatrix signature;    // residuals x non-differential equations
  BoolMatrix isolability;  // equations x equations

  std::string dm_text(const StructuralModel& model) const;
  std::string redundant_sets_csv(const StructuralModel& model) const;
  std::string report(const StructuralModel& model) const;
};

ModelAnalysis analyze_model(const StructuralModel& model);

/// dm.txt, redundant_sets.csv, signature.csv, isolability.csv, report.txt
void write_analysis(const ModelAnalysis& analysis, const StructuralModel& model, const std::filesystem::path& dir);

/// Band-voting alarms whose outside fraction stays below this are reported
/// as marginal; the diagnosis is then also shown without them.
inline constexpr double kMarginalFraction = 0.25;

// --- calibration -------------------------------------------------------------------------------

struct BankCalibration {
  std::vector<std::string> ids;
  std::vector<QuantileBand> bands;

  const QuantileBand& band(const std::string& id) const;
  std::string to_csv() const;
  static BankCalibration from_csv(std::istream& in, const std::string& source = "<bands>");
};

BankCalibration calibrate_bank(const ResidualBank& bank, const std::vector<std::vector<double>>& nominal_traces);

AlarmReport detect_bank(const BankCalibration& cal, const std::vector<std::vector<double>>& traces,
                        const DetectionConfig& cfg);

SupportTable support_table(const ResidualBank& bank);

/// Throws when a residual is structurally inconsistent with `model` or the
/// bank's signature differs from the one analyze_model reports.
void check_bank_against_model(const ResidualBank& bank, const StructuralModel& model);

// --- diagnosis report --------------------------------------------------------------------------

struct DiagnosisReport {
  Diagnosis single;    // all band alarms
  Diagnosis multiple;  // minimal hitting sets of the same alarms
  /// Marginal band alarms and the single-fault diagnosis without them.
  std::vector<std::string> marginal;
  std::optional<Diagnosis> without_marginal;

  std::string to_text() const;
};

DiagnosisReport build_diagnosis(const AlarmReport& report, const SupportTable& table, const StructuralModel& model);

// --- files -------------------------------------------------------------------------------------

/// t,r1,...,r7
std::string traces_csv(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& traces);

/// Per residual and segment (before / after `split`): count, mean, stddev,
/// 1/50/99 % quantiles, fraction outside the band.
std::string histogram_summary_csv(const BankCalibration& cal, const std::vector<std::vector<double>>& traces,
                                  std::size_t split);

/// Static SVG of one residual trace with its band and an optional onset marker.
std::string residual_svg(const std::string& id, const std::vector<double>& trace, const QuantileBand& band,
                         std::optional<std::size_t> onset);

struct DiagnoseOutputs {
  std::vector<std::vector<double>> traces;
  AlarmReport alarms;
  DiagnosisReport diagnosis;
};

/// Evaluates the bank on `data`, detects, diagnoses and writes every output
/// file into `out_dir`.
DiagnoseOutputs run_diagnose(const ResidualBank& bank, const BankCalibration& cal, const TimeSeries& data,
                             const DetectionConfig& cfg, const StructuralModel& model,
                             const std::filesystem::path& out_dir, std::optional<std::size_t> onset);

// --- scenario suite ----------------------------------------------------------------------------

struct SuiteConfig {
  PlantParams plant;
  ProfileOptions input;
  std::size_t samples = 4000;
  std::size_t onset = 1000;
  double leak_magnitude = 0.05;
  double clog_magnitude = 0.3;
  double bias_magnitude = 0.1;
  std::uint64_t bank_seed = 1;
  std::uint64_t train_seed = 1;
  std::uint64_t calibration_seed = 2;
  std::uint64_t heldout_seed = 3;
  std::uint64_t scenario_seed = 4;
  std::vector<std::size_t> hidden{32, 32, 32};
  double feedback_gain = 0.01;
  std::size_t burn_in = 50;
  TrainConfig train;
  DetectionConfig detection;
  unsigned threads = 0;

  /// Sections [plant], [input], [train], [detection], [suite].
  static SuiteConfig from_config(const Config& cfg);
};

/// Nominal or faulty run: the input profile and the noise both use `seed`.
TimeSeries simulate_run(const SuiteConfig& cfg, const FaultScenario& fault, std::uint64_t seed);

struct NominalCheck {
  std::string id;
  double inside_fraction = 0.0;  // held-out samples inside the band after burn-in
  QuantileBand first_half, second_half;
  bool halves_overlap = false;
  bool alarmed = false;
};

struct ScenarioResult {
  std::string name;
  FaultScenario fault;
  AlarmReport alarms;
  DiagnosisReport diagnosis;
  std::vector<std::vector<double>> traces;
  /// Expectation checks: (description, passed).
  std::vector<std::pair<std::string, bool>> checks;
  bool passed() const;
};

struct DecouplingCheck {
  std::string residual;
  std::string sensor;
  bool expected_decoupled = false;
  bool identical = false;
};

struct SuiteResult {
  BankTraining training;
  BankCalibration calibration;
  std::vector<NominalCheck> nominal;
  ScenarioResult heldout, leak, clog;
  std::vector<DecouplingCheck> decoupling;
  double training_seconds = 0.0;  // not part of the report

  bool nominal_passed() const;
  bool decoupling_passed() const;
  /// Deterministic text report (no timings).
  std::string report() const;
};

/// simulate nominal -> train -> calibrate -> held-out check -> leak and clog
/// scenarios -> sensor-bias decoupling grid.
SuiteResult run_suite(const SuiteConfig& cfg);

}  // namespace tankdiag
