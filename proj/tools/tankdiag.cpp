// tankdiag: structural analysis, simulation, residual training, diagnosis.
//
// Exit codes: 0 success, 1 usage / config / input error, 2 numerical
// failure, 3 scenario-suite ran but an expectation failed.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "tankdiag/config.hpp"
#include "tankdiag/errors.hpp"
#include "tankdiag/pipeline.hpp"

using namespace tankdiag;
namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 1;
constexpr int kNumericalError = 2;
constexpr int kSuiteFailed = 3;

Config load_config(const std::string& path) { return path.empty() ? Config::parse_string("", "<defaults>") : Config::load(path); }

StructuralModel load_model(const std::string& path) {
  return path.empty() ? StructuralModel::two_tank() : StructuralModel::from_config(Config::load(path));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// --- analyze -----------------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string model;
  std::string out;
};

int run_analyze(const AnalyzeArgs& a) {
  const auto model = load_model(a.model);
  const auto analysis = analyze_model(model);
  if (!a.out.empty()) write_analysis(analysis, model, a.out);
  std::cout << analysis.report(model);
  return 0;
}

// --- simulate ----------------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string scenario;
  std::string fault = "none";
  double magnitude = -1.0;
  std::size_t onset = 1000;
  int sensor = 1;
  std::size_t samples = 4000;
  std::uint64_t seed = 1;
  std::string out;
  bool no_truth = false;
};

int run_simulate(const SimulateArgs& a) {
  const auto cfg = load_config(a.config);
  SuiteConfig suite;
  suite.plant = PlantParams::from_config(cfg);
  suite.input = ProfileOptions::from_config(cfg);
  suite.samples = a.samples;

  FaultScenario fault;
  if (!a.scenario.empty()) {
    fault = FaultScenario::from_config(Config::load(a.scenario));
  } else if (cfg.has_section("scenario")) {
    fault = FaultScenario::from_config(cfg);
  } else {
    fault.kind = parse_fault_kind(a.fault);
    fault.onset_sample = a.onset;
    fault.sensor = a.sensor;
    const SuiteConfig defaults;
    fault.magnitude = a.magnitude >= 0.0                          ? a.magnitude
                      : fault.kind == FaultKind::leak_tank1    ? defaults.leak_magnitude
                      : fault.kind == FaultKind::clog_outflow2 ? defaults.clog_magnitude
                      : fault.kind == FaultKind::sensor_bias   ? defaults.bias_magnitude
                                                               : 0.0;
  }
  fault.validate(a.samples);

  const auto ts = simulate_run(suite, fault, a.seed);
  if (a.out.empty() || a.out == "-") {
    write_csv(std::cout, ts, !a.no_truth);
  } else {
    write_csv(fs::path(a.out), ts, !a.no_truth);
  }
  return 0;
}

// --- train -------------------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string calibration;
  std::string config;
  std::string out;
  std::uint64_t bank_seed = 1;
  std::vector<std::size_t> hidden{32, 32, 32};
  double gain = 0.01;
  std::size_t burn_in = 50;
  unsigned threads = 0;
};

std::string loss_csv(const TrainResult& r) {
  std::ostringstream out;
  out << "epoch,train_mse,validation_mse\n";
  for (std::size_t i = 0; i < r.train_loss.size(); ++i) {
    out << i + 1 << ',' << format_double(r.train_loss[i]) << ','
        << (i < r.validation_loss.size() ? format_double(r.validation_loss[i]) : "") << '\n';
  }
  return out.str();
}

int run_train(const TrainArgs& a) {
  const auto cfg = load_config(a.config);
  const auto train = cfg.has_section("train") ? train_config_from(cfg) : TrainConfig{};
  const auto nominal = read_csv(fs::path(a.data));
  if (train.epochs == 0) std::cerr << "warning: zero epochs, the bank keeps its initial weights\n";

  auto result = train_bank(build_residual_bank(a.bank_seed, a.hidden, a.gain, a.burn_in), nominal, train, a.threads);
  const fs::path out(a.out);
  save_bank(out, result.bank);

  std::ostringstream summary;
  summary << "residual,status,epochs,final_train_mse,final_validation_mse,best_epoch\n";
  for (const auto& r : result.residuals) {
    write_text(out / "loss" / (r.id + ".csv"), loss_csv(r.result));
    summary << r.id << ',' << (r.error.empty() ? "ok" : "diverged") << ',' << r.result.train_loss.size() << ','
            << (r.result.train_loss.empty() ? "" : format_double(r.result.train_loss.back())) << ','
            << (r.result.validation_loss.empty() ? "" : format_double(r.result.validation_loss.back())) << ','
            << r.result.best_epoch << '\n';
    if (!r.error.empty()) std::cerr << "error: residual " << r.id << " diverged: " << r.error << '\n';
  }
  write_text(out / "training.csv", summary.str());

  const auto calib_data = a.calibration.empty() ? nominal : read_csv(fs::path(a.calibration));
  if (a.calibration.empty()) std::cerr << "note: bands calibrated on the training data (pass --calibration for held-out data)\n";
  const auto cal = calibrate_bank(result.bank, evaluate_bank(result.bank, calib_data));
  write_text(out / "bands.csv", cal.to_csv());
  std::cout << summary.str();
  return result.failures() == result.residuals.size() ? kNumericalError : 0;
}

// --- diagnose ----------------------------------------------------------------------------------

struct DiagnoseArgs {
  std::string bank;
  std::string bands;
  std::string data;
  std::string config;
  std::string model;
  std::string out;
  std::optional<std::size_t> onset;
};

int run_diagnose_cmd(const DiagnoseArgs& a) {
  const auto cfg = load_config(a.config);
  const auto detection = cfg.has_section("detection") ? detection_config_from(cfg) : DetectionConfig{};
  const auto model = load_model(a.model);
  const auto bank = load_bank(a.bank);
  check_bank_against_model(bank, model);

  const fs::path bands_path = a.bands.empty() ? fs::path(a.bank) / "bands.csv" : fs::path(a.bands);
  std::ifstream bands_in(bands_path);
  if (!bands_in) throw std::runtime_error("cannot read " + bands_path.string());
  const auto cal = BankCalibration::from_csv(bands_in, bands_path.string());

  const auto data = read_csv(fs::path(a.data));
  const auto res = run_diagnose(bank, cal, data, detection, model, a.out, a.onset);
  std::cout << res.alarms.to_text() << res.diagnosis.to_text();
  return 0;
}

// --- scenario-suite ----------------------------------------------------------------------------

struct SuiteArgs {
  std::string config;
  std::string out;
  std::optional<unsigned> threads;
};

int run_suite_cmd(const SuiteArgs& a) {
  auto suite = a.config.empty() ? SuiteConfig{} : SuiteConfig::from_config(Config::load(a.config));
  if (a.threads) suite.threads = *a.threads;
  const auto res = run_suite(suite);
  const auto report = res.report();
  if (!a.out.empty()) write_text(a.out, report);
  std::cout << report;
  std::cerr << "training took " << res.training_seconds << " s\n";
  const bool pass = report.find("\nresult: PASS\n") != std::string::npos;
  return pass ? 0 : kSuiteFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural fault diagnosis of a two-tank plant with neural residual generators"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* cmd_analyze = app.add_subcommand("analyze", "Structural analysis: DM decomposition, redundant sets, signature and isolability");
  cmd_analyze->add_option("--model", analyze.model, "Structural model file (default: built-in two-tank model)")->check(CLI::ExistingFile);
  cmd_analyze->add_option("--out", analyze.out, "Directory for dm.txt, redundant_sets.csv, signature.csv, isolability.csv, report.txt");

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Simulate the plant and write a CSV dataset");
  cmd_sim->add_option("--config", sim.config, "Config with [plant], [input] and optionally [scenario] sections")->check(CLI::ExistingFile);
  cmd_sim->add_option("--scenario", sim.scenario, "Scenario file with a [scenario] section")->check(CLI::ExistingFile);
  cmd_sim->add_option("--fault", sim.fault, "none | leak_tank1 | clog_outflow2 | sensor_bias")->capture_default_str();
  cmd_sim->add_option("--magnitude", sim.magnitude, "Fault magnitude (default: 0.05 leak, 0.3 clog, 0.1 bias)");
  cmd_sim->add_option("--onset", sim.onset, "Fault onset sample")->capture_default_str();
  cmd_sim->add_option("--sensor", sim.sensor, "Biased sensor 1..4 (sensor_bias)")->check(CLI::Range(1, 4))->capture_default_str();
  cmd_sim->add_option("-n,--samples", sim.samples, "Number of samples")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_sim->add_option("--seed", sim.seed, "Seed for the input profile and the noise")->capture_default_str();
  cmd_sim->add_option("-o,--out", sim.out, "Output CSV (default: standard output)");
  cmd_sim->add_flag("--no-truth", sim.no_truth, "Omit the hidden x1, x2 columns");

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "Train the seven residual generators on nominal data");
  cmd_train->add_option("--data", train.data, "Nominal training CSV")->required()->check(CLI::ExistingFile);
  cmd_train->add_option("--calibration", train.calibration, "Held-out nominal CSV for the quantile bands")->check(CLI::ExistingFile);
  cmd_train->add_option("--config", train.config, "Config with a [train] section")->check(CLI::ExistingFile);
  cmd_train->add_option("-o,--out", train.out, "Bank directory to write")->required();
  cmd_train->add_option("--bank-seed", train.bank_seed, "Seed for the initial weights")->capture_default_str();
  cmd_train->add_option("--hidden", train.hidden, "Hidden layer widths")->capture_default_str();
  cmd_train->add_option("--feedback-gain", train.gain, "Measurement feedback gain of r6")->capture_default_str();
  cmd_train->add_option("--burn-in", train.burn_in, "Samples excluded from calibration and detection")->capture_default_str();
  cmd_train->add_option("--threads", train.threads, "Worker threads (0 = hardware concurrency)")->capture_default_str();

  DiagnoseArgs diag;
  auto* cmd_diag = app.add_subcommand("diagnose", "Evaluate the bank on data, detect alarms and isolate faults");
  cmd_diag->add_option("--bank", diag.bank, "Bank directory")->required()->check(CLI::ExistingDirectory);
  cmd_diag->add_option("--bands", diag.bands, "Band CSV (default: <bank>/bands.csv)")->check(CLI::ExistingFile);
  cmd_diag->add_option("--data", diag.data, "Data CSV")->required()->check(CLI::ExistingFile);
  cmd_diag->add_option("--config", diag.config, "Config with a [detection] section")->check(CLI::ExistingFile);
  cmd_diag->add_option("--model", diag.model, "Structural model file (default: built-in two-tank model)")->check(CLI::ExistingFile);
  cmd_diag->add_option("-o,--out", diag.out, "Output directory")->required();
  cmd_diag->add_option("--onset", diag.onset, "Known fault onset: splits the histogram summary and marks the plots");

  SuiteArgs suite;
  auto* cmd_suite = app.add_subcommand("scenario-suite", "Train, calibrate and check the leak, clog and sensor-bias scenarios");
  cmd_suite->add_option("--config", suite.config, "Config with [plant], [input], [train], [detection], [suite] sections")->check(CLI::ExistingFile);
  cmd_suite->add_option("-o,--out", suite.out, "Also write the report to this file");
  cmd_suite->add_option("--threads", suite.threads, "Worker threads (0 = hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*cmd_analyze) return run_analyze(analyze);
    if (*cmd_sim) return run_simulate(sim);
    if (*cmd_train) return run_train(train);
    if (*cmd_diag) return run_diagnose_cmd(diag);
    if (*cmd_suite) return run_suite_cmd(suite);
  } catch (const NumericalBlowup& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const DivergedLoss& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}
