#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tankdiag/config.hpp"

namespace tankdiag {

/// Two-tank plant coefficients. The tank-2 balance uses inflow from tank one
/// minus its own outflow:
///
///     dx1 = -d1 sqrt(x1) + d2 u        y1 = x1   y3 = d5 sqrt(x1)
///     dx2 = +d3 sqrt(x1) - d4 sqrt(x2)  y2 = x2   y4 = d6 sqrt(x2)
struct PlantParams {
  double d1 = 0.1;
  double d2 = 0.2;
  double d3 = 0.1;
  double d4 = 0.15;
  double d5 = 0.1;
  double d6 = 0.15;
  double dt = 1.0;
  std::array<double, 4> noise_std{0.01, 0.01, 0.01, 0.01};  // y1..y4
  /// Initial levels; when unset the plant starts at the equilibrium of the
  /// first input sample.
  std::optional<std::array<double, 2>> x0;
  /// States beyond this bound raise NumericalBlowup.
  double state_bound = 1e6;

  void validate() const;
  static PlantParams from_config(const Config& cfg, const std::string& section = "plant");
};

enum class FaultKind { none, leak_tank1, clog_outflow2, sensor_bias };

struct FaultScenario {
  FaultKind kind = FaultKind::none;
  double magnitude = 0.0;
  std::size_t onset_sample = 0;
  /// 1..4 for sensor_bias (which y_k is biased).
  int sensor = 1;

  bool active(std::size_t t) const { return kind != FaultKind::none && t >= onset_sample; }
  void validate(std::size_t n) const;
  static FaultScenario from_config(const Config& cfg, const std::string& section = "scenario");
};

std::string to_string(FaultKind kind);
FaultKind parse_fault_kind(const std::string& s);

/// Sampled record. x1/x2 hold simulator truth and are empty for measured data.
struct TimeSeries {
  std::vector<std::size_t> t;
  std::vector<double> u, y1, y2, y3, y4;
  std::vector<double> x1, x2;

  std::size_t size() const { return t.size(); }
  bool has_truth() const { return !x1.empty(); }

  /// Channel by name: u, y1..y4, x1, x2.
  const std::vector<double>& channel(const std::string& name) const;
  void check_consistent() const;
};

void write_csv(std::ostream& out, const TimeSeries& ts, bool include_truth = true);
void write_csv(const std::filesystem::path& path, const TimeSeries& ts, bool include_truth = true);
TimeSeries read_csv(std::istream& in, const std::string& source = "<csv>");
TimeSeries read_csv(const std::filesystem::path& path);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

enum class ProfileKind { constant, steps, filtered_random };

struct ProfileOptions {
  ProfileKind kind = ProfileKind::steps;
  double level = 1.0;       // constant
  double low = 0.3;         // steps / filtered_random range
  double high = 1.5;
  std::size_t min_dwell = 100;  // steps
  std::size_t max_dwell = 300;
  double smoothing = 0.99;  // filtered_random pole

  static ProfileOptions from_config(const Config& cfg, const std::string& section = "input");
};

ProfileKind parse_profile_kind(const std::string& s);

std::vector<double> input_profile(const ProfileOptions& opts, std::size_t n, std::uint64_t seed);

struct PlantRates {
  double dx1 = 0.0;
  double dx2 = 0.0;
};

/// y1..y4
using SensorValues = std::array<double, 4>;

/// Noise-free, fault-free rates and sensor readings at levels (x1, x2).
PlantRates nominal_rates(const PlantParams& p, double x1, double x2, double u);
SensorValues nominal_sensors(const PlantParams& p, double x1, double x2);

/// Fault effect on the rates at sample t. Identity before onset.
PlantRates inject_fault(const PlantRates& rates, const PlantParams& p, double x1, double x2,
                        const FaultScenario& fault, std::size_t t);
/// Fault effect on the sensor readings at sample t. Identity before onset.
SensorValues inject_fault(const SensorValues& y, const FaultScenario& fault, std::size_t t);

/// Euler-forward simulation with levels clamped at zero. Measurement noise is
/// Gaussian i.i.d. per channel and added after fault injection; the noise
/// stream does not depend on the fault, so equal seeds share noise.
TimeSeries simulate(const PlantParams& params, const std::vector<double>& input,
                    const FaultScenario& fault, std::size_t n, std::uint64_t seed);

/// Levels where inflow balances outflow for constant input u.
std::array<double, 2> equilibrium(const PlantParams& p, double u);

}  // namespace tankdiag
