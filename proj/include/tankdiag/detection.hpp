#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tankdiag {

/// Empirical p-quantile by linear interpolation between order statistics:
/// with sorted values x[0..n-1] and h = (n - 1) p, the result is
/// x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h]).
double quantile(std::vector<double> values, double p);

struct QuantileBand {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t burn_in = 0;
  /// Nominal moments over the same samples, used to scale CUSUM.
  double mean = 0.0;
  double stddev = 0.0;
};

inline constexpr std::size_t kMinCalibrationSamples = 200;

/// 1% / 99% band of a nominal residual, ignoring the first `burn_in`
/// samples. Throws TooFewSamples when fewer than 200 samples remain.
QuantileBand calibrate(std::span<const double> nominal, std::size_t burn_in = 0, double lower_p = 0.01,
                       double upper_p = 0.99);

struct CusumConfig {
  double mean = 0.0;       // μ₀
  double drift = 0.5;      // ν
  double threshold = 5.0;  // h
  bool two_sided = true;

  /// ν = drift_sigmas σ, h = threshold_sigmas σ around the band's nominal mean.
  static CusumConfig from_band(const QuantileBand& band, double drift_sigmas = 0.5, double threshold_sigmas = 5.0);
  void validate() const;
};

struct DetectionConfig {
  std::size_t window = 100;
  double min_fraction = 0.5;
  double cusum_drift_sigmas = 0.5;
  double cusum_threshold_sigmas = 5.0;

  void validate() const;
};

struct BandResult {
  bool alarmed = false;
  /// Exclusive end of the first window with too many samples outside.
  std::optional<std::size_t> first_alarm_sample;
  double outside_fraction = 0.0;
};

/// Alarms iff some window of `window` consecutive samples from `start` on has
/// more than `min_fraction` of its samples outside [lower, upper].
BandResult band_alarm(std::span<const double> series, const QuantileBand& band, std::size_t window = 100,
                      double min_fraction = 0.5, std::optional<std::size_t> start = std::nullopt);

struct CusumResult {
  std::vector<std::size_t> alarm_samples;
  bool alarmed() const { return !alarm_samples.empty(); }
};

/// Page's two-sided CUSUM: g⁺ = max(0, g⁺ + (s - μ₀) - ν), g⁻ likewise with
/// the sign flipped. An alarm is raised when either statistic exceeds h, after
/// which both restart at zero.
CusumResult cusum_alarm(std::span<const double> series, const CusumConfig& cfg, std::size_t start = 0);

struct AlarmEntry {
  std::string residual;
  bool alarmed = false;  // band voting
  std::optional<std::size_t> first_alarm_sample;
  double outside_fraction = 0.0;
  bool cusum_alarmed = false;
  std::optional<std::size_t> cusum_first_alarm_sample;
  std::size_t cusum_alarm_count = 0;

  bool operator==(const AlarmEntry&) const = default;
};

struct AlarmReport {
  std::vector<AlarmEntry> entries;

  const AlarmEntry* find(const std::string& id) const;
  std::vector<std::string> alarmed() const;
  /// Residuals alarmed by CUSUM only.
  std::vector<std::string> cusum_only() const;

  std::string to_csv() const;
  /// One `residual ...` line per entry; read back by `parse`.
  std::string to_text() const;
  static AlarmReport parse(std::istream& in, const std::string& source = "<report>");
  bool operator==(const AlarmReport&) const = default;
};

/// Band and CUSUM detection for one residual series.
AlarmEntry detect(const std::string& id, std::span<const double> series, const QuantileBand& band,
                  const DetectionConfig& cfg);

}  // namespace tankdiag
