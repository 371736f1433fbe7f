#include "tankdiag/detection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tankdiag/config.hpp"
#include "tankdiag/errors.hpp"
#include "tankdiag/plant.hpp"

namespace tankdiag {

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

QuantileBand calibrate(std::span<const double> nominal, std::size_t burn_in, double lower_p, double upper_p) {
  if (nominal.size() < burn_in + kMinCalibrationSamples) {
    throw TooFewSamples("calibration needs at least " + std::to_string(kMinCalibrationSamples) +
                        " samples after burn-in, got " +
                        std::to_string(nominal.size() > burn_in ? nominal.size() - burn_in : 0));
  }
  std::vector<double> v(nominal.begin() + static_cast<std::ptrdiff_t>(burn_in), nominal.end());
  QuantileBand band;
  band.burn_in = burn_in;
  band.lower = quantile(v, lower_p);
  band.upper = quantile(v, upper_p);
  band.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - band.mean) * (x - band.mean);
  band.stddev = std::sqrt(ss / static_cast<double>(v.size()));
  return band;
}

CusumConfig CusumConfig::from_band(const QuantileBand& band, double drift_sigmas, double threshold_sigmas) {
  CusumConfig c;
  c.mean = band.mean;
  c.drift = drift_sigmas * band.stddev;
  c.threshold = threshold_sigmas * band.stddev;
  return c;
}

void CusumConfig::validate() const {
  if (!(drift >= 0.0)) throw std::invalid_argument("CUSUM drift must be >= 0");
  if (!(threshold > 0.0)) throw std::invalid_argument("CUSUM threshold must be > 0");
}

void DetectionConfig::validate() const {
  if (window < 1) throw std::invalid_argument("alarm window must be >= 1");
  if (!(min_fraction > 0.0 && min_fraction <= 1.0)) throw std::invalid_argument("min_fraction must lie in (0, 1]");
  if (!(cusum_drift_sigmas >= 0.0) || !(cusum_threshold_sigmas > 0.0)) {
    throw std::invalid_argument("CUSUM drift must be >= 0 and threshold > 0");
  }
}

BandResult band_alarm(std::span<const double> series, const QuantileBand& band, std::size_t window,
                      double min_fraction, std::optional<std::size_t> start) {
  if (window < 1) throw std::invalid_argument("alarm window must be >= 1");
  if (!(min_fraction > 0.0 && min_fraction <= 1.0)) throw std::invalid_argument("min_fraction must lie in (0, 1]");
  const std::size_t from = start.value_or(band.burn_in);
  BandResult res;
  if (from >= series.size()) return res;

  auto outside = [&](std::size_t i) { return series[i] < band.lower || series[i] > band.upper ? 1u : 0u; };
  std::size_t total = 0, in_window = 0;
  const double needed = min_fraction * static_cast<double>(window);
  for (std::size_t i = from; i < series.size(); ++i) {
    total += outside(i);
    in_window += outside(i);
    if (i - from >= window) in_window -= outside(i - window);
    if (!res.alarmed && i + 1 - from >= window && static_cast<double>(in_window) > needed) {
      res.alarmed = true;
      res.first_alarm_sample = i + 1;
    }
  }
  res.outside_fraction = static_cast<double>(total) / static_cast<double>(series.size() - from);
  return res;
}

CusumResult cusum_alarm(std::span<const double> series, const CusumConfig& cfg, std::size_t start) {
  cfg.validate();
  CusumResult res;
  double up = 0.0, down = 0.0;
  for (std::size_t i = start; i < series.size(); ++i) {
    const double dev = series[i] - cfg.mean;
    up = std::max(0.0, up + dev - cfg.drift);
    down = cfg.two_sided ? std::max(0.0, down - dev - cfg.drift) : 0.0;
    if (up > cfg.threshold || down > cfg.threshold) {
      res.alarm_samples.push_back(i);
      up = down = 0.0;
    }
  }
  return res;
}

AlarmEntry detect(const std::string& id, std::span<const double> series, const QuantileBand& band,
                  const DetectionConfig& cfg) {
  cfg.validate();
  AlarmEntry e;
  e.residual = id;
  const auto b = band_alarm(series, band, cfg.window, cfg.min_fraction);
  e.alarmed = b.alarmed;
  e.first_alarm_sample = b.first_alarm_sample;
  e.outside_fraction = b.outside_fraction;
  const auto c =
      cusum_alarm(series, CusumConfig::from_band(band, cfg.cusum_drift_sigmas, cfg.cusum_threshold_sigmas), band.burn_in);
  e.cusum_alarmed = c.alarmed();
  if (c.alarmed()) e.cusum_first_alarm_sample = c.alarm_samples.front();
  e.cusum_alarm_count = c.alarm_samples.size();
  return e;
}

// --- report ------------------------------------------------------------------------------------

const AlarmEntry* AlarmReport::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.residual == id) return &e;
  }
  return nullptr;
}

std::vector<std::string> AlarmReport::alarmed() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.alarmed) out.push_back(e.residual);
  }
  return out;
}

std::vector<std::string> AlarmReport::cusum_only() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.cusum_alarmed && !e.alarmed) out.push_back(e.residual);
  }
  return out;
}

namespace {

std::string opt(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "-"; }

std::optional<std::size_t> parse_opt(const std::string& s, const std::string& source, std::size_t line) {
  if (s == "-") return std::nullopt;
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(source, line, "bad sample index '" + s + "'");
  return v;
}

}  // namespace

std::string AlarmReport::to_csv() const {
  std::ostringstream out;
  out << "residual,alarmed,first_alarm_sample,outside_fraction,cusum_alarmed,cusum_first_alarm_sample,cusum_alarms\n";
  for (const auto& e : entries) {
    out << e.residual << ',' << (e.alarmed ? 1 : 0) << ',' << (e.first_alarm_sample ? std::to_string(*e.first_alarm_sample) : "")
        << ',' << format_double(e.outside_fraction) << ',' << (e.cusum_alarmed ? 1 : 0) << ','
        << (e.cusum_first_alarm_sample ? std::to_string(*e.cusum_first_alarm_sample) : "") << ',' << e.cusum_alarm_count
        << '\n';
  }
  return out.str();
}

std::string AlarmReport::to_text() const {
  std::ostringstream out;
  out << "# alarm report\n";
  for (const auto& e : entries) {
    out << "residual " << e.residual << " alarmed=" << (e.alarmed ? 1 : 0) << " first=" << opt(e.first_alarm_sample)
        << " outside_fraction=" << format_double(e.outside_fraction) << " cusum=" << (e.cusum_alarmed ? 1 : 0)
        << " cusum_first=" << opt(e.cusum_first_alarm_sample) << " cusum_alarms=" << e.cusum_alarm_count << '\n';
  }
  return out.str();
}

AlarmReport AlarmReport::parse(std::istream& in, const std::string& source) {
  AlarmReport report;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto words = split_ws(text);
    if (words.size() != 8 || words[0] != "residual") throw ParseError(source, lineno, "expected a residual line");
    AlarmEntry e;
    e.residual = words[1];
    auto value = [&](std::size_t i, const std::string& key) {
      const std::string prefix = key + "=";
      if (words[i].rfind(prefix, 0) != 0) throw ParseError(source, lineno, "expected " + key + "=");
      return words[i].substr(prefix.size());
    };
    auto flag = [&](std::size_t i, const std::string& key) {
      const auto v = value(i, key);
      if (v != "0" && v != "1") throw ParseError(source, lineno, key + " must be 0 or 1");
      return v == "1";
    };
    e.alarmed = flag(2, "alarmed");
    e.first_alarm_sample = parse_opt(value(3, "first"), source, lineno);
    const auto frac = value(4, "outside_fraction");
    const auto [p, ec] = std::from_chars(frac.data(), frac.data() + frac.size(), e.outside_fraction);
    if (ec != std::errc() || p != frac.data() + frac.size()) throw ParseError(source, lineno, "bad outside_fraction");
    e.cusum_alarmed = flag(5, "cusum");
    e.cusum_first_alarm_sample = parse_opt(value(6, "cusum_first"), source, lineno);
    e.cusum_alarm_count = parse_opt(value(7, "cusum_alarms"), source, lineno).value_or(0);
    if (e.alarmed && !e.first_alarm_sample) throw ParseError(source, lineno, "alarmed entry without first alarm sample");
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace tankdiag
