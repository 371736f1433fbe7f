#include "tankdiag/plant.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tankdiag/errors.hpp"

namespace tankdiag {

namespace {

double sqrt0(double x) { return std::sqrt(std::max(x, 0.0)); }

}  // namespace

void PlantParams::validate() const {
  for (double d : {d1, d2, d3, d4, d5, d6}) {
    if (!(d > 0.0)) throw std::invalid_argument("plant coefficients d1..d6 must be positive");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  for (double s : noise_std) {
    if (!(s >= 0.0)) throw std::invalid_argument("noise_std must be non-negative");
  }
  if (x0 && ((*x0)[0] < 0.0 || (*x0)[1] < 0.0)) {
    throw std::invalid_argument("initial levels must be non-negative");
  }
}

PlantParams PlantParams::from_config(const Config& cfg, const std::string& section) {
  cfg.require_keys(section, {"d1", "d2", "d3", "d4", "d5", "d6", "dt", "noise_std", "x1_0", "x2_0",
                             "state_bound"});
  PlantParams p;
  p.d1 = cfg.get_double(section, "d1", p.d1);
  p.d2 = cfg.get_double(section, "d2", p.d2);
  p.d3 = cfg.get_double(section, "d3", p.d3);
  p.d4 = cfg.get_double(section, "d4", p.d4);
  p.d5 = cfg.get_double(section, "d5", p.d5);
  p.d6 = cfg.get_double(section, "d6", p.d6);
  p.dt = cfg.get_double(section, "dt", p.dt);
  p.state_bound = cfg.get_double(section, "state_bound", p.state_bound);
  if (auto noise = cfg.get(section, "noise_std")) {
    const auto parts = split_ws(*noise);
    if (parts.size() == 1) {
      const double s = cfg.get_double(section, "noise_std", 0.0);
      p.noise_std = {s, s, s, s};
    } else if (parts.size() == 4) {
      for (std::size_t i = 0; i < 4; ++i) {
        const char* end = parts[i].data() + parts[i].size();
        auto [ptr, ec] = std::from_chars(parts[i].data(), end, p.noise_std[i]);
        if (ec != std::errc{} || ptr != end) throw ParseError(cfg.source(), 0, "bad noise_std value");
      }
    } else {
      throw ParseError(cfg.source(), 0, "noise_std takes one value or four (y1..y4)");
    }
  }
  const bool has_x1 = cfg.get(section, "x1_0").has_value();
  const bool has_x2 = cfg.get(section, "x2_0").has_value();
  if (has_x1 != has_x2) throw ParseError(cfg.source(), 0, "set both x1_0 and x2_0 or neither");
  if (has_x1) p.x0 = std::array<double, 2>{cfg.get_double(section, "x1_0", 0), cfg.get_double(section, "x2_0", 0)};
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(cfg.source(), 0, e.what());
  }
  return p;
}

std::string to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::none: return "none";
    case FaultKind::leak_tank1: return "leak_tank1";
    case FaultKind::clog_outflow2: return "clog_outflow2";
    case FaultKind::sensor_bias: return "sensor_bias";
  }
  return "none";
}

FaultKind parse_fault_kind(const std::string& s) {
  if (s == "none") return FaultKind::none;
  if (s == "leak_tank1") return FaultKind::leak_tank1;
  if (s == "clog_outflow2") return FaultKind::clog_outflow2;
  if (s == "sensor_bias") return FaultKind::sensor_bias;
  throw std::invalid_argument("unknown fault kind '" + s + "'");
}

void FaultScenario::validate(std::size_t n) const {
  if (!(magnitude >= 0.0)) throw std::invalid_argument("fault magnitude must be non-negative");
  if (kind != FaultKind::none && onset_sample >= n) {
    throw std::invalid_argument("fault onset lies outside the series");
  }
  if (kind == FaultKind::sensor_bias && (sensor < 1 || sensor > 4)) {
    throw std::invalid_argument("sensor_bias needs sensor in 1..4");
  }
}

FaultScenario FaultScenario::from_config(const Config& cfg, const std::string& section) {
  cfg.require_keys(section, {"kind", "magnitude", "onset", "sensor"});
  FaultScenario f;
  try {
    f.kind = parse_fault_kind(cfg.get_string(section, "kind", "none"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(cfg.source(), 0, e.what());
  }
  f.magnitude = cfg.get_double(section, "magnitude", 0.0);
  const auto onset = cfg.get_int(section, "onset", 0);
  if (onset < 0) throw ParseError(cfg.source(), 0, "onset must be non-negative");
  f.onset_sample = static_cast<std::size_t>(onset);
  const auto sensor = cfg.get(section, "sensor");
  if (sensor) {
    const std::string s = *sensor;
    if (s.size() == 2 && s[0] == 'y' && s[1] >= '1' && s[1] <= '4') {
      f.sensor = s[1] - '0';
    } else {
      f.sensor = static_cast<int>(cfg.get_int(section, "sensor", 1));
    }
  }
  if (f.magnitude < 0.0) throw ParseError(cfg.source(), 0, "fault magnitude must be non-negative");
  return f;
}

// --- time series --------------------------------------------------------------

const std::vector<double>& TimeSeries::channel(const std::string& name) const {
  if (name == "u") return u;
  if (name == "y1") return y1;
  if (name == "y2") return y2;
  if (name == "y3") return y3;
  if (name == "y4") return y4;
  if (name == "x1") return x1;
  if (name == "x2") return x2;
  throw std::invalid_argument("unknown channel '" + name + "'");
}

void TimeSeries::check_consistent() const {
  const std::size_t n = t.size();
  for (const auto* c : {&u, &y1, &y2, &y3, &y4}) {
    if (c->size() != n) throw std::invalid_argument("time series channels differ in length");
  }
  if (x1.size() != x2.size() || (!x1.empty() && x1.size() != n)) {
    throw std::invalid_argument("truth channels differ in length");
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format number");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const TimeSeries& ts, bool include_truth) {
  ts.check_consistent();
  const bool truth = include_truth && ts.has_truth();
  out << "t,u,y1,y2,y3,y4" << (truth ? ",x1,x2" : "") << '\n';
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out << ts.t[i] << ',' << format_double(ts.u[i]) << ',' << format_double(ts.y1[i]) << ','
        << format_double(ts.y2[i]) << ',' << format_double(ts.y3[i]) << ',' << format_double(ts.y4[i]);
    if (truth) out << ',' << format_double(ts.x1[i]) << ',' << format_double(ts.x2[i]);
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const TimeSeries& ts, bool include_truth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(out, ts, include_truth);
}

TimeSeries read_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    for (std::string col; std::getline(hs, col, ',');) header.push_back(trim(col));
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  for (const char* required : {"t", "u", "y1", "y2", "y3", "y4"}) {
    if (!index.count(required)) {
      throw ParseError(source, 1, std::string("missing column '") + required + "'");
    }
  }
  const bool truth = index.count("x1") && index.count("x2");

  TimeSeries ts;
  std::size_t lineno = 1;
  std::vector<double> row(header.size());
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t col = 0, start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto end = comma == std::string::npos ? line.size() : comma;
      if (col >= header.size()) throw ParseError(source, lineno, "too many fields");
      const char* b = line.data() + start;
      const char* e = line.data() + end;
      auto [ptr, ec] = std::from_chars(b, e, row[col]);
      if (ec != std::errc{} || ptr != e) {
        throw ParseError(source, lineno, "bad number in column '" + header[col] + "'");
      }
      ++col;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (col != header.size()) throw ParseError(source, lineno, "too few fields");
    ts.t.push_back(static_cast<std::size_t>(row[index["t"]]));
    ts.u.push_back(row[index["u"]]);
    ts.y1.push_back(row[index["y1"]]);
    ts.y2.push_back(row[index["y2"]]);
    ts.y3.push_back(row[index["y3"]]);
    ts.y4.push_back(row[index["y4"]]);
    if (truth) {
      ts.x1.push_back(row[index["x1"]]);
      ts.x2.push_back(row[index["x2"]]);
    }
  }
  return ts;
}

TimeSeries read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return read_csv(in, path.string());
}

// --- input profiles -------------------------------------------------------------

ProfileKind parse_profile_kind(const std::string& s) {
  if (s == "constant") return ProfileKind::constant;
  if (s == "steps") return ProfileKind::steps;
  if (s == "filtered-random" || s == "filtered_random") return ProfileKind::filtered_random;
  throw std::invalid_argument("unknown input profile '" + s + "'");
}

ProfileOptions ProfileOptions::from_config(const Config& cfg, const std::string& section) {
  cfg.require_keys(section, {"kind", "level", "low", "high", "min_dwell", "max_dwell", "smoothing"});
  ProfileOptions o;
  try {
    o.kind = parse_profile_kind(cfg.get_string(section, "kind", "steps"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(cfg.source(), 0, e.what());
  }
  o.level = cfg.get_double(section, "level", o.level);
  o.low = cfg.get_double(section, "low", o.low);
  o.high = cfg.get_double(section, "high", o.high);
  o.min_dwell = static_cast<std::size_t>(cfg.get_int(section, "min_dwell", static_cast<long long>(o.min_dwell)));
  o.max_dwell = static_cast<std::size_t>(cfg.get_int(section, "max_dwell", static_cast<long long>(o.max_dwell)));
  o.smoothing = cfg.get_double(section, "smoothing", o.smoothing);
  if (o.low < 0.0 || o.high < o.low || o.level < 0.0 || o.min_dwell < 1 || o.max_dwell < o.min_dwell ||
      o.smoothing < 0.0 || o.smoothing >= 1.0) {
    throw ParseError(cfg.source(), 0, "invalid input profile options");
  }
  return o;
}

std::vector<double> input_profile(const ProfileOptions& opts, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("input profile needs n >= 1");
  std::vector<double> u(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> level(opts.low, opts.high);
  switch (opts.kind) {
    case ProfileKind::constant:
      std::fill(u.begin(), u.end(), opts.level);
      break;
    case ProfileKind::steps: {
      std::uniform_int_distribution<std::size_t> dwell(opts.min_dwell, opts.max_dwell);
      std::size_t i = 0;
      while (i < n) {
        const double v = level(rng);
        const std::size_t len = dwell(rng);
        for (std::size_t k = 0; k < len && i < n; ++k) u[i++] = v;
      }
      break;
    }
    case ProfileKind::filtered_random: {
      double v = 0.5 * (opts.low + opts.high);
      for (std::size_t i = 0; i < n; ++i) {
        v = opts.smoothing * v + (1.0 - opts.smoothing) * level(rng);
        u[i] = v;
      }
      break;
    }
  }
  return u;
}

// --- dynamics -------------------------------------------------------------------

PlantRates nominal_rates(const PlantParams& p, double x1, double x2, double u) {
  return {-p.d1 * sqrt0(x1) + p.d2 * u, p.d3 * sqrt0(x1) - p.d4 * sqrt0(x2)};
}

SensorValues nominal_sensors(const PlantParams& p, double x1, double x2) {
  return {x1, x2, p.d5 * sqrt0(x1), p.d6 * sqrt0(x2)};
}

PlantRates inject_fault(const PlantRates& rates, const PlantParams& p, double x1, double x2,
                        const FaultScenario& fault, std::size_t t) {
  if (!fault.active(t)) return rates;
  PlantRates out = rates;
  switch (fault.kind) {
    case FaultKind::leak_tank1:
      out.dx1 -= fault.magnitude * sqrt0(x1);
      break;
    case FaultKind::clog_outflow2:
      // outflow coefficient d4 becomes (1 - m) d4
      out.dx2 += fault.magnitude * p.d4 * sqrt0(x2);
      break;
    default:
      break;
  }
  return out;
}

SensorValues inject_fault(const SensorValues& y, const FaultScenario& fault, std::size_t t) {
  if (!fault.active(t)) return y;
  SensorValues out = y;
  switch (fault.kind) {
    case FaultKind::clog_outflow2:
      out[3] *= (1.0 - fault.magnitude);
      break;
    case FaultKind::sensor_bias:
      out[static_cast<std::size_t>(fault.sensor - 1)] += fault.magnitude;
      break;
    default:
      break;
  }
  return out;
}

std::array<double, 2> equilibrium(const PlantParams& p, double u) {
  const double s1 = p.d2 * u / p.d1;
  const double s2 = p.d3 * s1 / p.d4;
  return {s1 * s1, s2 * s2};
}

TimeSeries simulate(const PlantParams& params, const std::vector<double>& input,
                    const FaultScenario& fault, std::size_t n, std::uint64_t seed) {
  params.validate();
  if (n < 1) throw std::invalid_argument("simulate needs n >= 1");
  if (input.size() < n) throw std::invalid_argument("input profile shorter than n");
  fault.validate(n);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto x = params.x0.value_or(equilibrium(params, input[0]));
  TimeSeries ts;
  ts.t.resize(n);
  for (auto* c : {&ts.u, &ts.y1, &ts.y2, &ts.y3, &ts.y4, &ts.x1, &ts.x2}) c->resize(n);

  for (std::size_t t = 0; t < n; ++t) {
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || x[0] > params.state_bound ||
        x[1] > params.state_bound) {
      throw NumericalBlowup("plant state left the bound at sample " + std::to_string(t));
    }
    const SensorValues y = inject_fault(nominal_sensors(params, x[0], x[1]), fault, t);
    ts.t[t] = t;
    ts.u[t] = input[t];
    ts.x1[t] = x[0];
    ts.x2[t] = x[1];
    // one draw per channel every sample keeps noise aligned across scenarios
    ts.y1[t] = y[0] + params.noise_std[0] * gauss(rng);
    ts.y2[t] = y[1] + params.noise_std[1] * gauss(rng);
    ts.y3[t] = y[2] + params.noise_std[2] * gauss(rng);
    ts.y4[t] = y[3] + params.noise_std[3] * gauss(rng);

    const PlantRates r = inject_fault(nominal_rates(params, x[0], x[1], input[t]), params, x[0], x[1], fault, t);
    x[0] = std::max(x[0] + params.dt * r.dx1, 0.0);
    x[1] = std::max(x[1] + params.dt * r.dx2, 0.0);
  }
  return ts;
}

}  // namespace tankdiag
