#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tankdiag/neural.hpp"
#include "tankdiag/plant.hpp"
#include "tankdiag/structural.hpp"

namespace tankdiag {

enum class Topology { static_map, recurrent_1state, feedback_recurrent, two_state };

std::string to_string(Topology t);
Topology parse_topology(const std::string& s);

/// One network input. Channel refs read a measured signal at sample t - lag.
/// State refs read an estimated state: in update nets the previous value
/// x̂_{t-1}, in output nets the current value x̂_t.
struct InputRef {
  enum class Kind { channel, state };
  Kind kind = Kind::channel;
  std::string name;  // channel (u, y1..y4) or state (x1, x2)
  int lag = 0;       // channels only: 0 or 1

  bool operator==(const InputRef&) const = default;
};

std::string to_string(const InputRef& r);  // "y3[t-1]", "x2"
InputRef parse_input_ref(const std::string& s);

struct NetSpec {
  std::string name;  // e.g. "xi3a"
  std::vector<InputRef> inputs;

  bool operator==(const NetSpec&) const = default;
};

/// Estimated state. `proxy` is the channel measuring the same quantity: it
/// initializes the state at t = 0 and supplies its normalization statistics.
/// A feedback state integrates a delta net and is pulled towards the proxy:
///   x̂_t = x̂_{t-1} + ξ(·) + gain (proxy_t - x̂_t).
/// Otherwise the net outputs x̂_t directly.
struct StateSpec {
  std::string name;
  std::string proxy;
  NetSpec net;
  bool feedback = false;

  bool operator==(const StateSpec&) const = default;
};

struct ResidualSpec {
  std::string id;
  std::vector<std::string> support;
  /// Support equation left over once the support's unknowns are matched; the
  /// residual compares its known variable with the prediction.
  std::string residual_equation;
  Topology topology = Topology::static_map;
  std::vector<StateSpec> states;
  /// Prediction is output_net(...) when set, otherwise states[output_state].
  std::optional<NetSpec> output_net;
  std::size_t output_state = 0;
  std::string compare_channel;
  double feedback_gain = 0.0;

  /// Networks in parameter order: state nets, then the output net.
  std::vector<const NetSpec*> nets() const;
  /// Every measured channel the residual reads (inputs, feedback, compare);
  /// state initialization is excluded.
  std::vector<std::string> channels_used() const;
  /// First sample carrying a prediction; earlier residual samples are 0.
  std::size_t first_sample() const;
  bool operator==(const ResidualSpec&) const = default;
};

/// The seven residual generators r1..r7 of the two-tank model.
std::vector<ResidualSpec> two_tank_residual_specs(double feedback_gain = 0.01);

/// Checks a spec against a structural model: the channels read equal the
/// known variables of the support, the support plus the differential pairs
/// of its states is a minimal redundant set, and an integral-causality
/// sequence with the declared residual equation exists. Returns the problems
/// found (empty when consistent).
std::vector<std::string> check_structure(const ResidualSpec& spec, const StructuralModel& model);

/// Closed form of the implicit feedback update
///   x = x_prev + delta + gain (y - x)  =>  x = (x_prev + delta + gain y) / (1 + gain).
double resolve_r6_implicit_update(double x_prev, double delta, double y, double gain);

struct Residual {
  ResidualSpec spec;
  std::vector<Network> nets;  // parallel to spec.nets()

  ParamSet params() const;
  void set_params(const ParamSet& p);
};

struct ResidualBank {
  std::vector<Residual> residuals;
  std::size_t burn_in = 50;

  const Residual& at(const std::string& id) const;
  std::vector<std::string> ids() const;
  std::vector<std::vector<std::string>> supports() const;
  /// Signature matrix of the bank over the given equation ids.
  BoolMatrix signature(const std::vector<std::string>& equation_ids) const;
};

/// Untrained bank: Glorot weights from `seed`, identity normalization.
ResidualBank build_residual_bank(std::uint64_t seed = 1, const std::vector<std::size_t>& hidden = {32, 32, 32},
                                 double feedback_gain = 0.01, std::size_t burn_in = 50);

/// Sets every network's input/output statistics from nominal data.
void fit_normalization(Residual& r, const TimeSeries& nominal);

/// Training view of one residual on one series (loss = squared residual).
class ResidualRollout : public Rollout {
 public:
  ResidualRollout(const Residual& residual, const TimeSeries& data);

  std::size_t length() const override { return n_; }
  std::size_t first_sample() const override { return first_; }
  std::vector<double> initial_state() const override;
  WindowResult run(const ParamSet& params, std::size_t begin, std::size_t end, std::vector<double>& state,
                   GradSet* grads, std::span<double> errors = {}) const override;

  /// Estimated states over the series (one vector per state).
  std::vector<std::vector<double>> state_trace(const ParamSet& params) const;

 private:
  struct Source {
    bool is_state;
    std::size_t index;  // state index or channel slot
    int lag;
    double mean, scale;
  };
  struct NetPlan {
    std::vector<Source> sources;
    double out_mean, out_scale;
  };

  void encode(const NetPlan& plan, std::size_t t, std::span<const double> states, std::vector<double>& z) const;

  const ResidualSpec& spec_;
  std::vector<const std::vector<double>*> channels_;
  std::vector<std::size_t> state_proxy_;   // channel slot per state
  std::vector<NetPlan> plans_;             // parallel to spec.nets()
  std::size_t compare_ = 0;
  std::size_t n_ = 0;
  std::size_t first_ = 0;
};

struct ResidualTraining {
  std::string id;
  TrainResult result;      // loss history; params also installed in the bank
  std::string error;       // non-empty when training diverged
  double compare_variance = 0.0;
};

struct BankTraining {
  ResidualBank bank;
  std::vector<ResidualTraining> residuals;
  std::size_t failures() const;
};

/// Fits normalization and trains each residual independently on nominal
/// data. A residual whose loss diverges keeps its initial weights and
/// reports the error; the others continue. `threads` = 0 uses the hardware
/// concurrency.
BankTraining train_bank(const ResidualBank& bank, const TimeSeries& nominal, const TrainConfig& cfg,
                        unsigned threads = 0);

std::vector<double> evaluate_residual(const Residual& r, const TimeSeries& data);
/// One series per residual, aligned with the data samples.
std::vector<std::vector<double>> evaluate_bank(const ResidualBank& bank, const TimeSeries& data);

inline constexpr int kBankFormatVersion = 1;

/// Directory with manifest.json and one network file per ξ.
void save_bank(const std::filesystem::path& dir, const ResidualBank& bank);
ResidualBank load_bank(const std::filesystem::path& dir);

}  // namespace tankdiag
