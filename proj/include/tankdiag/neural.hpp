#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tankdiag {

/// Fully connected layer; weights are row-major (out x in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Intermediates of one forward pass. activations[0] is the input,
/// activations.back() the output; hidden entries are post-ReLU.
struct ForwardCache {
  std::vector<std::vector<double>> activations;

  std::span<const double> output() const { return activations.back(); }
};

/// Dense feed-forward network: ReLU on hidden layers, identity output.
class Mlp {
 public:
  Mlp() = default;
  /// All-zero weights and biases.
  explicit Mlp(const std::vector<std::size_t>& layer_sizes);
  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static Mlp glorot(const std::vector<std::size_t>& layer_sizes, std::mt19937_64& rng);

  std::vector<std::size_t> layer_sizes() const;
  std::size_t input_size() const { return layers_.front().in; }
  std::size_t output_size() const { return layers_.back().out; }
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<double> forward(std::span<const double> x) const;
  void forward(std::span<const double> x, ForwardCache& cache) const;

  bool operator==(const Mlp& other) const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Parameter-shaped accumulator for an Mlp.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const Mlp& net);
  void set_zero();
  void scale(double factor);
  double squared_norm() const;
  bool all_finite() const;
};

/// Reverse-mode pass for a cached forward evaluation. Adds parameter
/// gradients of (upstream . output) into `grads` and returns the gradient
/// with respect to the input. The ReLU derivative at exactly zero is zero.
std::vector<double> backward(const Mlp& net, const ForwardCache& cache,
                             std::span<const double> upstream, Gradients& grads);

/// Convenience form: forward at `x`, then backward with `upstream`.
Gradients backward(const Mlp& net, std::span<const double> x, std::span<const double> upstream);

using ParamSet = std::vector<Mlp>;
using GradSet = std::vector<Gradients>;

GradSet zeros_like(const ParamSet& params);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  GradSet m;
  GradSet v;

  static AdamState for_params(const ParamSet& params, const AdamHyper& hyper);
};

/// One bias-corrected Adam update of every parameter in `params`.
void adam_step(ParamSet& params, const GradSet& grads, AdamState& state);

/// Per-channel affine standardization: z = (x - mean) / scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer identity(std::size_t n);
  std::size_t size() const { return mean.size(); }
  double encode(std::size_t i, double x) const { return (x - mean[i]) / scale[i]; }
  double decode(std::size_t i, double z) const { return mean[i] + scale[i] * z; }
  bool operator==(const Standardizer&) const = default;
};

/// An Mlp together with the statistics that map raw signals in and out.
struct Network {
  Mlp mlp;
  Standardizer input;
  Standardizer output;
};

inline constexpr int kNetworkFormatVersion = 1;

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);
void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

struct TrainConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 200;
  /// Samples per truncated segment.
  std::size_t bptt_window = 200;
  /// Consecutive windows whose gradients are pooled into one Adam step.
  std::size_t windows_per_update = 1;
  std::uint64_t seed = 1;
  /// Trailing fraction of the series held out for validation.
  double validation_split = 0.2;
  /// Largest global L2 norm of a gradient step; larger gradients are rescaled.
  /// 0 disables clipping.
  double grad_clip = 0.0;
  /// Cosine learning-rate decay from learning_rate down to
  /// learning_rate * lr_final_fraction at the last epoch; 1 keeps it constant.
  double lr_final_fraction = 1.0;
  /// Return the parameters of the epoch with the lowest validation loss
  /// instead of the last epoch's.
  bool keep_best = false;

  void validate() const;
  AdamHyper adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

struct WindowResult {
  double sse = 0.0;
  std::size_t count = 0;
};

/// Recurrent evaluation over one training series. The state is carried
/// between consecutive calls; gradients (when requested) stop at `begin`.
class Rollout {
 public:
  virtual ~Rollout() = default;

  virtual std::size_t length() const = 0;
  /// First sample that contributes a prediction error.
  virtual std::size_t first_sample() const = 0;
  virtual std::vector<double> initial_state() const = 0;

  /// Runs samples [begin, end) from `state`, leaving the final state in it.
  /// When `grads` is non-null, adds the gradient of the window's summed
  /// squared error. When `errors` is non-empty, writes the prediction error
  /// of sample t to errors[t].
  virtual WindowResult run(const ParamSet& params, std::size_t begin, std::size_t end,
                           std::vector<double>& state, GradSet* grads,
                           std::span<double> errors = {}) const = 0;
};

struct TrainResult {
  ParamSet params;
  std::size_t best_epoch = 0;           // epoch whose parameters were returned
  std::vector<double> train_loss;       // per epoch, mean squared error
  std::vector<double> validation_loss;  // per epoch
  std::size_t split = 0;                // first validation sample
};

/// Truncated back-propagation through time with Adam. Epochs sweep the
/// training part in consecutive windows, carrying state across window edges.
/// Throws DivergedLoss when a loss or gradient turns non-finite.
TrainResult bptt_train(const Rollout& rollout, ParamSet params, const TrainConfig& cfg);

/// Mean squared error over [split, length) after running from the start.
double validation_mse(const Rollout& rollout, const ParamSet& params, std::size_t split);

}  // namespace tankdiag
