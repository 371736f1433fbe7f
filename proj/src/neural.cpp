#include "tankdiag/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "tankdiag/errors.hpp"

namespace tankdiag {

// --- Mlp ------------------------------------------------------------------------

Mlp::Mlp(const std::vector<std::size_t>& layer_sizes) {
  if (layer_sizes.size() < 2) throw DimensionMismatch("an Mlp needs at least input and output sizes");
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
    if (in == 0 || out == 0) throw DimensionMismatch("layer sizes must be positive");
    layers_.push_back({in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)});
  }
}

Mlp Mlp::glorot(const std::vector<std::size_t>& layer_sizes, std::mt19937_64& rng) {
  Mlp net(layer_sizes);
  for (auto& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : layer.weights) w = dist(rng);
  }
  return net;
}

std::vector<std::size_t> Mlp::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(layers_.front().in);
  for (const auto& l : layers_) sizes.push_back(l.out);
  return sizes;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

bool Mlp::operator==(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weights != other.layers_[l].weights || layers_[l].bias != other.layers_[l].bias) return false;
  }
  return true;
}

void Mlp::forward(std::span<const double> x, ForwardCache& cache) const {
  if (layers_.empty()) throw DimensionMismatch("empty network");
  if (x.size() != input_size()) {
    throw DimensionMismatch("input has " + std::to_string(x.size()) + " entries, network expects " +
                            std::to_string(input_size()));
  }
  cache.activations.resize(layers_.size() + 1);
  cache.activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const auto& a = cache.activations[l];
    auto& z = cache.activations[l + 1];
    z.resize(layer.out);
    const bool hidden = l + 1 < layers_.size();
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + o * layer.in;
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * a[i];
      z[o] = hidden ? std::max(acc, 0.0) : acc;
    }
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  ForwardCache cache;
  forward(x, cache);
  return cache.activations.back();
}

// --- gradients --------------------------------------------------------------------

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (const auto& l : net.layers()) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.biases.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

void Gradients::set_zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) {
    for (double v : w) s += v * v;
  }
  for (const auto& b : biases) {
    for (double v : b) s += v * v;
  }
  return s;
}

void Gradients::scale(double factor) {
  for (auto& w : weights) {
    for (auto& v : w) v *= factor;
  }
  for (auto& b : biases) {
    for (auto& v : b) v *= factor;
  }
}

bool Gradients::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return std::all_of(weights.begin(), weights.end(), finite) &&
         std::all_of(biases.begin(), biases.end(), finite);
}

std::vector<double> backward(const Mlp& net, const ForwardCache& cache,
                             std::span<const double> upstream, Gradients& grads) {
  const auto& layers = net.layers();
  if (upstream.size() != net.output_size()) throw DimensionMismatch("upstream gradient size mismatch");
  if (cache.activations.size() != layers.size() + 1) throw DimensionMismatch("forward cache does not match network");
  if (grads.weights.size() != layers.size()) throw DimensionMismatch("gradient shape does not match network");

  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> prev;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const auto& a = cache.activations[l];
    auto& gw = grads.weights[l];
    auto& gb = grads.biases[l];
    prev.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      const double* w = layer.weights.data() + o * layer.in;
      double* g = gw.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) {
        g[i] += d * a[i];
        prev[i] += w[i] * d;
      }
    }
    if (l > 0) {
      // a[i] is post-ReLU: positive exactly where the pre-activation was
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (!(a[i] > 0.0)) prev[i] = 0.0;
      }
    }
    delta.swap(prev);
  }
  return delta;
}

Gradients backward(const Mlp& net, std::span<const double> x, std::span<const double> upstream) {
  ForwardCache cache;
  net.forward(x, cache);
  auto grads = Gradients::zeros_like(net);
  backward(net, cache, upstream, grads);
  return grads;
}

GradSet zeros_like(const ParamSet& params) {
  GradSet g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(Gradients::zeros_like(p));
  return g;
}

// --- Adam ----------------------------------------------------------------------------

AdamState AdamState::for_params(const ParamSet& params, const AdamHyper& hyper) {
  AdamState s;
  s.hyper = hyper;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  return s;
}

void adam_step(ParamSet& params, const GradSet& grads, AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionMismatch("Adam state does not match parameters");
  }
  ++state.step;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));

  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  };
  for (std::size_t n = 0; n < params.size(); ++n) {
    auto& layers = params[n].layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weights, grads[n].weights[l], state.m[n].weights[l], state.v[n].weights[l]);
      update(layers[l].bias, grads[n].biases[l], state.m[n].biases[l], state.v[n].biases[l]);
    }
  }
}

// --- standardization and files --------------------------------------------------------------

Standardizer Standardizer::identity(std::size_t n) {
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
}

nlohmann::json network_to_json(const Network& net) {
  nlohmann::json j;
  j["format"] = "tankdiag-network";
  j["version"] = kNetworkFormatVersion;
  j["layer_sizes"] = net.mlp.layer_sizes();
  j["activation"] = "relu";
  auto layers = nlohmann::json::array();
  for (const auto& l : net.mlp.layers()) layers.push_back({{"weights", l.weights}, {"bias", l.bias}});
  j["layers"] = std::move(layers);
  j["input_norm"] = {{"mean", net.input.mean}, {"scale", net.input.scale}};
  j["output_norm"] = {{"mean", net.output.mean}, {"scale", net.output.scale}};
  return j;
}

Network network_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "tankdiag-network") throw std::runtime_error("not a network file");
  if (j.value("version", 0) != kNetworkFormatVersion) {
    throw std::runtime_error("unsupported network format version");
  }
  Network net;
  net.mlp = Mlp(j.at("layer_sizes").get<std::vector<std::size_t>>());
  const auto& layers = j.at("layers");
  if (layers.size() != net.mlp.layers().size()) throw DimensionMismatch("layer count mismatch in network file");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& dst = net.mlp.layers()[l];
    auto w = layers[l].at("weights").get<std::vector<double>>();
    auto b = layers[l].at("bias").get<std::vector<double>>();
    if (w.size() != dst.weights.size() || b.size() != dst.bias.size()) {
      throw DimensionMismatch("layer " + std::to_string(l) + " shape mismatch in network file");
    }
    dst.weights = std::move(w);
    dst.bias = std::move(b);
  }
  net.input.mean = j.at("input_norm").at("mean").get<std::vector<double>>();
  net.input.scale = j.at("input_norm").at("scale").get<std::vector<double>>();
  net.output.mean = j.at("output_norm").at("mean").get<std::vector<double>>();
  net.output.scale = j.at("output_norm").at("scale").get<std::vector<double>>();
  if (net.input.size() != net.mlp.input_size() || net.output.size() != net.mlp.output_size() ||
      net.input.scale.size() != net.input.size() || net.output.scale.size() != net.output.size()) {
    throw DimensionMismatch("normalization statistics do not match the network");
  }
  return net;
}

void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << network_to_json(net).dump(1) << '\n';
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return network_from_json(nlohmann::json::parse(in));
}

// --- training ---------------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (bptt_window < 1) throw std::invalid_argument("bptt_window must be >= 1");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) {
    throw std::invalid_argument("lr_final_fraction must lie in (0, 1]");
  }
  if (keep_best && validation_split == 0.0) throw std::invalid_argument("keep_best needs a validation split");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be >= 0");
  if (windows_per_update < 1) throw std::invalid_argument("windows_per_update must be >= 1");
  if (!(validation_split >= 0.0 && validation_split < 1.0)) {
    throw std::invalid_argument("validation_split must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
}

double validation_mse(const Rollout& rollout, const ParamSet& params, std::size_t split) {
  const std::size_t n = rollout.length();
  if (split >= n) return std::numeric_limits<double>::quiet_NaN();
  auto state = rollout.initial_state();
  const std::size_t first = rollout.first_sample();
  if (split > first) rollout.run(params, first, split, state, nullptr);
  const auto res = rollout.run(params, std::max(split, first), n, state, nullptr);
  return res.count ? res.sse / static_cast<double>(res.count) : std::numeric_limits<double>::quiet_NaN();
}

TrainResult bptt_train(const Rollout& rollout, ParamSet params, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = rollout.length();
  const std::size_t first = rollout.first_sample();
  if (n <= first + 1) throw std::invalid_argument("series too short to train on");
  const auto train_samples = static_cast<double>(n - first) * (1.0 - cfg.validation_split);
  const std::size_t split = first + std::max<std::size_t>(1, static_cast<std::size_t>(train_samples));

  TrainResult result;
  result.split = split;
  AdamState adam = AdamState::for_params(params, cfg.adam());
  GradSet grads = zeros_like(params);

  ParamSet best;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.lr_final_fraction < 1.0) {
      const double progress = cfg.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1) : 1.0;
      const double f = cfg.lr_final_fraction;
      adam.hyper.learning_rate = cfg.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    }
    auto state = rollout.initial_state();
    double epoch_sse = 0.0;
    std::size_t epoch_count = 0;
    std::size_t begin = first;
    while (begin < split) {
      for (auto& g : grads) g.set_zero();
      double sse = 0.0;
      std::size_t count = 0;
      for (std::size_t w = 0; w < cfg.windows_per_update && begin < split; ++w) {
        const std::size_t end = std::min(begin + cfg.bptt_window, split);
        const auto res = rollout.run(params, begin, end, state, &grads);
        sse += res.sse;
        count += res.count;
        begin = end;
      }
      if (!std::isfinite(sse)) {
        throw DivergedLoss("non-finite loss in epoch " + std::to_string(epoch));
      }
      if (count == 0) continue;
      for (auto& g : grads) {
        g.scale(1.0 / static_cast<double>(count));
        if (!g.all_finite()) throw DivergedLoss("non-finite gradient in epoch " + std::to_string(epoch));
      }
      if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads) sq += g.squared_norm();
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) {
          for (auto& g : grads) g.scale(cfg.grad_clip / norm);
        }
      }
      adam_step(params, grads, adam);
      epoch_sse += sse;
      epoch_count += count;
    }
    const double train = epoch_count ? epoch_sse / static_cast<double>(epoch_count) : 0.0;
    const double val = validation_mse(rollout, params, split);
    if (!std::isfinite(train) || (split < n && !std::isfinite(val))) {
      throw DivergedLoss("non-finite loss after epoch " + std::to_string(epoch));
    }
    result.train_loss.push_back(train);
    result.validation_loss.push_back(val);
    if (cfg.keep_best && val < best_val) {
      best_val = val;
      best = params;
      result.best_epoch = epoch;
    }
  }
  if (cfg.keep_best && !best.empty()) {
    result.params = std::move(best);
  } else {
    result.best_epoch = cfg.epochs ? cfg.epochs - 1 : 0;
    result.params = std::move(params);
  }
  return result;
}

}  // namespace tankdiag
