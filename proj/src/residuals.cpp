#include "tankdiag/residuals.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "tankdiag/errors.hpp"

namespace tankdiag {

namespace {

InputRef ch(const std::string& name, int lag = 0) { return {InputRef::Kind::channel, name, lag}; }
InputRef st(const std::string& name) { return {InputRef::Kind::state, name, 0}; }

const std::vector<std::string> kChannels{"u", "y1", "y2", "y3", "y4"};

bool is_channel(const std::string& s) {
  return std::find(kChannels.begin(), kChannels.end(), s) != kChannels.end();
}

struct Stats {
  double mean = 0.0;
  double scale = 1.0;
};

Stats stats_of(std::span<const double> v) {
  Stats s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  s.scale = sd > 1e-12 ? sd : 1.0;
  return s;
}

std::vector<double> differences(const std::vector<double>& v) {
  std::vector<double> d;
  for (std::size_t i = 1; i < v.size(); ++i) d.push_back(v[i] - v[i - 1]);
  return d;
}

}  // namespace

std::string to_string(Topology t) {
  switch (t) {
    case Topology::static_map: return "static";
    case Topology::recurrent_1state: return "recurrent_1state";
    case Topology::feedback_recurrent: return "feedback_recurrent";
    case Topology::two_state: return "two_state";
  }
  return "?";
}

Topology parse_topology(const std::string& s) {
  for (auto t : {Topology::static_map, Topology::recurrent_1state, Topology::feedback_recurrent, Topology::two_state}) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("unknown topology '" + s + "'");
}

std::string to_string(const InputRef& r) {
  if (r.kind == InputRef::Kind::state) return r.name;
  return r.name + (r.lag == 0 ? "[t]" : "[t-" + std::to_string(r.lag) + "]");
}

InputRef parse_input_ref(const std::string& s) {
  const auto open = s.find('[');
  if (open == std::string::npos) {
    if (is_channel(s)) return ch(s);
    return st(s);
  }
  const std::string name = s.substr(0, open);
  const std::string lag = s.substr(open);
  if (!is_channel(name)) throw std::invalid_argument("unknown channel in '" + s + "'");
  if (lag == "[t]") return ch(name, 0);
  if (lag == "[t-1]") return ch(name, 1);
  throw std::invalid_argument("unsupported lag in '" + s + "'");
}

std::vector<const NetSpec*> ResidualSpec::nets() const {
  std::vector<const NetSpec*> out;
  for (const auto& s : states) out.push_back(&s.net);
  if (output_net) out.push_back(&*output_net);
  return out;
}

std::vector<std::string> ResidualSpec::channels_used() const {
  std::set<std::string> used{compare_channel};
  for (const NetSpec* n : nets()) {
    for (const auto& in : n->inputs) {
      if (in.kind == InputRef::Kind::channel) used.insert(in.name);
    }
  }
  for (const auto& s : states) {
    if (s.feedback) used.insert(s.proxy);
  }
  return {used.begin(), used.end()};
}

std::size_t ResidualSpec::first_sample() const {
  if (!states.empty()) return 1;
  for (const NetSpec* n : nets()) {
    for (const auto& in : n->inputs) {
      if (in.kind == InputRef::Kind::channel && in.lag > 0) return static_cast<std::size_t>(in.lag);
    }
  }
  return 0;
}

std::vector<ResidualSpec> two_tank_residual_specs(double feedback_gain) {
  std::vector<ResidualSpec> out;
  {
    ResidualSpec r;
    r.id = "r1";
    r.support = {"e4", "e6", "e8"};
    r.residual_equation = "e8";
    r.topology = Topology::static_map;
    r.output_net = NetSpec{"xi1", {ch("y2")}};
    r.compare_channel = "y4";
    out.push_back(r);
  }
  {
    ResidualSpec r;
    r.id = "r2";
    r.support = {"e3", "e5", "e7"};
    r.residual_equation = "e7";
    r.topology = Topology::static_map;
    r.output_net = NetSpec{"xi2", {ch("y1")}};
    r.compare_channel = "y3";
    out.push_back(r);
  }
  {
    ResidualSpec r;
    r.id = "r3";
    r.support = {"e2", "e4", "e7", "e8"};
    r.residual_equation = "e8";
    r.topology = Topology::recurrent_1state;
    r.states = {{"x2", "y2", {"xi3a", {ch("y3", 1), st("x2")}}, false}};
    r.output_net = NetSpec{"xi3b", {st("x2")}};
    r.compare_channel = "y4";
    out.push_back(r);
  }
  {
    ResidualSpec r;
    r.id = "r4";
    r.support = {"e2", "e3", "e4", "e5", "e6"};
    r.residual_equation = "e6";
    r.topology = Topology::recurrent_1state;
    r.states = {{"x2", "y2", {"xi4", {ch("y1", 1), st("x2")}}, false}};
    r.compare_channel = "y2";
    out.push_back(r);
  }
  {
    ResidualSpec r;
    r.id = "r5";
    r.support = {"e1", "e3", "e7"};
    r.residual_equation = "e7";
    r.topology = Topology::recurrent_1state;
    r.states = {{"x1", "y1", {"xi5a", {st("x1"), ch("u", 1)}}, false}};
    r.output_net = NetSpec{"xi5b", {st("x1")}};
    r.compare_channel = "y3";
    out.push_back(r);
  }
  {
    // The state is deliberately not an input of xi6: it only enters through
    // the integrator and the feedback term.
    ResidualSpec r;
    r.id = "r6";
    r.support = {"e1", "e5", "e7"};
    r.residual_equation = "e5";
    r.topology = Topology::feedback_recurrent;
    r.states = {{"x1", "y1", {"xi6", {ch("y3", 1), ch("u", 1)}}, true}};
    r.compare_channel = "y1";
    r.feedback_gain = feedback_gain;
    out.push_back(r);
  }
  {
    ResidualSpec r;
    r.id = "r7";
    r.support = {"e1", "e2", "e3", "e4", "e6"};
    r.residual_equation = "e6";
    r.topology = Topology::two_state;
    r.states = {{"x1", "y1", {"xi7a", {st("x1"), ch("u", 1)}}, false},
                {"x2", "y2", {"xi7b", {st("x1"), st("x2")}}, false}};
    r.output_state = 1;
    r.compare_channel = "y2";
    out.push_back(r);
  }
  return out;
}

std::vector<std::string> check_structure(const ResidualSpec& spec, const StructuralModel& model) {
  std::vector<std::string> problems;
  EquationSet support;
  for (const auto& id : spec.support) {
    const auto idx = model.equation_index(id);
    if (!idx) {
      problems.push_back("unknown equation " + id);
      continue;
    }
    support.push_back(*idx);
  }
  if (!problems.empty()) return problems;
  std::sort(support.begin(), support.end());

  auto knowns = model.knowns_of(support);
  std::sort(knowns.begin(), knowns.end());
  if (spec.channels_used() != knowns) {
    std::string msg = spec.id + ": channels read do not match the known variables of the support (";
    for (const auto& k : knowns) msg += k + " ";
    msg += "expected)";
    problems.push_back(msg);
  }

  // Add the differential pairs whose state and derivative both occur.
  EquationSet full = support;
  const auto unknowns = model.unknowns_of(support);
  auto covers = [&](std::size_t x) { return std::find(unknowns.begin(), unknowns.end(), x) != unknowns.end(); };
  for (const auto& p : model.differential_pairs()) {
    if (covers(p.state) && covers(p.derivative)) full.push_back(p.equation);
  }
  std::sort(full.begin(), full.end());

  const auto sets = find_redundant_sets(model);
  const auto found = std::find_if(sets.begin(), sets.end(), [&](const RedundantSet& s) { return s.equations == full; });
  if (found == sets.end()) {
    problems.push_back(spec.id + ": support is not a minimal redundant set of the model");
    return problems;
  }
  const auto res_eq = model.equation_index(spec.residual_equation);
  if (!res_eq || std::find(support.begin(), support.end(), *res_eq) == support.end()) {
    problems.push_back(spec.id + ": residual equation " + spec.residual_equation + " is not in the support");
    return problems;
  }
  try {
    const auto seq = match_equations(*found, model, *res_eq);
    std::set<std::string> integrated, declared;
    for (const auto& a : seq.assignments) {
      if (a.causality == Causality::integral) integrated.insert(model.unknowns()[a.unknown]);
    }
    for (const auto& s : spec.states) declared.insert(s.name);
    if (integrated != declared) problems.push_back(spec.id + ": states differ from the integrated variables");
  } catch (const NoIntegralMatching& e) {
    problems.push_back(spec.id + ": " + e.what());
  }
  return problems;
}

double resolve_r6_implicit_update(double x_prev, double delta, double y, double gain) {
  if (gain == -1.0) throw std::invalid_argument("feedback gain must differ from -1");
  return (x_prev + delta + gain * y) / (1.0 + gain);
}

// --- bank --------------------------------------------------------------------------------------

ParamSet Residual::params() const {
  ParamSet p;
  for (const auto& n : nets) p.push_back(n.mlp);
  return p;
}

void Residual::set_params(const ParamSet& p) {
  if (p.size() != nets.size()) throw DimensionMismatch("parameter set size does not match residual " + spec.id);
  for (std::size_t i = 0; i < p.size(); ++i) nets[i].mlp = p[i];
}

const Residual& ResidualBank::at(const std::string& id) const {
  for (const auto& r : residuals) {
    if (r.spec.id == id) return r;
  }
  throw std::out_of_range("no residual " + id);
}

std::vector<std::string> ResidualBank::ids() const {
  std::vector<std::string> out;
  for (const auto& r : residuals) out.push_back(r.spec.id);
  return out;
}

std::vector<std::vector<std::string>> ResidualBank::supports() const {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : residuals) out.push_back(r.spec.support);
  return out;
}

BoolMatrix ResidualBank::signature(const std::vector<std::string>& equation_ids) const {
  return fault_signature_matrix(ids(), supports(), equation_ids);
}

ResidualBank build_residual_bank(std::uint64_t seed, const std::vector<std::size_t>& hidden, double feedback_gain,
                                 std::size_t burn_in) {
  ResidualBank bank;
  bank.burn_in = burn_in;
  std::mt19937_64 rng(seed);
  for (auto& spec : two_tank_residual_specs(feedback_gain)) {
    Residual r;
    for (const NetSpec* n : spec.nets()) {
      std::vector<std::size_t> sizes{n->inputs.size()};
      sizes.insert(sizes.end(), hidden.begin(), hidden.end());
      sizes.push_back(1);
      r.nets.push_back({Mlp::glorot(sizes, rng), Standardizer::identity(n->inputs.size()), Standardizer::identity(1)});
    }
    r.spec = std::move(spec);
    bank.residuals.push_back(std::move(r));
  }
  return bank;
}

void fit_normalization(Residual& r, const TimeSeries& nominal) {
  auto channel_stats = [&](const std::string& name) { return stats_of(nominal.channel(name)); };
  auto state_proxy = [&](const std::string& state) -> const StateSpec& {
    for (const auto& s : r.spec.states) {
      if (s.name == state) return s;
    }
    throw std::invalid_argument(r.spec.id + ": unknown state " + state);
  };

  const auto nets = r.spec.nets();
  for (std::size_t k = 0; k < nets.size(); ++k) {
    Network& net = r.nets[k];
    net.input = Standardizer::identity(nets[k]->inputs.size());
    for (std::size_t i = 0; i < nets[k]->inputs.size(); ++i) {
      const auto& in = nets[k]->inputs[i];
      const Stats s = in.kind == InputRef::Kind::channel ? channel_stats(in.name) : channel_stats(state_proxy(in.name).proxy);
      net.input.mean[i] = s.mean;
      net.input.scale[i] = s.scale;
    }
    Stats out;
    if (k < r.spec.states.size()) {
      const auto& s = r.spec.states[k];
      out = s.feedback ? stats_of(differences(nominal.channel(s.proxy))) : channel_stats(s.proxy);
    } else {
      out = channel_stats(r.spec.compare_channel);
    }
    net.output = {{out.mean}, {out.scale}};
  }
}

// --- rollout -----------------------------------------------------------------------------------

ResidualRollout::ResidualRollout(const Residual& residual, const TimeSeries& data)
    : spec_(residual.spec), n_(data.size()), first_(residual.spec.first_sample()) {
  std::vector<std::string> slots;
  auto slot = [&](const std::string& name) {
    const auto it = std::find(slots.begin(), slots.end(), name);
    if (it != slots.end()) return static_cast<std::size_t>(it - slots.begin());
    slots.push_back(name);
    channels_.push_back(&data.channel(name));
    return slots.size() - 1;
  };
  auto state_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < spec_.states.size(); ++i) {
      if (spec_.states[i].name == name) return i;
    }
    throw std::invalid_argument(spec_.id + ": unknown state " + name);
  };

  for (const auto& s : spec_.states) state_proxy_.push_back(slot(s.proxy));
  compare_ = slot(spec_.compare_channel);

  const auto nets = spec_.nets();
  if (residual.nets.size() != nets.size()) throw DimensionMismatch("network count does not match residual " + spec_.id);
  for (std::size_t k = 0; k < nets.size(); ++k) {
    const Network& net = residual.nets[k];
    if (net.input.size() != nets[k]->inputs.size() || net.mlp.input_size() != nets[k]->inputs.size() ||
        net.mlp.output_size() != 1) {
      throw DimensionMismatch("network " + nets[k]->name + " does not match its declared inputs");
    }
    NetPlan plan{{}, net.output.mean[0], net.output.scale[0]};
    for (std::size_t i = 0; i < nets[k]->inputs.size(); ++i) {
      const auto& in = nets[k]->inputs[i];
      const bool is_state = in.kind == InputRef::Kind::state;
      plan.sources.push_back(
          {is_state, is_state ? state_index(in.name) : slot(in.name), in.lag, net.input.mean[i], net.input.scale[i]});
    }
    plans_.push_back(std::move(plan));
  }
  if (n_ <= first_) throw std::invalid_argument("series too short for residual " + spec_.id);
}

std::vector<double> ResidualRollout::initial_state() const {
  std::vector<double> s;
  for (std::size_t slot : state_proxy_) s.push_back((*channels_[slot])[0]);
  return s;
}

void ResidualRollout::encode(const NetPlan& plan, std::size_t t, std::span<const double> states,
                             std::vector<double>& z) const {
  z.resize(plan.sources.size());
  for (std::size_t i = 0; i < plan.sources.size(); ++i) {
    const Source& s = plan.sources[i];
    const double raw = s.is_state ? states[s.index] : (*channels_[s.index])[t - static_cast<std::size_t>(s.lag)];
    z[i] = (raw - s.mean) / s.scale;
  }
}

WindowResult ResidualRollout::run(const ParamSet& params, std::size_t begin, std::size_t end,
                                  std::vector<double>& state, GradSet* grads, std::span<double> errors) const {
  const std::size_t n_states = spec_.states.size();
  const std::size_t n_nets = plans_.size();
  const bool has_output_net = spec_.output_net.has_value();
  const double gain = spec_.feedback_gain;
  begin = std::max(begin, first_);
  end = std::min(end, n_);
  WindowResult res;
  if (begin >= end) return res;

  const std::size_t steps = end - begin;
  std::vector<ForwardCache> caches(grads ? steps * n_nets : n_nets);
  std::vector<double> resid(steps);
  std::vector<double> z, next(n_states);

  for (std::size_t t = begin; t < end; ++t) {
    ForwardCache* c = &caches[grads ? (t - begin) * n_nets : 0];
    for (std::size_t i = 0; i < n_states; ++i) {
      encode(plans_[i], t, state, z);
      params[i].forward(z, c[i]);
      const double out = plans_[i].out_mean + plans_[i].out_scale * c[i].output()[0];
      if (spec_.states[i].feedback) {
        next[i] = resolve_r6_implicit_update(state[i], out, (*channels_[state_proxy_[i]])[t], gain);
      } else {
        next[i] = out;
      }
    }
    std::copy(next.begin(), next.end(), state.begin());

    double pred;
    if (has_output_net) {
      const std::size_t k = n_nets - 1;
      encode(plans_[k], t, state, z);
      params[k].forward(z, c[k]);
      pred = plans_[k].out_mean + plans_[k].out_scale * c[k].output()[0];
    } else {
      pred = state[spec_.output_state];
    }
    const double r = (*channels_[compare_])[t] - pred;
    resid[t - begin] = r;
    if (!errors.empty()) errors[t] = r;
    res.sse += r * r;
    ++res.count;
  }

  if (grads) {
    std::vector<double> carry(n_states, 0.0), ds(n_states), upstream(1);
    for (std::size_t t = end; t-- > begin;) {
      const ForwardCache* c = &caches[(t - begin) * n_nets];
      ds = carry;
      const double dpred = -2.0 * resid[t - begin];
      if (has_output_net) {
        const std::size_t k = n_nets - 1;
        upstream[0] = dpred * plans_[k].out_scale;
        const auto din = backward(params[k], c[k], upstream, (*grads)[k]);
        for (std::size_t j = 0; j < din.size(); ++j) {
          const Source& s = plans_[k].sources[j];
          if (s.is_state) ds[s.index] += din[j] / s.scale;
        }
      } else {
        ds[spec_.output_state] += dpred;
      }
      std::fill(carry.begin(), carry.end(), 0.0);
      for (std::size_t i = 0; i < n_states; ++i) {
        double through_net = ds[i];
        if (spec_.states[i].feedback) {
          carry[i] += ds[i] / (1.0 + gain);
          through_net = ds[i] / (1.0 + gain);
        }
        upstream[0] = through_net * plans_[i].out_scale;
        const auto din = backward(params[i], c[i], upstream, (*grads)[i]);
        for (std::size_t j = 0; j < din.size(); ++j) {
          const Source& s = plans_[i].sources[j];
          if (s.is_state) carry[s.index] += din[j] / s.scale;
        }
      }
    }
  }
  return res;
}

std::vector<std::vector<double>> ResidualRollout::state_trace(const ParamSet& params) const {
  std::vector<std::vector<double>> trace(spec_.states.size(), std::vector<double>(n_, 0.0));
  auto state = initial_state();
  for (std::size_t i = 0; i < state.size(); ++i) trace[i][0] = state[i];
  for (std::size_t t = first_; t < n_; ++t) {
    run(params, t, t + 1, state, nullptr);
    for (std::size_t i = 0; i < state.size(); ++i) trace[i][t] = state[i];
  }
  return trace;
}

// --- training / evaluation ---------------------------------------------------------------------

std::size_t BankTraining::failures() const {
  return static_cast<std::size_t>(
      std::count_if(residuals.begin(), residuals.end(), [](const ResidualTraining& r) { return !r.error.empty(); }));
}

BankTraining train_bank(const ResidualBank& bank, const TimeSeries& nominal, const TrainConfig& cfg,
                        unsigned threads) {
  cfg.validate();
  nominal.check_consistent();
  BankTraining out;
  out.bank = bank;
  out.residuals.resize(bank.residuals.size());

  auto train_one = [&](std::size_t i) {
    Residual& r = out.bank.residuals[i];
    ResidualTraining& rec = out.residuals[i];
    rec.id = r.spec.id;
    fit_normalization(r, nominal);
    const ResidualRollout rollout(r, nominal);
    try {
      rec.result = bptt_train(rollout, r.params(), cfg);
      r.set_params(rec.result.params);
    } catch (const DivergedLoss& e) {
      rec.error = e.what();
    }
    const auto& c = nominal.channel(r.spec.compare_channel);
    const std::size_t split = rec.result.split ? rec.result.split : rollout.first_sample();
    rec.compare_variance = stats_of(std::span(c).subspan(split)).scale;
    rec.compare_variance *= rec.compare_variance;
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(bank.residuals.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < bank.residuals.size(); ++i) train_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < bank.residuals.size(); i = next++) train_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

std::vector<double> evaluate_residual(const Residual& r, const TimeSeries& data) {
  const ResidualRollout rollout(r, data);
  std::vector<double> out(data.size(), 0.0);
  auto state = rollout.initial_state();
  rollout.run(r.params(), 0, data.size(), state, nullptr, out);
  return out;
}

std::vector<std::vector<double>> evaluate_bank(const ResidualBank& bank, const TimeSeries& data) {
  data.check_consistent();
  std::vector<std::vector<double>> out;
  for (const auto& r : bank.residuals) out.push_back(evaluate_residual(r, data));
  return out;
}

// --- persistence -------------------------------------------------------------------------------

namespace {

nlohmann::json net_spec_json(const NetSpec& n) {
  std::vector<std::string> inputs;
  for (const auto& in : n.inputs) inputs.push_back(to_string(in));
  return {{"name", n.name}, {"inputs", inputs}};
}

NetSpec net_spec_from(const nlohmann::json& j) {
  NetSpec n;
  n.name = j.at("name").get<std::string>();
  for (const auto& s : j.at("inputs")) n.inputs.push_back(parse_input_ref(s.get<std::string>()));
  return n;
}

}  // namespace

void save_bank(const std::filesystem::path& dir, const ResidualBank& bank) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "tankdiag-bank";
  manifest["version"] = kBankFormatVersion;
  manifest["burn_in"] = bank.burn_in;
  auto list = nlohmann::json::array();
  for (const auto& r : bank.residuals) {
    nlohmann::json j;
    j["id"] = r.spec.id;
    j["support"] = r.spec.support;
    j["residual_equation"] = r.spec.residual_equation;
    j["topology"] = to_string(r.spec.topology);
    auto states = nlohmann::json::array();
    for (const auto& s : r.spec.states) {
      states.push_back({{"name", s.name}, {"proxy", s.proxy}, {"feedback", s.feedback}, {"net", net_spec_json(s.net)}});
    }
    j["states"] = std::move(states);
    j["output_net"] = r.spec.output_net ? net_spec_json(*r.spec.output_net) : nlohmann::json(nullptr);
    j["output_state"] = r.spec.output_state;
    j["compare_channel"] = r.spec.compare_channel;
    j["feedback_gain"] = r.spec.feedback_gain;
    auto files = nlohmann::json::array();
    const auto nets = r.spec.nets();
    for (std::size_t k = 0; k < nets.size(); ++k) {
      const std::string file = nets[k]->name + ".json";
      save_network(dir / file, r.nets[k]);
      files.push_back(file);
    }
    j["networks"] = std::move(files);
    list.push_back(std::move(j));
  }
  manifest["residuals"] = std::move(list);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(1) << '\n';
}

ResidualBank load_bank(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
  const auto manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != "tankdiag-bank") throw std::runtime_error("not a residual bank manifest");
  if (manifest.value("version", 0) != kBankFormatVersion) throw std::runtime_error("unsupported bank format version");

  ResidualBank bank;
  bank.burn_in = manifest.at("burn_in").get<std::size_t>();
  std::set<std::string> seen;
  for (const auto& j : manifest.at("residuals")) {
    Residual r;
    r.spec.id = j.at("id").get<std::string>();
    if (!seen.insert(r.spec.id).second) throw std::runtime_error("duplicate residual " + r.spec.id + " in bank");
    r.spec.support = j.at("support").get<std::vector<std::string>>();
    r.spec.residual_equation = j.at("residual_equation").get<std::string>();
    r.spec.topology = parse_topology(j.at("topology").get<std::string>());
    for (const auto& s : j.at("states")) {
      r.spec.states.push_back({s.at("name").get<std::string>(), s.at("proxy").get<std::string>(),
                               net_spec_from(s.at("net")), s.at("feedback").get<bool>()});
    }
    if (!j.at("output_net").is_null()) r.spec.output_net = net_spec_from(j.at("output_net"));
    r.spec.output_state = j.at("output_state").get<std::size_t>();
    r.spec.compare_channel = j.at("compare_channel").get<std::string>();
    r.spec.feedback_gain = j.at("feedback_gain").get<double>();
    const auto files = j.at("networks").get<std::vector<std::string>>();
    if (files.size() != r.spec.nets().size()) throw std::runtime_error("network list mismatch for " + r.spec.id);
    for (const auto& f : files) r.nets.push_back(load_network(dir / f));
    bank.residuals.push_back(std::move(r));
  }
  return bank;
}

}  // namespace tankdiag
