#include "diffquad/policy.hpp"

#include <fstream>
#include <random>

#include "json.hpp"

namespace diffquad {

std::uint64_t observation_layout_checksum() {
  // FNV-1a over the canonical layout string
  std::uint64_t h = 1469598103934665603ull;
  for (const char* p = kObsLayout; *p; ++p) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(*p));
    h *= 1099511628211ull;
  }
  return h;
}

void ActionBounds::validate() const {
  if (!(omega_max.x > 0 && omega_max.y > 0 && omega_max.z > 0))
    throw std::invalid_argument("ActionBounds: omega_max must be positive");
  if (!(f_max > 0)) throw std::invalid_argument("ActionBounds: f_max must be positive");
}

Mlp::Mlp(std::vector<int> dims, std::uint64_t seed) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least one layer");
  std::size_t total = 0;
  for (int l = 0; l + 1 < static_cast<int>(dims_.size()); ++l) {
    w_off_.push_back(total);
    total += static_cast<std::size_t>(dims_[l + 1]) * static_cast<std::size_t>(dims_[l]);
    b_off_.push_back(total);
    total += static_cast<std::size_t>(dims_[l + 1]);
  }
  params_.assign(total, 0.0);

  // fan-in scaled normal init, biases zero
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l + 1 < static_cast<int>(dims_.size()); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    double* w = params_.data() + w_off_[static_cast<std::size_t>(l)];
    const std::size_t n =
        static_cast<std::size_t>(dims_[l + 1]) * static_cast<std::size_t>(dims_[l]);
    for (std::size_t i = 0; i < n; ++i) w[i] = scale * normal(rng);
  }
}

void Mlp::forward(std::span<const double> in, std::span<double> out) const {
  Trace scratch;
  forward_trace(in, out, scratch);
}

void Mlp::forward_trace(std::span<const double> in, std::span<double> out,
                        Trace& trace) const {
  if (static_cast<int>(in.size()) != in_dim() || static_cast<int>(out.size()) != out_dim())
    throw std::invalid_argument("Mlp::forward: dimension mismatch");
  std::size_t total = 0;
  for (int d : dims_) total += static_cast<std::size_t>(d);
  trace.acts.resize(total);

  double* a = trace.acts.data();
  std::copy(in.begin(), in.end(), a);
  const int L = num_layers();
  for (int l = 0; l < L; ++l) {
    const int din = dims_[static_cast<std::size_t>(l)];
    const int dout = dims_[static_cast<std::size_t>(l) + 1];
    const double* w = params_.data() + w_off_[static_cast<std::size_t>(l)];
    const double* b = params_.data() + b_off_[static_cast<std::size_t>(l)];
    double* next = a + din;
    for (int j = 0; j < dout; ++j) {
      const double* row = w + static_cast<std::size_t>(j) * static_cast<std::size_t>(din);
      double z = b[j];
      for (int i = 0; i < din; ++i) z += row[i] * a[i];
      next[j] = (l + 1 < L) ? std::tanh(z) : z;
    }
    a = next;
  }
  std::copy(a, a + out_dim(), out.begin());
}

void Mlp::input_jacobian(const Trace& trace, std::span<double> jac) const {
  const int L = num_layers();
  const std::size_t need =
      static_cast<std::size_t>(out_dim()) * static_cast<std::size_t>(in_dim());
  if (jac.size() != need) throw std::invalid_argument("input_jacobian: bad size");

  std::vector<std::size_t> off(dims_.size());
  for (std::size_t l = 1; l < dims_.size(); ++l)
    off[l] = off[l - 1] + static_cast<std::size_t>(dims_[l - 1]);

  std::vector<double> u, s;
  for (int k = 0; k < out_dim(); ++k) {
    u.assign(static_cast<std::size_t>(out_dim()), 0.0);
    u[static_cast<std::size_t>(k)] = 1.0;
    for (int l = L - 1; l >= 0; --l) {
      const int din = dims_[static_cast<std::size_t>(l)];
      const int dout = dims_[static_cast<std::size_t>(l) + 1];
      const double* w = params_.data() + w_off_[static_cast<std::size_t>(l)];
      const double* a_next = trace.acts.data() + off[static_cast<std::size_t>(l) + 1];
      s.assign(static_cast<std::size_t>(dout), 0.0);
      for (int j = 0; j < dout; ++j)
        s[static_cast<std::size_t>(j)] =
            (l + 1 < L) ? u[static_cast<std::size_t>(j)] * (1.0 - a_next[j] * a_next[j])
                        : u[static_cast<std::size_t>(j)];
      u.assign(static_cast<std::size_t>(din), 0.0);
      for (int j = 0; j < dout; ++j) {
        const double sj = s[static_cast<std::size_t>(j)];
        if (sj == 0.0) continue;
        const double* row = w + static_cast<std::size_t>(j) * static_cast<std::size_t>(din);
        for (int i = 0; i < din; ++i) u[static_cast<std::size_t>(i)] += sj * row[i];
      }
    }
    std::copy(u.begin(), u.end(),
              jac.begin() + static_cast<std::ptrdiff_t>(
                                static_cast<std::size_t>(k) *
                                static_cast<std::size_t>(in_dim())));
  }
}

void Mlp::param_vjp(const Trace& trace, std::span<const double> out_adjoint,
                    std::span<double> grad) const {
  if (static_cast<int>(out_adjoint.size()) != out_dim() || grad.size() != params_.size())
    throw std::invalid_argument("param_vjp: bad sizes");

  std::vector<std::size_t> off(dims_.size());
  for (std::size_t l = 1; l < dims_.size(); ++l)
    off[l] = off[l - 1] + static_cast<std::size_t>(dims_[l - 1]);

  const int L = num_layers();
  std::vector<double> u(out_adjoint.begin(), out_adjoint.end());
  std::vector<double> s;
  for (int l = L - 1; l >= 0; --l) {
    const int din = dims_[static_cast<std::size_t>(l)];
    const int dout = dims_[static_cast<std::size_t>(l) + 1];
    const double* w = params_.data() + w_off_[static_cast<std::size_t>(l)];
    const double* a = trace.acts.data() + off[static_cast<std::size_t>(l)];
    const double* a_next = trace.acts.data() + off[static_cast<std::size_t>(l) + 1];
    double* gw = grad.data() + w_off_[static_cast<std::size_t>(l)];
    double* gb = grad.data() + b_off_[static_cast<std::size_t>(l)];

    s.assign(static_cast<std::size_t>(dout), 0.0);
    for (int j = 0; j < dout; ++j)
      s[static_cast<std::size_t>(j)] =
          (l + 1 < L) ? u[static_cast<std::size_t>(j)] * (1.0 - a_next[j] * a_next[j])
                      : u[static_cast<std::size_t>(j)];

    for (int j = 0; j < dout; ++j) {
      const double sj = s[static_cast<std::size_t>(j)];
      if (sj == 0.0) continue;
      double* grow = gw + static_cast<std::size_t>(j) * static_cast<std::size_t>(din);
      for (int i = 0; i < din; ++i) grow[i] += sj * a[i];
      gb[j] += sj;
    }
    u.assign(static_cast<std::size_t>(din), 0.0);
    for (int j = 0; j < dout; ++j) {
      const double sj = s[static_cast<std::size_t>(j)];
      if (sj == 0.0) continue;
      const double* row = w + static_cast<std::size_t>(j) * static_cast<std::size_t>(din);
      for (int i = 0; i < din; ++i) u[static_cast<std::size_t>(i)] += sj * row[i];
    }
  }
}

PolicyConfig PolicyConfig::from_config(const Config& cfg) {
  PolicyConfig p;
  const auto hidden = cfg.get_doubles("policy.hidden", {});
  if (!hidden.empty()) {
    p.hidden.clear();
    for (double h : hidden) p.hidden.push_back(static_cast<int>(h));
  }
  p.seed = static_cast<std::uint64_t>(cfg.get_int("policy.seed", static_cast<int>(p.seed)));
  return p;
}

Policy::Policy(const PolicyConfig& cfg, const ActionBounds& bounds) : bounds_(bounds) {
  bounds_.validate();
  std::vector<int> dims;
  dims.push_back(kObsDim);
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(kPolicyOutDim);
  net_ = Mlp(std::move(dims), cfg.seed);
}

std::array<double, kPolicyOutDim> Policy::raw(std::span<const double> obs) const {
  std::array<double, kPolicyOutDim> out{};
  net_.forward(obs, out);
  return out;
}

Action Policy::act(std::span<const double> obs) const {
  return squash_action(raw(obs), bounds_);
}

std::array<Var, kPolicyOutDim> Policy::raw_on_tape(Tape& tape,
                                                   std::span<const Var> obs,
                                                   EvalRecord& rec) const {
  if (static_cast<int>(obs.size()) != kObsDim)
    throw std::invalid_argument("raw_on_tape: observation must have 205 entries");
  std::vector<double> values(static_cast<std::size_t>(kObsDim));
  for (int i = 0; i < kObsDim; ++i)
    values[static_cast<std::size_t>(i)] = obs[static_cast<std::size_t>(i)].v;

  std::array<double, kPolicyOutDim> out{};
  net_.forward_trace(values, out, rec.trace);

  std::vector<double> jac(static_cast<std::size_t>(kPolicyOutDim) *
                          static_cast<std::size_t>(kObsDim));
  net_.input_jacobian(rec.trace, jac);

  for (int k = 0; k < kPolicyOutDim; ++k) {
    const std::span<const double> row(
        jac.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(kObsDim),
        static_cast<std::size_t>(kObsDim));
    rec.raw[static_cast<std::size_t>(k)] =
        tape.record_n(out[static_cast<std::size_t>(k)], obs, row);
  }
  return rec.raw;
}

void Policy::accumulate_param_grad(const EvalRecord& rec, const Tape& tape,
                                   std::span<double> grad) const {
  std::array<double, kPolicyOutDim> adj{};
  bool any = false;
  for (int k = 0; k < kPolicyOutDim; ++k) {
    adj[static_cast<std::size_t>(k)] = tape.grad(rec.raw[static_cast<std::size_t>(k)]);
    any = any || adj[static_cast<std::size_t>(k)] != 0.0;
  }
  if (!any) return;
  net_.param_vjp(rec.trace, adj, grad);
}

void Policy::save(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "diffquad-policy";
  j["version"] = 1;
  j["obs_layout"] = kObsLayout;
  j["obs_checksum"] = observation_layout_checksum();
  j["dims"] = net_.dims();
  j["activation"] = "tanh";
  j["omega_max"] = {bounds_.omega_max.x, bounds_.omega_max.y, bounds_.omega_max.z};
  j["f_max"] = bounds_.f_max;
  j["weights"] = net_.params();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump();
}

Policy Policy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  in >> j;

  if (j.value("format", "") != "diffquad-policy")
    throw std::runtime_error("checkpoint format mismatch: " + path);
  if (j.value("obs_checksum", 0ull) != observation_layout_checksum())
    throw std::runtime_error("checkpoint observation-layout checksum mismatch: " + path);

  const auto dims = j.at("dims").get<std::vector<int>>();
  if (dims.size() < 2 || dims.front() != kObsDim || dims.back() != kPolicyOutDim)
    throw std::runtime_error("checkpoint layer shapes do not match this build");

  Policy p;
  const auto om = j.at("omega_max").get<std::vector<double>>();
  if (om.size() != 3) throw std::runtime_error("checkpoint omega_max must have 3 entries");
  p.bounds_.omega_max = {om[0], om[1], om[2]};
  p.bounds_.f_max = j.at("f_max").get<double>();
  p.bounds_.validate();

  p.net_ = Mlp(dims, 0);
  auto weights = j.at("weights").get<std::vector<double>>();
  if (weights.size() != p.net_.params().size())
    throw std::runtime_error("checkpoint weight count does not match layer shapes");
  p.net_.params() = std::move(weights);
  return p;
}

}  // namespace diffquad
