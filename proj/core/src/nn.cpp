#include "flowbench/nn.hpp"

#include <cmath>

#include "flowbench/binio.hpp"

namespace flowbench {

Tensor& ParamStore::create(const std::string& name, int rows, int cols) {
  auto [it, inserted] = entries_.try_emplace(name);
  if (!inserted) throw FlowbenchError("parameter already exists: " + name);
  names_.push_back(name);
  it->second.value = Tensor(rows, cols);
  it->second.m = Tensor(rows, cols);
  it->second.v = Tensor(rows, cols);
  return it->second.value;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw FlowbenchError("unknown parameter: " + name);
  return it->second.value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw FlowbenchError("unknown parameter: " + name);
  return it->second.value;
}

bool ParamStore::has(const std::string& name) const { return entries_.count(name) != 0; }

void ParamStore::init_kaiming(const std::string& name, Rng& rng) {
  Tensor& t = get(name);
  double bound = std::sqrt(6.0 / double(t.rows));
  for (double& x : t.v) x = (2.0 * rng.uniform() - 1.0) * bound;
}

void ParamStore::init_zero(const std::string& name) {
  Tensor& t = get(name);
  std::fill(t.v.begin(), t.v.end(), 0.0);
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& name : names_) n += entries_.at(name).value.size();
  return n;
}

void ParamStore::adam_step(const GradMap& grads, const Adam& cfg) {
  step_ += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(step_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(step_));
  for (const auto& name : names_) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    Entry& e = entries_.at(name);
    const Tensor& g = git->second;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      e.m.v[i] = cfg.beta1 * e.m.v[i] + (1.0 - cfg.beta1) * g.v[i];
      e.v.v[i] = cfg.beta2 * e.v.v[i] + (1.0 - cfg.beta2) * g.v[i] * g.v[i];
      double mhat = e.m.v[i] / bc1;
      double vhat = e.v.v[i] / bc2;
      e.value.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

std::vector<std::uint8_t> ParamStore::serialize(const std::string& config_echo) const {
  BinWriter w;
  w.magic("FBCK");
  w.u32(1);  // format version
  w.str(config_echo);
  w.u64(static_cast<std::uint64_t>(step_));
  w.u32(static_cast<std::uint32_t>(names_.size()));
  for (const auto& name : names_) {
    const Entry& e = entries_.at(name);
    w.str(name);
    w.u32(static_cast<std::uint32_t>(e.value.rows));
    w.u32(static_cast<std::uint32_t>(e.value.cols));
    w.array<double>(e.value.v);
    w.array<double>(e.m.v);
    w.array<double>(e.v.v);
  }
  return w.bytes();
}

ParamStore ParamStore::deserialize(std::span<const std::uint8_t> bytes, std::string* config_echo) {
  BinReader r(bytes);
  r.expect_magic("FBCK");
  std::uint32_t version = r.u32();
  if (version != 1) throw FlowbenchError("unsupported FBCK version " + std::to_string(version));
  std::string echo = r.str();
  if (config_echo) *config_echo = echo;

  ParamStore store;
  store.step_ = static_cast<std::int64_t>(r.u64());
  std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    int rows = static_cast<int>(r.u32());
    int cols = static_cast<int>(r.u32());
    Tensor& t = store.create(name, rows, cols);
    t.v = r.array<double>();
    Entry& e = store.entries_.at(name);
    e.m.v = r.array<double>();
    e.v.v = r.array<double>();
    if (t.v.size() != std::size_t(rows) * cols) throw FlowbenchError("checkpoint tensor size mismatch");
  }
  return store;
}

std::string FiniteDiffResult::describe() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max relative error %.3e at %s[%d]", max_rel_error,
                worst_param.c_str(), worst_index);
  return buf;
}

FiniteDiffResult finite_diff_check(ParamStore& params,
                                   const std::function<double(GradMap* grads_out)>& loss_fn,
                                   double h) {
  GradMap analytic;
  loss_fn(&analytic);

  FiniteDiffResult result;
  for (const auto& name : params.names()) {
    Tensor& t = params.get(name);
    auto git = analytic.find(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      double saved = t.v[i];
      t.v[i] = saved + h;
      double up = loss_fn(nullptr);
      t.v[i] = saved - h;
      double down = loss_fn(nullptr);
      t.v[i] = saved;
      double numeric = (up - down) / (2.0 * h);
      double an = git == analytic.end() ? 0.0 : git->second.v[i];
      double denom = std::max({std::abs(numeric), std::abs(an), 1e-6});
      double rel = std::abs(numeric - an) / denom;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = name;
        result.worst_index = static_cast<int>(i);
      }
    }
  }
  return result;
}

}  // namespace flowbench
