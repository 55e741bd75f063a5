#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "flowbench/rng.hpp"
#include "flowbench/tape.hpp"

namespace flowbench {

using GradMap = std::map<std::string, Tensor>;

/// Named parameter tensors plus Adam moments. Iteration order is the
/// creation order, which is part of the determinism contract.
class ParamStore {
 public:
  Tensor& create(const std::string& name, int rows, int cols);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::int64_t step_count() const { return step_; }

  /// Kaiming-uniform fill: U(-a, a) with a = sqrt(6 / fan_in).
  void init_kaiming(const std::string& name, Rng& rng);
  void init_zero(const std::string& name);

  std::size_t total_elements() const;

  struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  /// Bias-corrected Adam update; missing grads leave a tensor untouched.
  void adam_step(const GradMap& grads, const Adam& cfg);

  /// Versioned binary checkpoint ("FBCK"): config echo, tensors, moments,
  /// step counter.
  std::vector<std::uint8_t> serialize(const std::string& config_echo) const;
  static ParamStore deserialize(std::span<const std::uint8_t> bytes, std::string* config_echo);

 private:
  struct Entry {
    Tensor value;
    Tensor m;
    Tensor v;
  };
  std::vector<std::string> names_;
  std::map<std::string, Entry> entries_;
  std::int64_t step_ = 0;
};

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
  bool ok(double tol) const { return max_rel_error < tol; }
  std::string describe() const;
};

/// Central-difference validation of analytic gradients. loss_fn evaluates
/// the loss on the current parameters; when grads_out is non-null it must
/// also fill the analytic gradients. Parameters are restored afterwards.
FiniteDiffResult finite_diff_check(ParamStore& params,
                                   const std::function<double(GradMap* grads_out)>& loss_fn,
                                   double h = 1e-5);

}  // namespace flowbench
