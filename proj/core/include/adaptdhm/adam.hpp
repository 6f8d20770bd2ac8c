#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace adaptdhm {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over one parameter group. A group may span several
// tensors: call begin_step() once, then update() per tensor with its offset
// into the group's flat layout. Groups that receive no gradients in a batch
// must simply not call begin_step(), which is what keeps untouched cluster
// branches bit-identical.
class AdamState {
 public:
  AdamState() = default;
  AdamState(size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void begin_step() { ++step_; }
  void update(size_t offset, std::span<double> params, std::span<const double> grads);

  uint64_t steps() const { return step_; }
  size_t size() const { return m_.size(); }
  const AdamConfig& config() const { return cfg_; }

  // checkpoint access
  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void restore(std::vector<double> m, std::vector<double> v, uint64_t step);

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  uint64_t step_ = 0;
};

}  // namespace adaptdhm
