#include "adaptdhm/adam.hpp"

#include <cmath>
#include <string>

#include "adaptdhm/error.hpp"

namespace adaptdhm {

void AdamState::update(size_t offset, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size())
    fail("adam: parameter/gradient size mismatch (" + std::to_string(params.size()) + " vs " +
         std::to_string(grads.size()) + ")");
  if (offset + params.size() > m_.size()) fail("adam: update range exceeds state size");
  require(step_ > 0, "adam: update() before begin_step()");

  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t i = 0; i < params.size(); ++i) {
    double& m = m_[offset + i];
    double& v = v_[offset + i];
    const double g = grads[i];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    params[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
  }
}

void AdamState::restore(std::vector<double> m, std::vector<double> v, uint64_t step) {
  require(m.size() == m_.size() && v.size() == v_.size(), "adam: restore size mismatch");
  m_ = std::move(m);
  v_ = std::move(v);
  step_ = step;
}

}  // namespace adaptdhm
