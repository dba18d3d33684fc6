#pragma once

// Bias-corrected Adam over named parameter tensors.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "igt/tensor.hpp"

namespace igt {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<NamedParam> params, AdamConfig cfg) : cfg_(cfg), params_(std::move(params)) {
    for (const NamedParam& p : params_) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return t_; }
  const std::vector<NamedParam>& params() const { return params_; }

  void zero_grad() {
    for (NamedParam& p : params_) p.tensor.ensure_zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Tensor& p = params_[pi].tensor;
      if (!p.has_grad())
        throw TensorError("adam: parameter '" + params_[pi].name + "' has no gradient");
      auto g = p.grad();
      auto w = p.mutable_values();
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  // Moment buffers keyed by parameter name, for checkpointing.
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }
  void restore_state(std::size_t i, std::vector<double> m, std::vector<double> v) {
    if (m.size() != m_[i].size() || v.size() != v_[i].size())
      throw TensorError("adam: moment size mismatch on restore");
    m_[i] = std::move(m);
    v_[i] = std::move(v);
  }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace igt
