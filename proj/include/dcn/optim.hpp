#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dcn/autodiff.hpp"
#include "dcn/errors.hpp"
#include "dcn/tensor.hpp"

namespace dcn {

// Adam with bias correction. One (m,v) pair per registered parameter.
template <typename T>
class Adam {
 public:
  struct Hyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::vector<Parameter<T>*> params, Hyper hp) : params_(std::move(params)), hp_(hp) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape, T(0));
      v_.emplace_back(p->value.shape, T(0));
    }
  }

  void step() {
    ++step_count_;
    double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(step_count_));
    double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Parameter<T>& p = *params_[pi];
      if (!p.grad.all_finite())
        throw NumericError("adam: non-finite gradient in parameter '" + p.name + "'");
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        double g = static_cast<double>(p.grad[i]);
        double m = hp_.beta1 * static_cast<double>(m_[pi][i]) + (1.0 - hp_.beta1) * g;
        double v = hp_.beta2 * static_cast<double>(v_[pi][i]) + (1.0 - hp_.beta2) * g * g;
        m_[pi][i] = static_cast<T>(m);
        v_[pi][i] = static_cast<T>(v);
        double mhat = m / bc1;
        double vhat = v / bc2;
        p.value[i] -= static_cast<T>(hp_.lr * mhat / (std::sqrt(vhat) + hp_.eps));
      }
    }
  }

  std::uint64_t step_count() const { return step_count_; }
  const Hyper& hyper() const { return hp_; }

  // Checkpoint access: moments are serialized alongside the parameters.
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  void set_step_count(std::uint64_t s) { step_count_ = s; }

 private:
  std::vector<Parameter<T>*> params_;
  Hyper hp_;
  std::vector<Tensor<T>> m_, v_;
  std::uint64_t step_count_ = 0;
};

}  // namespace dcn
