#ifndef DODO_OPTIM_HPP_
#define DODO_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace dodo {

// Adam with cosine decay and linear warmup.
struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-5;
  std::uint64_t warmup = 200;
  std::uint64_t period = 0;  // cosine period; 0 = total steps handed to scheduler
  double floor = 0.1;        // terminal lr fraction
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  // Learning rate for a 0-based step index.
  double lr_at(std::uint64_t step, std::uint64_t total_steps) const;

  void step(double lr);
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
};

}  // namespace dodo

#endif  // DODO_OPTIM_HPP_
