#include "optim.hpp"

#include <cmath>

#include "error.hpp"

namespace dodo {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    if (!p.requires_grad()) fail(Errc::kInvalidArg, "adam: parameter without requires_grad");
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

double Adam::lr_at(std::uint64_t step, std::uint64_t total_steps) const {
  if (cfg_.warmup > 0 && step < cfg_.warmup)
    return cfg_.lr * static_cast<double>(step + 1) / static_cast<double>(cfg_.warmup);
  const std::uint64_t period = cfg_.period > 0 ? cfg_.period
                              : total_steps > cfg_.warmup ? total_steps - cfg_.warmup
                                                          : 1;
  const double progress =
      std::min(1.0, static_cast<double>(step - cfg_.warmup) / static_cast<double>(period));
  const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
  return cfg_.lr * (cfg_.floor + (1.0 - cfg_.floor) * cosine);
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (p.grad().size() != p.size()) continue;  // untouched by this loss
    const std::vector<double>& g = p.grad();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    std::vector<double>& x = p.data();
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      x[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace dodo
