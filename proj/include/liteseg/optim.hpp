#pragma once

#include "liteseg/nn.hpp"

namespace liteseg {

// Poly learning rate with optional linear warmup:
//   iter < warmup_iters: linear from warmup_start_factor*base_lr to base_lr
//   after:               base_lr * (1 - (iter-warmup)/(max_iters-warmup))^power
// The curve is continuous at warmup_iters and reaches 0 at max_iters.
struct ScheduleConfig {
    float base_lr = 0.005f;
    std::int64_t max_iters = 1000;
    float power = 0.9f;
    std::int64_t warmup_iters = 0;
    float warmup_start_factor = 0.1f;

    void validate() const;
};

float poly_lr(std::int64_t iter, const ScheduleConfig& cfg);

// SGD with momentum and decoupled-from-BN weight decay:
//   v <- momentum*v + g + weight_decay*p   (decay skipped for no_decay params)
//   p <- p - lr*v
class SgdOptimizer {
  public:
    SgdOptimizer(std::vector<ParamRef> params, float momentum, float weight_decay);

    // Applies one update from the accumulated gradients; throws NumericError
    // on any non-finite gradient.
    void step(float lr);
    void zero_grad();

    const std::vector<ParamRef>& params() const { return params_; }

  private:
    std::vector<ParamRef> params_;  // trainable entries only
    std::vector<std::vector<float>> velocity_;
    float momentum_;
    float weight_decay_;
};

}  // namespace liteseg
