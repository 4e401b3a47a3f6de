#include "liteseg/optim.hpp"

#include <cmath>

namespace liteseg {

void ScheduleConfig::validate() const {
    if (base_lr <= 0.0f) throw ConfigError("schedule base_lr must be positive");
    if (max_iters < 1) throw ConfigError("schedule max_iters must be >= 1");
    if (power <= 0.0f) throw ConfigError("schedule power must be positive");
    if (warmup_iters < 0 || warmup_iters >= max_iters) {
        throw ConfigError("schedule requires 0 <= warmup_iters < max_iters");
    }
    if (warmup_start_factor < 0.0f || warmup_start_factor > 1.0f) {
        throw ConfigError("schedule warmup_start_factor must be in [0, 1]");
    }
}

float poly_lr(std::int64_t iter, const ScheduleConfig& cfg) {
    cfg.validate();
    if (iter < 0) throw ConfigError("poly_lr iteration must be >= 0");
    if (iter > cfg.max_iters) iter = cfg.max_iters;
    if (iter < cfg.warmup_iters) {
        double t = static_cast<double>(iter) / static_cast<double>(cfg.warmup_iters);
        double factor = cfg.warmup_start_factor + (1.0 - cfg.warmup_start_factor) * t;
        return static_cast<float>(cfg.base_lr * factor);
    }
    double span = static_cast<double>(cfg.max_iters - cfg.warmup_iters);
    double remaining = 1.0 - static_cast<double>(iter - cfg.warmup_iters) / span;
    return static_cast<float>(cfg.base_lr * std::pow(remaining, static_cast<double>(cfg.power)));
}

SgdOptimizer::SgdOptimizer(std::vector<ParamRef> params, float momentum, float weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
    for (ParamRef& p : params) {
        if (!p.trainable) continue;
        params_.push_back(std::move(p));
    }
    velocity_.reserve(params_.size());
    for (const ParamRef& p : params_) {
        velocity_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0f);
    }
}

void SgdOptimizer::step(float lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ParamRef& p = params_[i];
        if (!p.tensor.has_grad()) {
            throw Error("sgd step: parameter '" + p.name + "' has no gradient");
        }
        const std::vector<float>& g = p.tensor.grad();
        std::vector<float>& v = velocity_[i];
        std::vector<float>& w = p.tensor.vec();
        const float wd = p.no_decay ? 0.0f : weight_decay_;
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (!std::isfinite(g[j])) {
                throw NumericError("non-finite gradient in parameter '" + p.name + "'");
            }
            v[j] = momentum_ * v[j] + g[j] + wd * w[j];
            w[j] -= lr * v[j];
        }
    }
}

void SgdOptimizer::zero_grad() {
    for (ParamRef& p : params_) p.tensor.zero_grad();
}

}  // namespace liteseg
