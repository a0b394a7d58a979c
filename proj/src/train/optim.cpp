#include "kgvqa/train/optim.hpp"

#include <cmath>
#include <numbers>

#include "kgvqa/error.hpp"

namespace kgvqa::train {

AdamState AdamState::for_params(const ad::ParamStore& params) {
    AdamState s;
    for (const auto& e : params) {
        s.m.emplace_back(e.tensor.size(), 0.0);
        s.v.emplace_back(e.tensor.size(), 0.0);
    }
    return s;
}

void adam_step(ad::ParamStore& params, AdamState& state, double lr, const AdamConfig& config) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw Error(ErrorCode::kShapeMismatch, "adam_step: optimizer state does not match parameters");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto& t = params[p];
        if (state.m[p].size() != t.size() || state.v[p].size() != t.size() ||
            (!t.grad.empty() && t.grad.size() != t.size())) {
            throw Error(ErrorCode::kShapeMismatch, "adam_step: state shape mismatch for '" + params.name(p) + "'");
        }
        for (double g : t.grad) {
            if (!std::isfinite(g)) {
                throw Error(ErrorCode::kNonFinite, "adam_step: non-finite gradient in '" + params.name(p) + "'");
            }
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& t = params[p];
        if (t.grad.empty()) continue;
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double g = t.grad[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            t.values[i] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
        }
    }
}

double clip_grad_norm(ad::ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& e : params)
        for (double g : e.tensor.grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& e : params)
            for (auto& g : e.tensor.grad) g *= s;
    }
    return norm;
}

double lr_at(std::size_t step, std::size_t total_steps, const ScheduleConfig& config) {
    if (total_steps == 0 || step >= total_steps) {
        throw Error(ErrorCode::kPrecondition, "lr_at: step " + std::to_string(step) + " outside [0, " +
                                                  std::to_string(total_steps) + ")");
    }
    if (config.epochs == 0 || config.warmup_epochs >= config.epochs) {
        throw Error(ErrorCode::kPrecondition, "lr_at: warm-up epochs must be fewer than total epochs");
    }
    const std::size_t warmup_steps = total_steps * config.warmup_epochs / config.epochs;
    if (step < warmup_steps) {
        const double frac = static_cast<double>(step) / static_cast<double>(warmup_steps);
        return config.lr_max * (config.warmup_factor + (1.0 - config.warmup_factor) * frac);
    }

    double progress = 1.0;
    if (config.per_epoch_annealing) {
        const std::size_t steps_per_epoch = std::max<std::size_t>(1, total_steps / config.epochs);
        const std::size_t epoch = std::min(step / steps_per_epoch, config.epochs - 1);
        const std::size_t span = config.epochs - 1 - config.warmup_epochs;
        if (span > 0) progress = static_cast<double>(epoch - std::min(epoch, config.warmup_epochs)) / span;
    } else {
        const std::size_t span = total_steps - 1 - warmup_steps;
        if (span > 0) progress = static_cast<double>(step - warmup_steps) / static_cast<double>(span);
    }
    return config.lr_min + 0.5 * (config.lr_max - config.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace kgvqa::train
