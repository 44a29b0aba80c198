#include "hazard/nn/optim.hpp"

#include <cmath>
#include <numbers>

namespace hazard::nn {

AdamW::AdamW(std::vector<ad::Parameter*> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
    for (auto* p : params_) {
        m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

double AdamW::step(double lr) {
    double sq = 0.0;
    for (auto* p : params_) {
        if (p->grad.size() != 0) sq += p->grad.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    const double clip = (config_.grad_clip > 0.0 && norm > config_.grad_clip) ? config_.grad_clip / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ad::Parameter& p = *params_[i];
        if (p.grad.size() == 0) continue;
        const ad::Matrix g = p.grad * clip;
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
        // Decay matrices only; biases and norm gains are single rows.
        if (config_.weight_decay > 0.0 && p.value.rows() > 1) p.value *= (1.0 - lr * config_.weight_decay);
        p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
    }
    return norm;
}

void AdamW::zero_grad() {
    for (auto* p : params_) p->grad.resize(0, 0);
}

double warmup_cosine(long step, long total, long warmup, double peak, double floor) {
    if (total <= 0) return peak;
    if (step < warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const double progress =
        std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(std::max(1L, total - warmup)));
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return peak * (floor + (1.0 - floor) * cosine);
}

}  // namespace hazard::nn
