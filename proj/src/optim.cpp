#include "glyphforge/optim.hpp"

#include <cmath>

namespace gf::optim {

double LrSchedule::at(int step) const {
    if (warmup_steps > 0 && step < warmup_steps)
        return base_lr * double(step + 1) / double(warmup_steps);
    if (id == "constant") return base_lr;
    if (id == "cosine" || id == "warmup-cosine") {
        const double p = std::min(1.0, double(step - warmup_steps) /
                                           std::max(1, total_steps - warmup_steps));
        return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * p));
    }
    throw ConfigError("unknown lr schedule id: " + id);
}

Adam::Adam(nn::NamedParams params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(size_t(params_[i].second.numel()), 0.0);
        v_[i].assign(size_t(params_[i].second.numel()), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i].second;
        if (p.grad().empty()) continue;
        double* w = p.data();
        const double* g = p.grad().data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        const int64_t n = p.numel();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Sgd::zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
}

void Sgd::step() {
    for (auto& [name, p] : params_) {
        if (p.grad().empty()) continue;
        double* w = p.data();
        const double* g = p.grad().data();
        for (int64_t j = 0; j < p.numel(); ++j) w[j] -= lr_ * g[j];
    }
}

}  // namespace gf::optim
