#include "glyphforge/gradcheck.hpp"

#include <cmath>

namespace gf {

GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, nn::NamedParams params,
                           double h, double denom_eps) {
    for (auto& [name, p] : params) p.zero_grad();
    Tensor loss = loss_fn();
    loss.backward();

    // Snapshot analytic grads before perturbing.
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& [name, p] : params) {
        p.grad_data();  // ensure allocated
        analytic.push_back(p.grad());
    }

    GradCheckResult res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi].second;
        double* w = p.data();
        for (int64_t j = 0; j < p.numel(); ++j) {
            const double keep = w[j];
            w[j] = keep + h;
            const double up = loss_fn().item();
            w[j] = keep - h;
            const double dn = loss_fn().item();
            w[j] = keep;
            const double num = (up - dn) / (2.0 * h);
            const double ana = analytic[pi][size_t(j)];
            const double rel = std::fabs(ana - num) / (std::fabs(ana) + std::fabs(num) + denom_eps);
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = params[pi].first;
                res.worst_index = j;
            }
        }
    }
    return res;
}

}  // namespace gf
