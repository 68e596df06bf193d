#ifndef GLYPHFORGE_GRADCHECK_HPP
#define GLYPHFORGE_GRADCHECK_HPP

#include <functional>

#include "glyphforge/nn.hpp"
#include "glyphforge/tensor.hpp"

namespace gf {

// Central finite differences vs analytic gradients over every element of the
// given parameters. `loss_fn` must rebuild the graph from current parameter
// values on each call. Returns the worst relative error max(|a-n|/(|a|+|n|+eps)).
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
};

GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, nn::NamedParams params,
                           double h = 1e-5, double denom_eps = 1e-8);

}  // namespace gf

#endif
