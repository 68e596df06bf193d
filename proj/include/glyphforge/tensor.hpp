#ifndef GLYPHFORGE_TENSOR_HPP
#define GLYPHFORGE_TENSOR_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "glyphforge/errors.hpp"
#include "glyphforge/rng.hpp"

namespace gf {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

// Reverse-mode autodiff tensor, double precision, dense row-major.
// Value semantics on the handle; copies share the underlying node.
class Tensor {
public:
    struct Node {
        std::vector<double> value;
        std::vector<double> grad;  // allocated on first use
        Shape shape;
        bool requires_grad = false;
        uint64_t seq = 0;  // creation order; a valid topological order
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward;

        void ensure_grad() {
            if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
        }
    };

    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor from_vec(const Shape& shape, std::vector<double> data,
                           bool requires_grad = false);
    static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0,
                        bool requires_grad = false);
    static Tensor uniform(const Shape& shape, Rng& rng, double lo, double hi,
                          bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return int(node_->shape.size()); }
    int dim(int i) const { return node_->shape[size_t(i)]; }
    int64_t numel() const { return int64_t(node_->value.size()); }

    double* data() { return node_->value.data(); }
    const double* data() const { return node_->value.data(); }
    std::vector<double>& vec() { return node_->value; }
    const std::vector<double>& vec() const { return node_->value; }

    double item() const;
    double at(int64_t i) const { return node_->value[size_t(i)]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg);

    double* grad_data();
    const std::vector<double>& grad() const { return node_->grad; }
    void zero_grad();

    // Runs reverse-mode accumulation from this scalar.
    void backward();

    // Value copy detached from the graph.
    Tensor detach() const;
    // Copies values from another tensor of identical shape (no graph edge).
    void copy_values_from(const Tensor& other);

    std::shared_ptr<Node> node() const { return node_; }
    static Tensor wrap(std::shared_ptr<Node> n) {
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }

    // Creates a node; records parents/backward only when grads are enabled
    // and some parent needs them.
    static Tensor make(Shape shape, std::vector<double> value,
                       std::vector<Tensor> parents,
                       std::function<void(Node&)> backward);

private:
    std::shared_ptr<Node> node_;
};

// Scoped switch disabling graph recording (inference / data preparation).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

}  // namespace gf

#endif
