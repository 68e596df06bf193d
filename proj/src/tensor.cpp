#include "glyphforge/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace gf {

namespace {
std::atomic<uint64_t> g_seq{1};
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

static std::shared_ptr<Tensor::Node> new_node(Shape shape, std::vector<double> value) {
    auto n = std::make_shared<Tensor::Node>();
    if (int64_t(value.size()) != shape_numel(shape))
        throw ArgumentError("tensor data size " + std::to_string(value.size()) +
                            " does not match shape " + shape_str(shape));
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return n;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    auto n = new_node(shape, std::vector<double>(size_t(shape_numel(shape)), 0.0));
    n->requires_grad = requires_grad;
    return wrap(n);
}

Tensor Tensor::full(const Shape& shape, double v, bool requires_grad) {
    auto n = new_node(shape, std::vector<double>(size_t(shape_numel(shape)), v));
    n->requires_grad = requires_grad;
    return wrap(n);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return full({1}, v, requires_grad);
}

Tensor Tensor::from_vec(const Shape& shape, std::vector<double> data, bool requires_grad) {
    auto n = new_node(shape, std::move(data));
    n->requires_grad = requires_grad;
    return wrap(n);
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev, bool requires_grad) {
    std::vector<double> v(size_t(shape_numel(shape)));
    for (auto& x : v) x = rng.normal(0.0, stddev);
    return from_vec(shape, std::move(v), requires_grad);
}

Tensor Tensor::uniform(const Shape& shape, Rng& rng, double lo, double hi, bool requires_grad) {
    std::vector<double> v(size_t(shape_numel(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return from_vec(shape, std::move(v), requires_grad);
}

double Tensor::item() const {
    if (numel() != 1) throw ArgumentError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
}

void Tensor::set_requires_grad(bool rg) {
    if (rg && node_->backward)
        throw ContractError("set_requires_grad on a non-leaf tensor");
    node_->requires_grad = rg;
}

double* Tensor::grad_data() {
    node_->ensure_grad();
    return node_->grad.data();
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    auto n = new_node(node_->shape, node_->value);
    return wrap(n);
}

void Tensor::copy_values_from(const Tensor& other) {
    if (!same_shape(shape(), other.shape()))
        throw ArgumentError("copy_values_from shape mismatch");
    node_->value = other.node_->value;
}

Tensor Tensor::make(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                    std::function<void(Node&)> backward) {
    auto n = new_node(std::move(shape), std::move(value));
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& p : parents)
            if (p.defined() && p.requires_grad()) { needs = true; break; }
    }
    if (needs) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (const auto& p : parents)
            if (p.defined()) n->parents.push_back(p.node());
        n->backward = std::move(backward);
    }
    return wrap(n);
}

void Tensor::backward() {
    if (numel() != 1) throw ArgumentError("backward() requires a scalar root");
    if (!node_->requires_grad) return;

    // Collect the reachable graph; creation order is a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const Node* a, const Node* b) { return a->seq > b->seq; });

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (Node* n : order) {
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

}  // namespace gf
