#include "arteeg/tensor.hpp"

#include <cmath>
#include <sstream>

namespace arteeg {

std::string Shape::str() const {
    std::ostringstream os;
    os << "[";
    for (int i = 0; i < rank; ++i) os << (i ? "x" : "") << d[i];
    os << "]";
    return os.str();
}

namespace detail {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool b) { g_grad_enabled = b; }

void check_finite(const Eigen::ArrayXd& v, const char* op) {
    if (!v.allFinite())
        throw NumericalError(std::string("non-finite values produced by ") + op);
}

} // namespace detail

Tensor Tensor::zeros(const Shape& s) {
    return from_flat(s, Eigen::ArrayXd::Zero(s.size()));
}

Tensor Tensor::constant(const Shape& s, double v) {
    return from_flat(s, Eigen::ArrayXd::Constant(s.size(), v));
}

Tensor Tensor::from_flat(const Shape& s, Eigen::ArrayXd data) {
    if (data.size() != s.size())
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + s.str());
    auto n = std::make_shared<detail::Node>();
    n->shape = s;
    n->value = std::move(data);
    return Tensor(n);
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m) {
    Shape s(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
    Eigen::ArrayXd flat(s.size());
    MatMap(flat.data(), m.rows(), m.cols()) = m;
    return from_flat(s, std::move(flat));
}

Tensor Tensor::from_vector(const Eigen::VectorXd& v) {
    Shape s(static_cast<int>(v.size()));
    return from_flat(s, v.array());
}

Tensor Tensor::scalar_value(double v) {
    Shape s;
    s.rank = 0;
    Eigen::ArrayXd one(1);
    one[0] = v;
    return from_flat(s, std::move(one));
}

Eigen::ArrayXd& Tensor::leaf_values() {
    if (!node().leaf) throw UsageError("leaf_values on non-leaf tensor");
    return node().value;
}

double Tensor::scalar() const {
    if (size() != 1) throw ShapeError("scalar() on tensor of shape " + shape().str());
    return node().value[0];
}

double Tensor::operator()(int i) const {
    if (rank() != 1) throw ShapeError("1-index access on rank " + std::to_string(rank()));
    return node().value[i];
}

double Tensor::operator()(int i, int j) const {
    if (rank() != 2) throw ShapeError("2-index access on rank " + std::to_string(rank()));
    return node().value[static_cast<long>(i) * shape().d[1] + j];
}

double Tensor::operator()(int i, int j, int k) const {
    if (rank() != 3) throw ShapeError("3-index access on rank " + std::to_string(rank()));
    const Shape& s = shape();
    return node().value[(static_cast<long>(i) * s.d[1] + j) * s.d[2] + k];
}

ConstMatMap Tensor::matrix() const {
    if (rank() != 2) throw ShapeError("matrix() needs rank 2, have " + shape().str());
    return ConstMatMap(node().value.data(), shape().d[0], shape().d[1]);
}

ConstMatMap Tensor::matrix_at(int b) const {
    if (rank() != 3) throw ShapeError("matrix_at() needs rank 3, have " + shape().str());
    const Shape& s = shape();
    return ConstMatMap(node().value.data() + static_cast<long>(b) * s.d[1] * s.d[2], s.d[1], s.d[2]);
}

Eigen::MatrixXd Tensor::to_matrix() const { return matrix(); }
Eigen::MatrixXd Tensor::to_matrix_at(int b) const { return matrix_at(b); }

Tensor& Tensor::set_requires_grad(bool rg) {
    if (!node().leaf) throw UsageError("set_requires_grad on non-leaf tensor");
    node().requires_grad = rg;
    return *this;
}

const Eigen::ArrayXd& Tensor::grad() const {
    node().ensure_grad();
    return node().grad;
}

void Tensor::zero_grad() {
    node().grad = Eigen::ArrayXd::Zero(node().value.size());
}

Tensor Tensor::clone() const {
    return from_flat(shape(), node().value);
}

Tensor Tensor::detached() const {
    return clone();
}

Graph Graph::trace(const Tensor& root) {
    Graph g;
    auto root_node = root.node_ptr();
    if (!root_node) throw UsageError("trace of undefined tensor");
    // Iterative post-order DFS; visit_mark: 0 unseen, 1 on stack, 2 done.
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    std::vector<std::shared_ptr<detail::Node>> keep;  // ptr per frame
    stack.push_back({root_node.get(), 0});
    keep.push_back(root_node);
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (n->visit_mark == 2) {
            stack.pop_back();
            keep.pop_back();
            continue;
        }
        n->visit_mark = 1;
        if (idx < n->parents.size()) {
            auto& p = n->parents[idx++];
            if (p && p->visit_mark == 0) {
                stack.push_back({p.get(), 0});
                keep.push_back(p);
            }
            continue;
        }
        n->visit_mark = 2;
        g.order_.push_back(keep.back());
        stack.pop_back();
        keep.pop_back();
    }
    for (auto& n : g.order_) n->visit_mark = 0;
    return g;
}

void Graph::backward(double seed) {
    if (order_.empty()) throw UsageError("backward on empty graph");
    auto& root = *order_.back();
    if (root.shape.size() != 1)
        throw UsageError("backward requires a scalar root, have " + root.shape.str());
    if (!root.requires_grad)
        throw UsageError("backward on a root that requires no gradient");
    for (auto& n : order_) n->ensure_grad();
    root.grad[0] += seed;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        detail::Node& n = **it;
        if (n.backprop) n.backprop();
    }
    // Clear the tape: interior nodes drop edges, closures and buffers so the
    // graph cannot be replayed and memory is reclaimed. Leaves keep grads.
    for (auto& n : order_) {
        if (!n->leaf) {
            n->backprop = nullptr;
            n->parents.clear();
            if (n.get() != &root) {
                n->value.resize(0);
                n->grad.resize(0);
            }
        }
    }
}

void backward(const Tensor& loss, double seed) {
    Graph g = Graph::trace(loss);
    g.backward(seed);
}

} // namespace arteeg
