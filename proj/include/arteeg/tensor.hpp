#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "arteeg/errors.hpp"

namespace arteeg {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Up to three axes, row-major, innermost axis last.
struct Shape {
    int d[3] = {1, 1, 1};
    int rank = 0;

    Shape() = default;
    explicit Shape(int a) : rank(1) { d[0] = a; }
    Shape(int a, int b) : rank(2) { d[0] = a; d[1] = b; }
    Shape(int a, int b, int c) : rank(3) { d[0] = a; d[1] = b; d[2] = c; }

    long size() const {
        long n = 1;
        for (int i = 0; i < rank; ++i) n *= d[i];
        return rank == 0 ? 1 : n;
    }
    bool operator==(const Shape& o) const {
        if (rank != o.rank) return false;
        for (int i = 0; i < rank; ++i)
            if (d[i] != o.d[i]) return false;
        return true;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const;
};

namespace detail {

struct Node {
    Shape shape;
    Eigen::ArrayXd value;
    Eigen::ArrayXd grad;   // empty until needed
    bool requires_grad = false;
    bool leaf = true;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backprop;  // reads this->grad, accumulates into parents
    int visit_mark = 0;

    void ensure_grad() {
        if (grad.size() != value.size()) grad = Eigen::ArrayXd::Zero(value.size());
    }
};

// Thread-local switch: when off, ops compute values only and record no graph.
bool grad_enabled();
void set_grad_enabled(bool);

} // namespace detail

// RAII guard disabling graph recording (evaluation / inference).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(detail::grad_enabled()) { detail::set_grad_enabled(false); }
    ~NoGradGuard() { detail::set_grad_enabled(prev); }
};

// Value-style handle over a shared autodiff node. Copies alias the same node;
// clone() makes an independent leaf.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}

    static Tensor zeros(const Shape& s);
    static Tensor constant(const Shape& s, double v);
    static Tensor from_flat(const Shape& s, Eigen::ArrayXd data);
    static Tensor from_matrix(const Eigen::MatrixXd& m);   // rank 2
    static Tensor from_vector(const Eigen::VectorXd& v);   // rank 1
    static Tensor scalar_value(double v);                  // rank 0

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return node().shape; }
    int rank() const { return node().shape.rank; }
    long size() const { return node().shape.size(); }

    const Eigen::ArrayXd& values() const { return node().value; }
    // Leaf-only in-place mutation (parameters, buffers).
    Eigen::ArrayXd& leaf_values();

    double scalar() const;
    double operator()(int i) const;
    double operator()(int i, int j) const;
    double operator()(int i, int j, int k) const;

    ConstMatMap matrix() const;              // rank-2 view (rows = axis 0)
    ConstMatMap matrix_at(int b) const;      // rank-3: item b as rank-2 view

    Eigen::MatrixXd to_matrix() const;       // rank-2 copy
    Eigen::MatrixXd to_matrix_at(int b) const;

    bool requires_grad() const { return node().requires_grad; }
    Tensor& set_requires_grad(bool rg);
    const Eigen::ArrayXd& grad() const;
    void zero_grad();

    Tensor clone() const;     // independent leaf with copied values
    Tensor detached() const;  // leaf sharing nothing with the graph, copied values

    std::shared_ptr<detail::Node> node_ptr() const { return n_; }
    detail::Node& node() const {
        if (!n_) throw UsageError("use of undefined Tensor");
        return *n_;
    }

private:
    std::shared_ptr<detail::Node> n_;
};

// Reverse-mode tape: topologically ordered op nodes reachable from one root.
class Graph {
public:
    static Graph trace(const Tensor& root);
    // Seeds d(root)=seed, runs every backward rule once (reverse topological
    // order), accumulates gradients additively across fan-out, then clears
    // interior edges/closures so the graph cannot be replayed.
    void backward(double seed = 1.0);
    std::size_t node_count() const { return order_.size(); }

private:
    std::vector<std::shared_ptr<detail::Node>> order_;  // topological, root last
};

// Convenience: trace from a scalar loss and run backward.
void backward(const Tensor& loss, double seed = 1.0);

namespace detail {
void check_finite(const Eigen::ArrayXd& v, const char* op);
} // namespace detail

} // namespace arteeg
