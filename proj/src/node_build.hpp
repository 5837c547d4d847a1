#pragma once

#include "arteeg/tensor.hpp"

namespace arteeg::detail {

struct Made {
    std::shared_ptr<Node> n;
    bool tracked = false;
};

// Builds a graph node. Tracking (parents + backprop hook) happens only when
// grads are globally enabled and some parent requires them; the caller attaches
// n->backprop iff `tracked`.
inline Made make_node(const Shape& s, Eigen::ArrayXd v, const char* op,
                      std::vector<std::shared_ptr<Node>> parents) {
    check_finite(v, op);
    auto n = std::make_shared<Node>();
    n->shape = s;
    n->value = std::move(v);
    n->op = op;
    bool rg = false;
    if (grad_enabled())
        for (const auto& p : parents)
            if (p && p->requires_grad) rg = true;
    if (rg) {
        n->requires_grad = true;
        n->leaf = false;
        n->parents = std::move(parents);
    }
    return {n, rg};
}

inline MatMap mat(Node& n) { return MatMap(n.value.data(), n.shape.d[0], n.shape.d[1]); }
inline MatMap gmat(Node& n) { return MatMap(n.grad.data(), n.shape.d[0], n.shape.d[1]); }

} // namespace arteeg::detail
