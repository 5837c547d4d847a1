#include "arteeg/params.hpp"

#include <cmath>

#include "arteeg/errors.hpp"

namespace arteeg {

Tensor& ParamStore::insert(const std::string& name, Tensor t, bool trainable) {
    if (index_.count(name)) throw Error("ParamStore: duplicate parameter '" + name + "'");
    if (trainable) t.set_requires_grad(true);
    index_[name] = order_.size();
    order_.push_back({name, std::move(t), trainable});
    return order_.back().tensor;
}

Tensor& ParamStore::add(const std::string& name, Tensor t) {
    return insert(name, std::move(t), true);
}

Tensor& ParamStore::buffer(const std::string& name, Tensor t) {
    return insert(name, std::move(t), false);
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) != 0; }

Tensor& ParamStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
    return order_[it->second].tensor;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
    return order_[it->second].tensor;
}

long ParamStore::trainable_count() const {
    long n = 0;
    for (const auto& e : order_)
        if (e.trainable) n += e.tensor.size();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& e : order_)
        if (e.trainable) e.tensor.zero_grad();
}

Tensor glorot(const Shape& s, int fan_in, int fan_out, RngStream& rng) {
    const double a = std::sqrt(6.0 / (static_cast<double>(fan_in) + fan_out));
    Eigen::ArrayXd v(s.size());
    for (long i = 0; i < v.size(); ++i) v[i] = rng.uniform(-a, a);
    return Tensor::from_flat(s, std::move(v));
}

} // namespace arteeg
