#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "arteeg/rng.hpp"
#include "arteeg/tensor.hpp"

namespace arteeg {

struct ParamEntry {
    std::string name;
    Tensor tensor;
    bool trainable = true;  // false for running-statistic buffers
};

// Named leaf tensors in stable insertion order. The order is part of the model
// contract: optimizers, checkpoints, and gradient clipping all walk it.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& buffer(const std::string& name, Tensor t);
    bool has(const std::string& name) const;
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    const std::vector<ParamEntry>& entries() const { return order_; }
    std::vector<ParamEntry>& entries() { return order_; }
    long trainable_count() const;  // total trainable scalars
    void zero_grads();

private:
    Tensor& insert(const std::string& name, Tensor t, bool trainable);
    std::vector<ParamEntry> order_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot(const Shape& s, int fan_in, int fan_out, RngStream& rng);

} // namespace arteeg
