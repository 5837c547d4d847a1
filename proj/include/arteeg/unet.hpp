#pragma once

#include <vector>

#include "arteeg/ops.hpp"
#include "arteeg/params.hpp"

namespace arteeg {

enum class UNetVariant { base, plus, attn };

const char* variant_name(UNetVariant v);
UNetVariant variant_from_name(const std::string& name);

struct UNetConfig {
    int channels = 8;
    int width = 32;  // feature maps after the initial channel expansion
    UNetVariant variant = UNetVariant::base;
    // attn only: skip the attention prelayers entirely. The parameter layout
    // is unchanged, so outputs match the plus variant exactly.
    bool attn_bypass = false;
};

// Denoising autoencoder over c x t segments (t divisible by 16).
//
// Backbone: pointwise channel expansion c->width, a double-conv stem, then
// three pooling encoder blocks doubling the width each level. The base
// variant climbs back with a single decoder chain; plus/attn use the dense
// decoder grid with three supervised heads, predicting from the last head.
// The attn variant inserts position-encoded inter-channel self-attention
// before the stem (sharing the initial conv as its resize) and before each
// pooling block.
class UNet {
public:
    UNet(const UNetConfig& cfg, RngStream rng);

    // All supervised heads, shallowest first: 1 for base, 3 for plus/attn.
    std::vector<Tensor> forward_heads(const Tensor& x, bool training);
    // Prediction = last head.
    Tensor forward(const Tensor& x, bool training);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const UNetConfig& config() const { return cfg_; }

private:
    Tensor conv_block(const std::string& conv, const std::string& bn, const Tensor& x,
                      bool training);
    Tensor double_conv(const std::string& prefix, const Tensor& x, bool training);
    Tensor decoder_node(const std::string& name, const Tensor& deep,
                        const std::vector<Tensor>& skips, bool training);
    Tensor prelayer(const Tensor& h, bool resize);
    Tensor prelayer_one(const Tensor& h, bool resize);

    UNetConfig cfg_;
    ParamStore params_;
};

} // namespace arteeg
