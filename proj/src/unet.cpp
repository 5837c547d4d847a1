#include "arteeg/unet.hpp"

#include <cmath>

#include "arteeg/errors.hpp"

namespace arteeg {

const char* variant_name(UNetVariant v) {
    switch (v) {
        case UNetVariant::base: return "icunet";
        case UNetVariant::plus: return "icunetpp";
        case UNetVariant::attn: return "icunet-attn";
    }
    throw Error("variant_name: bad variant");
}

UNetVariant variant_from_name(const std::string& name) {
    for (UNetVariant v : {UNetVariant::base, UNetVariant::plus, UNetVariant::attn})
        if (name == variant_name(v)) return v;
    throw UsageError("unknown U-Net variant '" + name + "'");
}

namespace {

void add_conv(ParamStore& p, const std::string& name, int cout, int cin, int k, RngStream& rng) {
    p.add(name + ".w", glorot(Shape(cout, cin, k), cin * k, cout * k, rng));
    p.add(name + ".b", Tensor::zeros(Shape(cout)));
}

void add_bn(ParamStore& p, const std::string& name, int width) {
    p.add(name + ".gain", Tensor::constant(Shape(width), 1.0));
    p.add(name + ".offset", Tensor::zeros(Shape(width)));
    p.buffer(name + ".mean", Tensor::zeros(Shape(width)));
    p.buffer(name + ".var", Tensor::constant(Shape(width), 1.0));
    p.buffer(name + ".count", Tensor::zeros(Shape(1)));
}

void add_double(ParamStore& p, const std::string& prefix, int cin, int cout, RngStream& rng) {
    add_conv(p, prefix + ".c1", cout, cin, 3, rng);
    add_bn(p, prefix + ".bn1", cout);
    add_conv(p, prefix + ".c2", cout, cout, 3, rng);
    add_bn(p, prefix + ".bn2", cout);
}

void add_decoder(ParamStore& p, const std::string& name, int cin, int cout, RngStream& rng) {
    add_conv(p, name, cout, cin, 3, rng);
    add_bn(p, name + ".bn", cout);
}

int chan_of(const Shape& s) { return s.rank == 3 ? s.d[1] : s.d[0]; }
int time_of(const Shape& s) { return s.rank == 3 ? s.d[2] : s.d[1]; }

} // namespace

UNet::UNet(const UNetConfig& cfg, RngStream rng) : cfg_(cfg) {
    const int c = cfg.channels;
    const int w = cfg.width;
    if (c < 1 || w < 1) throw UsageError("UNet: channels and width must be positive");
    if (cfg.variant == UNetVariant::attn && c % 2 != 0)
        throw UsageError("UNet: attn variant needs an even channel count for its position table");
    add_conv(params_, "init", w, c, 1, rng);
    add_double(params_, "stem", w, w, rng);
    add_double(params_, "enc1", w, 2 * w, rng);
    add_double(params_, "enc2", 2 * w, 4 * w, rng);
    add_double(params_, "enc3", 4 * w, 8 * w, rng);
    if (cfg.variant == UNetVariant::base) {
        add_decoder(params_, "dec2", 12 * w, 4 * w, rng);
        add_decoder(params_, "dec1", 6 * w, 2 * w, rng);
        add_decoder(params_, "dec0", 3 * w, w, rng);
        add_conv(params_, "final", c, w, 3, rng);
    } else {
        add_decoder(params_, "d21", 12 * w, 4 * w, rng);
        add_decoder(params_, "d11", 6 * w, 2 * w, rng);
        add_decoder(params_, "d12", 8 * w, 2 * w, rng);
        add_decoder(params_, "d01", 3 * w, w, rng);
        add_decoder(params_, "d02", 4 * w, w, rng);
        add_decoder(params_, "d03", 5 * w, w, rng);
        add_conv(params_, "head1", c, w, 3, rng);
        add_conv(params_, "head2", c, w, 3, rng);
        add_conv(params_, "head3", c, w, 3, rng);
    }
}

Tensor UNet::conv_block(const std::string& conv, const std::string& bn, const Tensor& x,
                        bool training) {
    Tensor y = conv1d(x, params_.at(conv + ".w"), params_.at(conv + ".b"), Pad::same, 1);
    y = batch_norm(y, params_.at(bn + ".gain"), params_.at(bn + ".offset"),
                   params_.at(bn + ".mean"), params_.at(bn + ".var"), params_.at(bn + ".count"),
                   training);
    return relu(y);
}

Tensor UNet::double_conv(const std::string& prefix, const Tensor& x, bool training) {
    Tensor y = conv_block(prefix + ".c1", prefix + ".bn1", x, training);
    return conv_block(prefix + ".c2", prefix + ".bn2", y, training);
}

Tensor UNet::decoder_node(const std::string& name, const Tensor& deep,
                          const std::vector<Tensor>& skips, bool training) {
    std::vector<Tensor> parts = skips;
    parts.push_back(upsample1d(deep));
    return conv_block(name, name + ".bn", concat_rows(parts), training);
}

Tensor UNet::prelayer_one(const Tensor& h, bool resize) {
    // Position-encode, optionally project channels up through the initial
    // conv, then let the feature rows attend over each other; the attended
    // input is added back residually.
    const int d = h.shape().d[0];
    Tensor p = add(h, positional_encoding(d, h.shape().d[1]));
    Tensor attn_in = resize ? conv1d(p, params_.at("init.w"), params_.at("init.b"), Pad::same, 1)
                            : p;
    Tensor a = scaled_attention(attn_in, attn_in, attn_in, 1.0 / std::sqrt(static_cast<double>(d)));
    return add(attn_in, a);
}

Tensor UNet::prelayer(const Tensor& h, bool resize) {
    if (h.rank() == 2) return prelayer_one(h, resize);
    std::vector<Tensor> items;
    items.reserve(h.shape().d[0]);
    for (int b = 0; b < h.shape().d[0]; ++b)
        items.push_back(prelayer_one(batch_slice(h, b), resize));
    return batch_stack(items);
}

std::vector<Tensor> UNet::forward_heads(const Tensor& x, bool training) {
    if (x.rank() != 2 && x.rank() != 3)
        throw ShapeError("UNet: input must be rank 2 or 3, have " + x.shape().str());
    if (chan_of(x.shape()) != cfg_.channels)
        throw ShapeMismatch("UNet: input has " + std::to_string(chan_of(x.shape())) +
                            " channels, model expects " + std::to_string(cfg_.channels));
    const int t = time_of(x.shape());
    if (t < 16 || t % 16 != 0)
        throw ShapeError("UNet: segment length must be a positive multiple of 16, have " +
                         std::to_string(t));
    const bool use_attn = cfg_.variant == UNetVariant::attn && !cfg_.attn_bypass;

    Tensor expanded = use_attn
                          ? prelayer(x, true)
                          : conv1d(x, params_.at("init.w"), params_.at("init.b"), Pad::same, 1);
    Tensor x0 = double_conv("stem", expanded, training);
    Tensor x1 = double_conv("enc1", use_attn ? prelayer(x0, false) : x0, training);
    x1 = maxpool1d(x1);
    Tensor x2 = double_conv("enc2", use_attn ? prelayer(x1, false) : x1, training);
    x2 = maxpool1d(x2);
    Tensor x3 = double_conv("enc3", use_attn ? prelayer(x2, false) : x2, training);
    x3 = maxpool1d(x3);

    if (cfg_.variant == UNetVariant::base) {
        Tensor d2 = decoder_node("dec2", x3, {x2}, training);
        Tensor d1 = decoder_node("dec1", d2, {x1}, training);
        Tensor d0 = decoder_node("dec0", d1, {x0}, training);
        return {conv1d(d0, params_.at("final.w"), params_.at("final.b"), Pad::same, 1)};
    }
    Tensor d21 = decoder_node("d21", x3, {x2}, training);
    Tensor d11 = decoder_node("d11", x2, {x1}, training);
    Tensor d12 = decoder_node("d12", d21, {x1, d11}, training);
    Tensor d01 = decoder_node("d01", x1, {x0}, training);
    Tensor d02 = decoder_node("d02", d11, {x0, d01}, training);
    Tensor d03 = decoder_node("d03", d12, {x0, d01, d02}, training);
    return {conv1d(d01, params_.at("head1.w"), params_.at("head1.b"), Pad::same, 1),
            conv1d(d02, params_.at("head2.w"), params_.at("head2.b"), Pad::same, 1),
            conv1d(d03, params_.at("head3.w"), params_.at("head3.b"), Pad::same, 1)};
}

Tensor UNet::forward(const Tensor& x, bool training) {
    return forward_heads(x, training).back();
}

} // namespace arteeg
