#include "arteeg/art.hpp"

#include "arteeg/errors.hpp"

namespace arteeg {

const char* target_mode_name(TargetMode m) {
    switch (m) {
        case TargetMode::clean: return "clean";
        case TargetMode::null: return "null";
        case TargetMode::noise: return "noise";
    }
    throw Error("target_mode_name: bad mode");
}

TargetMode target_mode_from_name(const std::string& name) {
    for (TargetMode m : {TargetMode::clean, TargetMode::null, TargetMode::noise})
        if (name == target_mode_name(m)) return m;
    throw UsageError("unknown target mode '" + name + "'");
}

namespace {

void add_linear(ParamStore& p, const std::string& name, int dout, int din, RngStream& rng) {
    p.add(name + ".w", glorot(Shape(dout, din), din, dout, rng));
    p.add(name + ".b", Tensor::zeros(Shape(dout)));
}

void add_mha(ParamStore& p, const std::string& prefix, int tau, RngStream& rng) {
    for (const char* n : {"wq", "wk", "wv", "wo"})
        p.add(prefix + "." + n, glorot(Shape(tau, tau), tau, tau, rng));
    for (const char* n : {"bq", "bk", "bv", "bo"}) p.add(prefix + "." + n, Tensor::zeros(Shape(tau)));
}

void add_norm(ParamStore& p, const std::string& name, int tau) {
    p.add(name + ".gain", Tensor::constant(Shape(tau), 1.0));
    p.add(name + ".offset", Tensor::zeros(Shape(tau)));
}

void add_ff(ParamStore& p, const std::string& prefix, int tau, int ff, RngStream& rng) {
    add_linear(p, prefix + ".f1", ff, tau, rng);
    add_linear(p, prefix + ".f2", tau, ff, rng);
}

} // namespace

Art::Art(const ArtConfig& cfg, RngStream rng) : cfg_(cfg) {
    if (cfg.tau < 2 || cfg.tau % 2 != 0)
        throw UsageError("Art: embedding dim must be even and >= 2");
    if (cfg.heads < 1 || cfg.tau % cfg.heads != 0)
        throw UsageError("Art: embedding dim must divide evenly across heads");
    if (cfg.ff <= cfg.tau) throw UsageError("Art: feed-forward dim must exceed embedding dim");
    if (cfg.blocks < 0) throw UsageError("Art: negative block count");
    if (cfg.channels < 1) throw UsageError("Art: channels must be positive");

    add_linear(params_, "enc_embed", cfg.tau, cfg.channels, rng);
    if (!cfg.shared_embedding) add_linear(params_, "dec_embed", cfg.tau, cfg.channels, rng);
    for (int l = 1; l <= cfg.blocks; ++l) {
        const std::string e = "enc" + std::to_string(l);
        add_mha(params_, e + ".mha", cfg.tau, rng);
        add_norm(params_, e + ".ln1", cfg.tau);
        add_ff(params_, e + ".ff", cfg.tau, cfg.ff, rng);
        add_norm(params_, e + ".ln2", cfg.tau);
    }
    for (int l = 1; l <= cfg.blocks; ++l) {
        const std::string d = "dec" + std::to_string(l);
        add_mha(params_, d + ".self", cfg.tau, rng);
        add_norm(params_, d + ".ln1", cfg.tau);
        add_mha(params_, d + ".cross", cfg.tau, rng);
        add_norm(params_, d + ".ln2", cfg.tau);
        add_ff(params_, d + ".ff", cfg.tau, cfg.ff, rng);
        add_norm(params_, d + ".ln3", cfg.tau);
    }
    add_linear(params_, "recon", cfg.channels, cfg.tau, rng);
}

Tensor Art::select_target(const Tensor& x, const Tensor* reference) const {
    switch (cfg_.target_mode) {
        case TargetMode::noise: return x;
        case TargetMode::null: return Tensor::zeros(x.shape());
        case TargetMode::clean:
            if (!reference)
                throw MissingTarget("target mode clean requires a reference segment");
            if (reference->shape() != x.shape())
                throw ShapeMismatch("reference shape " + reference->shape().str() +
                                    " does not match input " + x.shape().str());
            return *reference;
    }
    throw Error("select_target: bad mode");
}

MhaParams Art::mha(const std::string& prefix) {
    return {params_.at(prefix + ".wq"), params_.at(prefix + ".bq"), params_.at(prefix + ".wk"),
            params_.at(prefix + ".bk"), params_.at(prefix + ".wv"), params_.at(prefix + ".bv"),
            params_.at(prefix + ".wo"), params_.at(prefix + ".bo")};
}

Tensor Art::norm(const std::string& name, const Tensor& h) {
    return layer_norm(h, params_.at(name + ".gain"), params_.at(name + ".offset"));
}

Tensor Art::ff_block(const std::string& prefix, const Tensor& h) {
    Tensor y = relu(linear(h, params_.at(prefix + ".f1.w"), params_.at(prefix + ".f1.b")));
    return linear(y, params_.at(prefix + ".f2.w"), params_.at(prefix + ".f2.b"));
}

Tensor Art::forward(const Tensor& x, const Tensor* reference, bool masked, AttnScores* scores) {
    if (x.rank() != 2)
        throw ShapeError("Art: input must be a rank-2 segment, have " + x.shape().str());
    if (x.shape().d[0] != cfg_.channels)
        throw ShapeMismatch("Art: input has " + std::to_string(x.shape().d[0]) +
                            " channels, model expects " + std::to_string(cfg_.channels));
    const int t = x.shape().d[1];
    const Tensor pe = positional_encoding(cfg_.tau, t);
    if (scores) {
        scores->enc_self.assign(cfg_.blocks, {});
        scores->dec_self.assign(cfg_.blocks, {});
        scores->dec_cross.assign(cfg_.blocks, {});
    }

    Tensor cur = add(linear(x, params_.at("enc_embed.w"), params_.at("enc_embed.b")), pe);
    for (int l = 1; l <= cfg_.blocks; ++l) {
        const std::string e = "enc" + std::to_string(l);
        Tensor a = multi_head_attention(cur, cur, cfg_.heads, mha(e + ".mha"), false,
                                        scores ? &scores->enc_self[l - 1] : nullptr);
        cur = norm(e + ".ln1", add(cur, a));
        cur = norm(e + ".ln2", add(cur, ff_block(e + ".ff", cur)));
    }
    const Tensor memory = cur;

    const std::string embed = cfg_.shared_embedding ? "enc_embed" : "dec_embed";
    Tensor dec = add(
        linear(select_target(x, reference), params_.at(embed + ".w"), params_.at(embed + ".b")),
        pe);
    for (int l = 1; l <= cfg_.blocks; ++l) {
        const std::string d = "dec" + std::to_string(l);
        Tensor a = multi_head_attention(dec, dec, cfg_.heads, mha(d + ".self"), masked,
                                        scores ? &scores->dec_self[l - 1] : nullptr);
        dec = norm(d + ".ln1", add(dec, a));
        Tensor c = multi_head_attention(dec, memory, cfg_.heads, mha(d + ".cross"), false,
                                        scores ? &scores->dec_cross[l - 1] : nullptr);
        dec = norm(d + ".ln2", add(dec, c));
        dec = norm(d + ".ln3", add(dec, ff_block(d + ".ff", dec)));
    }
    ++decoder_passes_;

    Tensor y = linear(dec, params_.at("recon.w"), params_.at("recon.b"));
    return zscore(log_softmax(y));
}

} // namespace arteeg
