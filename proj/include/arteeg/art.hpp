#pragma once

#include <atomic>
#include <string>
#include <vector>

#include "arteeg/ops.hpp"
#include "arteeg/params.hpp"

namespace arteeg {

enum class TargetMode { clean, null, noise };

const char* target_mode_name(TargetMode m);
TargetMode target_mode_from_name(const std::string& name);

struct ArtConfig {
    int channels = 8;
    int tau = 128;   // embedding dim
    int heads = 8;
    int blocks = 2;  // encoder and decoder block count L
    int ff = 512;    // feed-forward expansion, > tau
    TargetMode target_mode = TargetMode::noise;
    bool shared_embedding = false;  // decoder reuses the encoder embedding
};

// Post-softmax attention weights captured during a forward pass:
// [layer][head], square t x t matrices at sites enc_self / dec_self / dec_cross.
struct AttnScores {
    std::vector<std::vector<Eigen::MatrixXd>> enc_self, dec_self, dec_cross;
};

// Sequence-to-sequence denoiser over c x t segments, any t. Both streams are
// pointwise-embedded c->tau and position-encoded. The encoder runs L
// self-attention blocks; the decoder runs L blocks of self-attention plus
// cross-attention against the encoder memory; every sublayer is followed by
// residual add and layer norm. The reconstructor projects tau->c, applies
// log-softmax over channels, then z-scores each channel over time. The whole
// segment is produced by the single pass: no output feeds back in.
class Art {
public:
    Art(const ArtConfig& cfg, RngStream rng);

    // reference: the clean segment, required only for TargetMode::clean.
    // masked enables a causal mask on decoder self-attention; it exists to
    // demonstrate in tests that masking would change the outputs, and is
    // never enabled by the pipeline.
    Tensor forward(const Tensor& x, const Tensor* reference = nullptr, bool masked = false,
                   AttnScores* scores = nullptr);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const ArtConfig& config() const { return cfg_; }
    long decoder_passes() const { return decoder_passes_.load(); }

private:
    Tensor select_target(const Tensor& x, const Tensor* reference) const;
    Tensor ff_block(const std::string& prefix, const Tensor& h);
    Tensor norm(const std::string& name, const Tensor& h);
    MhaParams mha(const std::string& prefix);

    ArtConfig cfg_;
    ParamStore params_;
    std::atomic<long> decoder_passes_{0};
};

} // namespace arteeg
