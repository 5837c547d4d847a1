#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "arteeg/art.hpp"
#include "arteeg/params.hpp"
#include "arteeg/rng.hpp"
#include "arteeg/synth.hpp"
#include "arteeg/unet.hpp"

namespace arteeg {

enum class OptimizerKind { sgd, adam };

const char* optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& name);

struct TrainConfig {
    int epochs = 60;
    double lr = 0.01;
    int batch_size = 128;  // family default: 128 for the U-Nets, 32 for ART
    OptimizerKind optimizer = OptimizerKind::sgd;
    double momentum = 0.0;  // plain SGD unless raised
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;   // global gradient norm cap; <= 0 disables
    bool step_decay = false;  // halve the rate every 20 epochs when set
    int jobs = 1;             // worker threads for gradient-free passes
    // Progress hook, called after each epoch's three losses are recorded.
    std::function<void(int epoch, double train_mse, double val_mse, double test_mse)> on_epoch;
};

struct LossCurve {
    std::vector<double> train, val, test;  // one entry per epoch run
};

void write_losscurve(const std::string& path, const LossCurve& curve);

class Optimizer {
public:
    virtual ~Optimizer() = default;
    // Applies one update from the gradients currently held by the store.
    virtual void step(ParamStore& params, double lr) = 0;
};

class SgdOptimizer : public Optimizer {
public:
    explicit SgdOptimizer(double momentum = 0.0) : momentum_(momentum) {}
    void step(ParamStore& params, double lr) override;

private:
    double momentum_;
    std::map<std::string, Eigen::ArrayXd> velocity_;
};

class AdamOptimizer : public Optimizer {
public:
    AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(ParamStore& params, double lr) override;

private:
    double beta1_, beta2_, eps_;
    long steps_ = 0;
    std::map<std::string, Eigen::ArrayXd> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg);

double global_grad_norm(const ParamStore& params);
// Scales every gradient by max_norm / ||g|| when the global norm exceeds it.
void clip_gradients(ParamStore& params, double max_norm);

// One denoiser behind a family-neutral surface. batch_pass returns the mean
// loss over the listed rows; when accumulate_grads is set it also runs
// backward, summing gradients into the parameters in row order.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual ParamStore& params() = 0;
    virtual double batch_pass(const Dataset& data, const std::vector<int>& rows, bool training,
                              bool accumulate_grads, int jobs) = 0;
    // reference feeds the decoder stream of clean-target seq2seq models; the
    // convolutional family ignores it.
    virtual Tensor denoise(const Tensor& segment, const Tensor* reference = nullptr) = 0;
    virtual std::string model_id() const = 0;
    virtual std::map<std::string, std::string> config_map() const = 0;
};

std::unique_ptr<Denoiser> make_unet_denoiser(const UNetConfig& cfg, RngStream init_rng);
std::unique_ptr<Denoiser> make_art_denoiser(const ArtConfig& cfg, RngStream init_rng);
// Checkpoint config blobs back into typed configs.
ArtConfig art_config_from_map(const std::map<std::string, std::string>& config);
UNetConfig unet_config_from_map(const std::string& model_id,
                                const std::map<std::string, std::string>& config);
// Rebuilds a model from its checkpoint identity. Ids: icunet, icunetpp,
// icunet-attn, art.
std::unique_ptr<Denoiser> make_denoiser(const std::string& model_id,
                                        const std::map<std::string, std::string>& config,
                                        RngStream init_rng);

struct TrainResult {
    LossCurve curve;
    int best_epoch = 0;  // 1-based epoch with the lowest validation loss
    double best_val = 0.0;
};

// Runs the full loop: seeded shuffles, mini-batch updates, per-epoch
// validation/test evaluation without updates, best-validation snapshot. The
// model is left holding the best-validation parameters.
TrainResult train(Denoiser& model, const Dataset& data, const TrainConfig& cfg, RngStream rng);

} // namespace arteeg
