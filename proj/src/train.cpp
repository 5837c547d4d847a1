#include "arteeg/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "arteeg/errors.hpp"

namespace arteeg {

const char* optimizer_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adam: return "adam";
    }
    throw Error("optimizer_name: bad kind");
}

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw UsageError("unknown optimizer '" + name + "'");
}

void write_losscurve(const std::string& path, const LossCurve& curve) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write " + path);
    out << "epoch,train_mse,val_mse,test_mse\n";
    out.precision(17);
    for (std::size_t e = 0; e < curve.train.size(); ++e)
        out << e + 1 << ',' << curve.train[e] << ',' << curve.val[e] << ',' << curve.test[e]
            << '\n';
    if (!out) throw UsageError("write failed on " + path);
}

namespace {

Eigen::ArrayXd& grad_of(ParamEntry& e) {
    auto n = e.tensor.node_ptr();
    if (n->grad.size() != n->value.size())
        throw Error("missing gradient for '" + e.name + "'");
    return n->grad;
}

} // namespace

void SgdOptimizer::step(ParamStore& params, double lr) {
    for (ParamEntry& e : params.entries()) {
        if (!e.trainable) continue;
        Eigen::ArrayXd& g = grad_of(e);
        if (momentum_ == 0.0) {
            e.tensor.leaf_values() -= lr * g;
            continue;
        }
        Eigen::ArrayXd& v = velocity_[e.name];
        if (v.size() != g.size()) v = Eigen::ArrayXd::Zero(g.size());
        v = momentum_ * v + g;
        e.tensor.leaf_values() -= lr * v;
    }
}

void AdamOptimizer::step(ParamStore& params, double lr) {
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (ParamEntry& e : params.entries()) {
        if (!e.trainable) continue;
        Eigen::ArrayXd& g = grad_of(e);
        Eigen::ArrayXd& m = m_[e.name];
        Eigen::ArrayXd& v = v_[e.name];
        if (m.size() != g.size()) m = Eigen::ArrayXd::Zero(g.size());
        if (v.size() != g.size()) v = Eigen::ArrayXd::Zero(g.size());
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.square();
        e.tensor.leaf_values() -= lr * (m / c1) / ((v / c2).sqrt() + eps_);
    }
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg) {
    switch (cfg.optimizer) {
        case OptimizerKind::sgd: return std::make_unique<SgdOptimizer>(cfg.momentum);
        case OptimizerKind::adam:
            return std::make_unique<AdamOptimizer>(cfg.beta1, cfg.beta2, cfg.adam_eps);
    }
    throw Error("make_optimizer: bad kind");
}

double global_grad_norm(const ParamStore& params) {
    double sq = 0.0;
    for (const ParamEntry& e : params.entries()) {
        if (!e.trainable) continue;
        const auto n = e.tensor.node_ptr();
        if (n->grad.size() == n->value.size()) sq += n->grad.square().sum();
    }
    return std::sqrt(sq);
}

void clip_gradients(ParamStore& params, double max_norm) {
    if (max_norm <= 0.0) return;
    const double norm = global_grad_norm(params);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (ParamEntry& e : params.entries()) {
        if (!e.trainable) continue;
        auto n = e.tensor.node_ptr();
        if (n->grad.size() == n->value.size()) n->grad *= scale;
    }
}

namespace {

void check_rows(const Dataset& data, const std::vector<int>& rows) {
    const int n = static_cast<int>(data.noisy.size());
    if (data.clean.size() != data.noisy.size())
        throw UsageError("dataset noisy/clean row counts differ");
    for (int r : rows)
        if (r < 0 || r >= n) throw UsageError("dataset row index out of range");
}

class UNetDenoiser final : public Denoiser {
public:
    UNetDenoiser(const UNetConfig& cfg, RngStream rng) : net_(cfg, rng) {}

    ParamStore& params() override { return net_.params(); }

    double batch_pass(const Dataset& data, const std::vector<int>& rows, bool training,
                      bool accumulate_grads, int) override {
        check_rows(data, rows);
        if (rows.empty()) throw UsageError("empty batch");
        if (!accumulate_grads) {
            NoGradGuard off;
            return pass(data, rows, training, false);
        }
        return pass(data, rows, training, true);
    }

    Tensor denoise(const Tensor& segment, const Tensor*) override {
        NoGradGuard off;
        return net_.forward(segment, false);
    }

    std::string model_id() const override { return variant_name(net_.config().variant); }

    std::map<std::string, std::string> config_map() const override {
        const UNetConfig& c = net_.config();
        std::map<std::string, std::string> m{{"channels", std::to_string(c.channels)},
                                             {"width", std::to_string(c.width)}};
        if (c.variant == UNetVariant::attn) m["bypass"] = c.attn_bypass ? "1" : "0";
        return m;
    }

private:
    double pass(const Dataset& data, const std::vector<int>& rows, bool training,
                bool accumulate_grads) {
        std::vector<Tensor> xs, ys;
        xs.reserve(rows.size());
        ys.reserve(rows.size());
        for (int r : rows) {
            xs.push_back(Tensor::from_matrix(data.noisy[r]));
            ys.push_back(Tensor::from_matrix(data.clean[r]));
        }
        Tensor x = rows.size() == 1 ? xs[0] : batch_stack(xs);
        Tensor y = rows.size() == 1 ? ys[0] : batch_stack(ys);
        Tensor loss;
        if (training) {
            std::vector<Tensor> heads = net_.forward_heads(x, true);
            if (heads.size() == 1) {
                loss = mse_loss(heads[0], y);
            } else {
                std::vector<Tensor> parts;
                for (const Tensor& h : heads) parts.push_back(mse_loss(h, y));
                loss = mean_of(parts);
            }
        } else {
            loss = mse_loss(net_.forward(x, false), y);
        }
        const double value = loss.scalar();
        if (accumulate_grads) backward(loss);
        return value;
    }

    UNet net_;
};

class ArtDenoiser final : public Denoiser {
public:
    ArtDenoiser(const ArtConfig& cfg, RngStream rng) : art_(cfg, rng) {}

    ParamStore& params() override { return art_.params(); }

    double batch_pass(const Dataset& data, const std::vector<int>& rows, bool /*training*/,
                      bool accumulate_grads, int jobs) override {
        check_rows(data, rows);
        if (rows.empty()) throw UsageError("empty batch");
        if (accumulate_grads) {
            // Per-segment backward keeps peak graph memory at one segment;
            // summing in row order keeps gradients independent of job count.
            double total = 0.0;
            const double inv = 1.0 / static_cast<double>(rows.size());
            for (int r : rows) {
                Tensor y = Tensor::from_matrix(data.clean[r]);
                Tensor li = mse_loss(art_.forward(Tensor::from_matrix(data.noisy[r]), &y), y);
                total += li.scalar();
                backward(scale(li, inv));
            }
            return total * inv;
        }
        std::vector<double> losses(rows.size(), 0.0);
        auto work = [&](std::size_t lo, std::size_t hi) {
            NoGradGuard off;
            for (std::size_t i = lo; i < hi; ++i) {
                Tensor y = Tensor::from_matrix(data.clean[rows[i]]);
                losses[i] =
                    mse_loss(art_.forward(Tensor::from_matrix(data.noisy[rows[i]]), &y), y)
                        .scalar();
            }
        };
        const std::size_t n = rows.size();
        const std::size_t workers =
            std::min<std::size_t>(std::max(jobs, 1), n);
        if (workers <= 1) {
            work(0, n);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back(work, n * w / workers, n * (w + 1) / workers);
            for (std::thread& t : pool) t.join();
        }
        double total = 0.0;
        for (double l : losses) total += l;
        return total / static_cast<double>(n);
    }

    Tensor denoise(const Tensor& segment, const Tensor* reference) override {
        NoGradGuard off;
        return art_.forward(segment, reference);
    }

    std::string model_id() const override { return "art"; }

    std::map<std::string, std::string> config_map() const override {
        const ArtConfig& c = art_.config();
        return {{"channels", std::to_string(c.channels)},
                {"tau", std::to_string(c.tau)},
                {"heads", std::to_string(c.heads)},
                {"blocks", std::to_string(c.blocks)},
                {"ff", std::to_string(c.ff)},
                {"target", target_mode_name(c.target_mode)},
                {"shared_embedding", c.shared_embedding ? "1" : "0"}};
    }

private:
    Art art_;
};

const std::string& config_value(const std::map<std::string, std::string>& config,
                                const std::string& key) {
    auto it = config.find(key);
    if (it == config.end()) throw CorruptCheckpoint("checkpoint config missing '" + key + "'");
    return it->second;
}

int config_int(const std::map<std::string, std::string>& config, const std::string& key) {
    const std::string& raw = config_value(config, key);
    try {
        std::size_t used = 0;
        int v = std::stoi(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw CorruptCheckpoint("checkpoint config has bad integer " + key + "=" + raw);
    }
}

} // namespace

std::unique_ptr<Denoiser> make_unet_denoiser(const UNetConfig& cfg, RngStream init_rng) {
    return std::make_unique<UNetDenoiser>(cfg, init_rng);
}

std::unique_ptr<Denoiser> make_art_denoiser(const ArtConfig& cfg, RngStream init_rng) {
    return std::make_unique<ArtDenoiser>(cfg, init_rng);
}

ArtConfig art_config_from_map(const std::map<std::string, std::string>& config) {
    ArtConfig cfg;
    cfg.channels = config_int(config, "channels");
    cfg.tau = config_int(config, "tau");
    cfg.heads = config_int(config, "heads");
    cfg.blocks = config_int(config, "blocks");
    cfg.ff = config_int(config, "ff");
    cfg.target_mode = target_mode_from_name(config_value(config, "target"));
    cfg.shared_embedding = config_value(config, "shared_embedding") == "1";
    return cfg;
}

UNetConfig unet_config_from_map(const std::string& model_id,
                                const std::map<std::string, std::string>& config) {
    UNetConfig cfg;
    cfg.variant = variant_from_name(model_id);  // throws on unknown ids
    cfg.channels = config_int(config, "channels");
    cfg.width = config_int(config, "width");
    if (cfg.variant == UNetVariant::attn)
        cfg.attn_bypass = config.count("bypass") && config.at("bypass") == "1";
    return cfg;
}

std::unique_ptr<Denoiser> make_denoiser(const std::string& model_id,
                                        const std::map<std::string, std::string>& config,
                                        RngStream init_rng) {
    if (model_id == "art") return make_art_denoiser(art_config_from_map(config), init_rng);
    return make_unet_denoiser(unet_config_from_map(model_id, config), init_rng);
}

namespace {

double eval_split(Denoiser& model, const Dataset& data, const std::vector<int>& rows,
                  const TrainConfig& cfg) {
    double sum = 0.0;
    long count = 0;
    for (std::size_t at = 0; at < rows.size(); at += cfg.batch_size) {
        const std::size_t end = std::min(rows.size(), at + cfg.batch_size);
        std::vector<int> chunk(rows.begin() + at, rows.begin() + end);
        sum += model.batch_pass(data, chunk, false, false, cfg.jobs) *
               static_cast<double>(chunk.size());
        count += static_cast<long>(chunk.size());
    }
    return sum / static_cast<double>(count);
}

} // namespace

TrainResult train(Denoiser& model, const Dataset& data, const TrainConfig& cfg, RngStream rng) {
    if (cfg.epochs < 0) throw UsageError("negative epoch count");
    if (cfg.batch_size < 1) throw UsageError("batch size must be positive");
    if (!(cfg.lr > 0.0)) throw UsageError("learning rate must be positive");
    if (data.split.train.empty() || data.split.val.empty() || data.split.test.empty())
        throw UsageError("training requires populated train/val/test splits");

    std::unique_ptr<Optimizer> opt = make_optimizer(cfg);
    TrainResult result;
    result.best_val = std::numeric_limits<double>::infinity();
    std::map<std::string, Eigen::ArrayXd> best;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr =
            cfg.step_decay ? cfg.lr * std::pow(0.5, (epoch - 1) / 20) : cfg.lr;
        std::vector<int> order = data.split.train;
        RngStream shuffle_rng = rng.sub("epoch", static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        double sum = 0.0;
        long count = 0;
        int batch_index = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), at + cfg.batch_size);
            std::vector<int> batch(order.begin() + at, order.begin() + end);
            model.params().zero_grads();
            double loss;
            try {
                loss = model.batch_pass(data, batch, true, true, cfg.jobs);
            } catch (const NumericalError& err) {
                std::ostringstream os;
                os << "training diverged at epoch " << epoch << ", batch " << batch_index
                   << ", lr " << lr << ": " << err.what();
                throw NumericalError(os.str());
            }
            if (!std::isfinite(loss)) {
                std::ostringstream os;
                os << "training diverged at epoch " << epoch << ", batch " << batch_index
                   << ", lr " << lr << ": loss is not finite";
                throw NumericalError(os.str());
            }
            if (cfg.clip_norm > 0.0) clip_gradients(model.params(), cfg.clip_norm);
            opt->step(model.params(), lr);
            sum += loss * static_cast<double>(batch.size());
            count += static_cast<long>(batch.size());
        }
        result.curve.train.push_back(sum / static_cast<double>(count));
        double val_loss, test_loss;
        try {
            val_loss = eval_split(model, data, data.split.val, cfg);
            test_loss = eval_split(model, data, data.split.test, cfg);
        } catch (const NumericalError& err) {
            std::ostringstream os;
            os << "training diverged at epoch " << epoch << ", evaluation: " << err.what();
            throw NumericalError(os.str());
        }
        if (!std::isfinite(val_loss) || !std::isfinite(test_loss)) {
            std::ostringstream os;
            os << "training diverged at epoch " << epoch << ", evaluation: loss is not finite";
            throw NumericalError(os.str());
        }
        result.curve.val.push_back(val_loss);
        result.curve.test.push_back(test_loss);
        if (cfg.on_epoch)
            cfg.on_epoch(epoch, result.curve.train.back(), result.curve.val.back(),
                         result.curve.test.back());

        if (result.curve.val.back() < result.best_val) {
            result.best_val = result.curve.val.back();
            result.best_epoch = epoch;
            best.clear();
            for (const ParamEntry& e : model.params().entries())
                best[e.name] = e.tensor.values();
        }
    }

    for (ParamEntry& e : model.params().entries()) {
        auto it = best.find(e.name);
        if (it != best.end()) e.tensor.leaf_values() = it->second;
    }
    return result;
}

} // namespace arteeg
