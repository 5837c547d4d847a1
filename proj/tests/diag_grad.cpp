// Scratch diagnostic: localize finite-difference disagreements in the full
// model rows, reporting the worst parameter coordinate and its one-sided
// slopes (disagreeing sides mean the probe straddles a kink).
#include <cstdio>
#include <functional>

#include "arteeg/art.hpp"
#include "arteeg/ops.hpp"
#include "arteeg/rng.hpp"
#include "arteeg/unet.hpp"

using namespace arteeg;

namespace {

Tensor randn(const Shape& s, RngStream& r) {
    Eigen::ArrayXd v(s.size());
    for (long i = 0; i < v.size(); ++i) v[i] = r.normal();
    return Tensor::from_flat(s, v);
}

void in_place_probe(const char* model, const std::string& pname,
                    const std::function<Tensor()>& thunk, ParamStore& store, Tensor& p,
                    double eps = 1e-5) {
    store.zero_grads();
    backward(thunk());
    p.node().ensure_grad();
    const Eigen::ArrayXd analytic = p.grad();

    NoGradGuard ng;
    Eigen::ArrayXd& v = p.leaf_values();
    double worst = 0.0, wa = 0, wn = 0, wfp = 0, wfm = 0, wf0 = 0;
    long wi = -1;
    const double f0 = thunk().scalar();
    for (long i = 0; i < v.size(); ++i) {
        const double saved = v[i];
        v[i] = saved + eps;
        const double fp = thunk().scalar();
        v[i] = saved - eps;
        const double fm = thunk().scalar();
        v[i] = saved;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double rel = std::abs(analytic[i] - numeric) /
                           std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        if (rel > worst) {
            worst = rel;
            wi = i;
            wa = analytic[i];
            wn = numeric;
            wfp = fp;
            wfm = fm;
            wf0 = f0;
        }
    }
    if (worst > 1e-4) {
        const double right = (wfp - wf0) / eps;
        const double left = (wf0 - wfm) / eps;
        std::printf("%-12s %-32s worst %.3e at %ld  analytic %.9e central %.9e\n", model,
                    pname.c_str(), worst, wi, wa, wn);
        std::printf("%-12s %-32s   one-sided right %.9e left %.9e  (kink if they differ)\n",
                    model, "", right, left);
    }
}

void model_diag(const char* name, ParamStore& store,
                const std::function<Tensor(const Tensor&)>& loss_of_input, const Tensor& x0) {
    const double in_err = grad_check(loss_of_input, x0);
    std::printf("%-12s %-32s %.3e\n", name, "(input)", in_err);
    auto thunk = [&]() { return loss_of_input(x0); };
    for (ParamEntry& e : store.entries())
        if (e.trainable) in_place_probe(name, e.name, thunk, store, e.tensor);
}

} // namespace

int main() {
    RngStream rng(42, "gradcheck");
    const int toy_c = 2, toy_t = 32;
    for (UNetVariant variant : {UNetVariant::base, UNetVariant::plus, UNetVariant::attn}) {
        UNetConfig cfg;
        cfg.channels = toy_c;
        cfg.width = 4;
        cfg.variant = variant;
        RngStream r = rng.sub(variant_name(variant));
        UNet net(cfg, r.sub("init"));
        Tensor x0 = randn(Shape(toy_c, toy_t), r);
        Tensor target = randn(Shape(toy_c, toy_t), r);
        auto loss_of_input = [&net, target](const Tensor& xin) {
            std::vector<Tensor> heads = net.forward_heads(xin, true);
            if (heads.size() == 1) return mse_loss(heads.front(), target);
            std::vector<Tensor> losses;
            losses.reserve(heads.size());
            for (const Tensor& h : heads) losses.push_back(mse_loss(h, target));
            return mean_of(losses);
        };
        model_diag(variant_name(variant), net.params(), loss_of_input, x0);
    }
    {
        ArtConfig cfg;
        cfg.channels = toy_c;
        cfg.tau = 8;
        cfg.heads = 2;
        cfg.blocks = 1;
        cfg.ff = 16;
        RngStream r = rng.sub("art");
        Art net(cfg, r.sub("init"));
        Tensor x0 = randn(Shape(toy_c, toy_t), r);
        Tensor target = randn(Shape(toy_c, toy_t), r);
        auto loss_of_input = [&net, target](const Tensor& xin) {
            return mse_loss(net.forward(xin), target);
        };
        model_diag("art", net.params(), loss_of_input, x0);
    }
    return 0;
}
