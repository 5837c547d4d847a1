#pragma once

#include <optional>

#include "arteeg/tensor.hpp"

namespace arteeg {

// Differentiable primitives. Feature maps are rank-2 (channels x time) or
// rank-3 (batch x channels x time); ops that accept rank 3 treat axis 0 as a
// batch of independent segments.

enum class Pad { same, valid };

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);

// kernels: [C_out x C_in x K], bias: [C_out]. same-padding (zeros) requires
// odd K and stride 1; valid supports stride >= 1. Input rank 2 or 3.
Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              Pad padding = Pad::same, int stride = 1);

// Window 2, stride 2; odd-length input is right-padded with -inf, so the last
// element wins its window. Ties route the gradient to the first argmax.
Tensor maxpool1d(const Tensor& x);

// Nearest-neighbor x2 along time.
Tensor upsample1d(const Tensor& x);

// weight: [D_out x D_in], bias: [D_out], x: [D_in x T] -> [D_out x T].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Per time-step normalization over the feature axis, learnable gain/offset
// (each [D]). x: [D x T].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset,
                  double eps = 1e-5);

// Per-channel normalization over batch+time statistics in training mode,
// running statistics in eval mode. run_mean/run_var/run_count are leaf buffers
// ([C], [C], [1]); training mode updates them (momentum 0.1). Eval before any
// training update is an error. x rank 2 (C x T) or rank 3 (B x C x T).
Tensor batch_norm(const Tensor& x, const Tensor& gain, const Tensor& offset,
                  Tensor& run_mean, Tensor& run_var, Tensor& run_count,
                  bool training, double momentum = 0.1, double eps = 1e-5);

// Log-softmax over the channel axis, per time step. x: [C x T].
Tensor log_softmax(const Tensor& x);

// Per-channel standardization over the time axis (population std). Channels
// with std below min_std raise DegenerateChannel. x: [C x T].
Tensor zscore(const Tensor& x, double min_std = 1e-8);

// Rows = tokens. Q: [Tq x d], K: [Tk x d], V: [Tk x d] -> [Tq x d].
// scores(i,j) = softmax_j(scale * Q_i . K_j) with max-subtraction. If masked,
// positions j > i are excluded (test fixture; shipped models never set it).
// scores_out, when given, receives the post-softmax score matrix.
Tensor scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        double scale, bool masked = false,
                        Eigen::MatrixXd* scores_out = nullptr);

struct MhaParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // w*: [tau x tau], b*: [tau]
};

// Tokens are time steps. x_q: [tau x Tq], x_kv: [tau x Tk] -> [tau x Tq].
// Per-head projections are the h row-blocks of the fused weights; per-head
// scale is 1/sqrt(tau/h). scores_out receives h post-softmax matrices.
Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, int heads,
                            const MhaParams& p, bool masked = false,
                            std::vector<Eigen::MatrixXd>* scores_out = nullptr);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor slice_cols(const Tensor& a, int c0, int c1);  // [R x C] -> [R x (c1-c0)]
Tensor concat_rows(const std::vector<Tensor>& parts);  // along feature axis (rank 2/3)
Tensor concat_cols(const std::vector<Tensor>& parts);  // rank 2

// Mean squared error. Value is the mean of per-channel means (and the mean
// over batch items for rank 3), accumulated channel-by-channel so it matches
// the evaluation-side per-channel MSE bit for bit.
Tensor mse_loss(const Tensor& z, const Tensor& target);

// Mean of scalar losses, in index order.
Tensor mean_of(const std::vector<Tensor>& scalars);

// Rank-3 batch utilities.
Tensor batch_slice(const Tensor& x, int b);            // [B x C x T] -> [C x T]
Tensor batch_stack(const std::vector<Tensor>& items);  // n x [C x T] -> [n x C x T]

// Sinusoidal position table: row 2q holds sin(p / 10000^(2q/d)), row 2q+1 the
// matching cos, for positions p in [0, t). Constant (non-trainable) leaf.
// d must be even.
Tensor positional_encoding(int d, int t);

// Max over elements of |analytic - numeric| / max(|analytic|, |numeric|, floor)
// for d loss/d x by central differences. loss_fn must build a scalar from x.
// The floor sits well above the difference quotient's roundoff resolution
// (about |loss| * 1e-16 / eps): at an exactly-zero gradient, e.g. a bias
// behind a dead relu channel, the numeric side is pure noise and a smaller
// floor would report that noise as gradient error.
double grad_check(const std::function<Tensor(const Tensor&)>& loss_fn,
                  const Tensor& x, double eps = 1e-5, double floor = 1e-5);

} // namespace arteeg
