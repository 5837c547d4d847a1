#include "arteeg/ops.hpp"

#include <cmath>

#include "arteeg/mse_accum.hpp"
#include "node_build.hpp"

namespace arteeg {

namespace {

using detail::Node;
using detail::make_node;
using detail::mat;
using detail::gmat;

int batch_of(const Shape& s) { return s.rank == 3 ? s.d[0] : 1; }
int chan_of(const Shape& s) { return s.rank == 3 ? s.d[1] : s.d[0]; }
int time_of(const Shape& s) { return s.rank == 3 ? s.d[2] : s.d[1]; }

void require_map(const Tensor& x, const char* op) {
    if (x.rank() != 2 && x.rank() != 3)
        throw ShapeError(std::string(op) + ": expected rank 2 or 3, have " + x.shape().str());
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    auto m = make_node(a.shape(), a.values() + b.values(), "add", {a.node_ptr(), b.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* pa = a.node_ptr().get();
        Node* pb = b.node_ptr().get();
        self->backprop = [self, pa, pb] {
            if (pa->requires_grad) pa->grad += self->grad;
            if (pb->requires_grad) pb->grad += self->grad;
        };
    }
    return Tensor(m.n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("sub: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    auto m = make_node(a.shape(), a.values() - b.values(), "sub", {a.node_ptr(), b.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* pa = a.node_ptr().get();
        Node* pb = b.node_ptr().get();
        self->backprop = [self, pa, pb] {
            if (pa->requires_grad) pa->grad += self->grad;
            if (pb->requires_grad) pb->grad -= self->grad;
        };
    }
    return Tensor(m.n);
}

Tensor scale(const Tensor& a, double s) {
    auto m = make_node(a.shape(), a.values() * s, "scale", {a.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* pa = a.node_ptr().get();
        self->backprop = [self, pa, s] { pa->grad += self->grad * s; };
    }
    return Tensor(m.n);
}

Tensor relu(const Tensor& x) {
    auto m = make_node(x.shape(), x.values().max(0.0), "relu", {x.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        self->backprop = [self, px] {
            // Subgradient 0 at the tie point x == 0.
            px->grad += self->grad * (px->value > 0.0).cast<double>();
        };
    }
    return Tensor(m.n);
}

namespace {

// Unfold one segment into a (Cin*K) x Tout column matrix (zero padding).
void im2col(ConstMatMap x, int k, int pad, int stride, RowMat& col) {
    const int cin = static_cast<int>(x.rows());
    const int t = static_cast<int>(x.cols());
    const int tout = static_cast<int>(col.cols());
    col.setZero();
    for (int ci = 0; ci < cin; ++ci)
        for (int kk = 0; kk < k; ++kk) {
            const int row = ci * k + kk;
            for (int j = 0; j < tout; ++j) {
                const int src = j * stride + kk - pad;
                if (src >= 0 && src < t) col(row, j) = x(ci, src);
            }
        }
}

void col2im_add(const RowMat& dcol, int k, int pad, int stride, MatMap dx) {
    const int cin = static_cast<int>(dx.rows());
    const int t = static_cast<int>(dx.cols());
    const int tout = static_cast<int>(dcol.cols());
    for (int ci = 0; ci < cin; ++ci)
        for (int kk = 0; kk < k; ++kk) {
            const int row = ci * k + kk;
            for (int j = 0; j < tout; ++j) {
                const int src = j * stride + kk - pad;
                if (src >= 0 && src < t) dx(ci, src) += dcol(row, j);
            }
        }
}

} // namespace

Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias, Pad padding, int stride) {
    require_map(x, "conv1d");
    if (kernels.rank() != 3)
        throw ShapeError("conv1d: kernels must be rank 3 [C_out x C_in x K], have " +
                         kernels.shape().str());
    if (bias.rank() != 1 || bias.shape().d[0] != kernels.shape().d[0])
        throw ShapeError("conv1d: bias must be [C_out]");
    const int cout = kernels.shape().d[0];
    const int cin = kernels.shape().d[1];
    const int k = kernels.shape().d[2];
    const int b = batch_of(x.shape());
    const int t = time_of(x.shape());
    if (chan_of(x.shape()) != cin)
        throw ShapeError("conv1d: input has " + std::to_string(chan_of(x.shape())) +
                         " channels, kernels expect " + std::to_string(cin));
    if (stride < 1) throw ShapeError("conv1d: stride must be >= 1");
    int pad = 0, tout = 0;
    if (padding == Pad::same) {
        if (k % 2 == 0) throw ShapeError("conv1d: same padding requires odd kernel size");
        if (stride != 1) throw ShapeError("conv1d: same padding requires stride 1");
        pad = (k - 1) / 2;
        tout = t;
    } else {
        if (k > t) throw ShapeError("conv1d: kernel longer than input under valid padding");
        tout = (t - k) / stride + 1;
    }

    Shape os = x.rank() == 3 ? Shape(b, cout, tout) : Shape(cout, tout);
    Eigen::ArrayXd out(os.size());
    ConstMatMap wmat(kernels.values().data(), cout, cin * k);
    Eigen::Map<const Eigen::VectorXd> bv(bias.values().data(), cout);
    {
        RowMat col(cin * k, tout);
        for (int bi = 0; bi < b; ++bi) {
            ConstMatMap xi = x.rank() == 3 ? ConstMatMap(x.values().data() + static_cast<long>(bi) * cin * t, cin, t)
                                            : x.matrix();
            im2col(xi, k, pad, stride, col);
            MatMap yi(out.data() + static_cast<long>(bi) * cout * tout, cout, tout);
            yi.noalias() = wmat * col;
            yi.colwise() += bv;
        }
    }
    auto m = make_node(os, std::move(out), "conv1d",
                       {x.node_ptr(), kernels.node_ptr(), bias.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        Node* pw = kernels.node_ptr().get();
        Node* pb = bias.node_ptr().get();
        self->backprop = [self, px, pw, pb, cout, cin, k, b, t, tout, pad, stride] {
            ConstMatMap wmat(pw->value.data(), cout, cin * k);
            RowMat col(cin * k, tout);
            RowMat dcol(cin * k, tout);
            for (int bi = 0; bi < b; ++bi) {
                MatMap dyi(self->grad.data() + static_cast<long>(bi) * cout * tout, cout, tout);
                if (pw->requires_grad || pb->requires_grad) {
                    ConstMatMap xi(px->value.data() + static_cast<long>(bi) * cin * t, cin, t);
                    im2col(xi, k, pad, stride, col);
                    MatMap dwm(pw->grad.data(), cout, cin * k);
                    dwm.noalias() += dyi * col.transpose();
                    Eigen::Map<Eigen::VectorXd>(pb->grad.data(), cout) += dyi.rowwise().sum();
                }
                if (px->requires_grad) {
                    dcol.noalias() = wmat.transpose() * dyi;
                    MatMap dxi(px->grad.data() + static_cast<long>(bi) * cin * t, cin, t);
                    col2im_add(dcol, k, pad, stride, dxi);
                }
            }
        };
    }
    return Tensor(m.n);
}

Tensor maxpool1d(const Tensor& x) {
    require_map(x, "maxpool1d");
    const int b = batch_of(x.shape());
    const int c = chan_of(x.shape());
    const int t = time_of(x.shape());
    if (t < 1) throw ShapeError("maxpool1d: empty input");
    const int tout = (t + 1) / 2;
    Shape os = x.rank() == 3 ? Shape(b, c, tout) : Shape(c, tout);
    Eigen::ArrayXd out(os.size());
    auto argmax = std::make_shared<std::vector<int>>(os.size());
    const double* xv = x.values().data();
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci) {
            const long ibase = (static_cast<long>(bi) * c + ci) * t;
            const long obase = (static_cast<long>(bi) * c + ci) * tout;
            for (int j = 0; j < tout; ++j) {
                const int t0 = 2 * j;
                const int t1 = 2 * j + 1;
                // Right-pad with -inf: a lone last sample wins. First argmax on ties.
                if (t1 >= t || xv[ibase + t0] >= xv[ibase + t1]) {
                    out[obase + j] = xv[ibase + t0];
                    (*argmax)[obase + j] = t0;
                } else {
                    out[obase + j] = xv[ibase + t1];
                    (*argmax)[obase + j] = t1;
                }
            }
        }
    auto m = make_node(os, std::move(out), "maxpool1d", {x.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        self->backprop = [self, px, argmax, b, c, t, tout] {
            for (int bi = 0; bi < b; ++bi)
                for (int ci = 0; ci < c; ++ci) {
                    const long ibase = (static_cast<long>(bi) * c + ci) * t;
                    const long obase = (static_cast<long>(bi) * c + ci) * tout;
                    for (int j = 0; j < tout; ++j)
                        px->grad[ibase + (*argmax)[obase + j]] += self->grad[obase + j];
                }
        };
    }
    return Tensor(m.n);
}

Tensor upsample1d(const Tensor& x) {
    require_map(x, "upsample1d");
    const int b = batch_of(x.shape());
    const int c = chan_of(x.shape());
    const int t = time_of(x.shape());
    const int tout = 2 * t;
    Shape os = x.rank() == 3 ? Shape(b, c, tout) : Shape(c, tout);
    Eigen::ArrayXd out(os.size());
    const double* xv = x.values().data();
    for (long row = 0; row < static_cast<long>(b) * c; ++row)
        for (int j = 0; j < t; ++j) {
            out[row * tout + 2 * j] = xv[row * t + j];
            out[row * tout + 2 * j + 1] = xv[row * t + j];
        }
    auto m = make_node(os, std::move(out), "upsample1d", {x.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        self->backprop = [self, px, b, c, t, tout] {
            for (long row = 0; row < static_cast<long>(b) * c; ++row)
                for (int j = 0; j < t; ++j)
                    px->grad[row * t + j] +=
                        self->grad[row * tout + 2 * j] + self->grad[row * tout + 2 * j + 1];
        };
    }
    return Tensor(m.n);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 2) throw ShapeError("linear: input must be rank 2, have " + x.shape().str());
    if (weight.rank() != 2) throw ShapeError("linear: weight must be rank 2");
    const int din = weight.shape().d[1];
    const int dout = weight.shape().d[0];
    if (x.shape().d[0] != din)
        throw ShapeError("linear: input features " + std::to_string(x.shape().d[0]) +
                         " vs weight expecting " + std::to_string(din));
    if (bias.rank() != 1 || bias.shape().d[0] != dout) throw ShapeError("linear: bias must be [D_out]");
    const int t = x.shape().d[1];
    Eigen::ArrayXd out(static_cast<long>(dout) * t);
    {
        MatMap y(out.data(), dout, t);
        y.noalias() = ConstMatMap(weight.values().data(), dout, din) * x.matrix();
        y.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.values().data(), dout);
    }
    auto m = make_node(Shape(dout, t), std::move(out), "linear",
                       {x.node_ptr(), weight.node_ptr(), bias.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        Node* pw = weight.node_ptr().get();
        Node* pb = bias.node_ptr().get();
        self->backprop = [self, px, pw, pb] {
            MatMap dy = gmat(*self);
            if (pw->requires_grad) gmat(*pw).noalias() += dy * mat(*px).transpose();
            if (pb->requires_grad)
                Eigen::Map<Eigen::VectorXd>(pb->grad.data(), pb->shape.d[0]) += dy.rowwise().sum();
            if (px->requires_grad) gmat(*px).noalias() += mat(*pw).transpose() * dy;
        };
    }
    return Tensor(m.n);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset, double eps) {
    if (x.rank() != 2) throw ShapeError("layer_norm: input must be rank 2");
    const int d = x.shape().d[0];
    const int t = x.shape().d[1];
    if (gain.rank() != 1 || gain.shape().d[0] != d || offset.rank() != 1 || offset.shape().d[0] != d)
        throw ShapeError("layer_norm: gain/offset must be [D]");
    auto xhat = std::make_shared<RowMat>(d, t);
    auto inv = std::make_shared<Eigen::VectorXd>(t);
    Eigen::ArrayXd out(static_cast<long>(d) * t);
    {
        ConstMatMap xm = x.matrix();
        MatMap y(out.data(), d, t);
        Eigen::Map<const Eigen::ArrayXd> g(gain.values().data(), d);
        Eigen::Map<const Eigen::ArrayXd> o(offset.values().data(), d);
        for (int j = 0; j < t; ++j) {
            const double mu = xm.col(j).mean();
            const double var = (xm.col(j).array() - mu).square().mean();
            const double iv = 1.0 / std::sqrt(var + eps);
            (*inv)[j] = iv;
            xhat->col(j) = (xm.col(j).array() - mu) * iv;
            y.col(j) = (xhat->col(j).array() * g + o).matrix();
        }
    }
    auto m = make_node(Shape(d, t), std::move(out), "layer_norm",
                       {x.node_ptr(), gain.node_ptr(), offset.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        Node* pg = gain.node_ptr().get();
        Node* po = offset.node_ptr().get();
        self->backprop = [self, px, pg, po, xhat, inv, d, t] {
            MatMap dy = gmat(*self);
            Eigen::Map<const Eigen::ArrayXd> g(pg->value.data(), d);
            for (int j = 0; j < t; ++j) {
                Eigen::ArrayXd gy = dy.col(j).array() * g;
                if (pg->requires_grad)
                    Eigen::Map<Eigen::ArrayXd>(pg->grad.data(), d) +=
                        dy.col(j).array() * xhat->col(j).array();
                if (po->requires_grad)
                    Eigen::Map<Eigen::ArrayXd>(po->grad.data(), d) += dy.col(j).array();
                if (px->requires_grad) {
                    const double mg = gy.mean();
                    const double mgx = (gy * xhat->col(j).array()).mean();
                    gmat(*px).col(j).array() +=
                        (*inv)[j] * (gy - mg - xhat->col(j).array() * mgx);
                }
            }
        };
    }
    return Tensor(m.n);
}

Tensor batch_norm(const Tensor& x, const Tensor& gain, const Tensor& offset, Tensor& run_mean,
                  Tensor& run_var, Tensor& run_count, bool training, double momentum, double eps) {
    require_map(x, "batch_norm");
    const int b = batch_of(x.shape());
    const int c = chan_of(x.shape());
    const int t = time_of(x.shape());
    if (gain.shape().d[0] != c || offset.shape().d[0] != c || run_mean.shape().d[0] != c ||
        run_var.shape().d[0] != c)
        throw ShapeError("batch_norm: per-channel parameter size mismatch");
    const long n = static_cast<long>(b) * t;  // samples per channel
    Eigen::ArrayXd mu(c), var(c);
    if (training) {
        if (n < 2) throw UsageError("batch_norm: training needs at least 2 samples per channel");
        for (int ci = 0; ci < c; ++ci) {
            double s = 0.0, s2 = 0.0;
            for (int bi = 0; bi < b; ++bi) {
                const double* row = x.values().data() + (static_cast<long>(bi) * c + ci) * t;
                for (int j = 0; j < t; ++j) {
                    s += row[j];
                    s2 += row[j] * row[j];
                }
            }
            mu[ci] = s / static_cast<double>(n);
            var[ci] = s2 / static_cast<double>(n) - mu[ci] * mu[ci];
            if (var[ci] < 0.0) var[ci] = 0.0;
        }
        const bool first = run_count.values()[0] == 0.0;
        Eigen::ArrayXd& rm = run_mean.leaf_values();
        Eigen::ArrayXd& rv = run_var.leaf_values();
        if (first) {
            rm = mu;
            rv = var;
        } else {
            rm = (1.0 - momentum) * rm + momentum * mu;
            rv = (1.0 - momentum) * rv + momentum * var;
        }
        run_count.leaf_values()[0] += 1.0;
    } else {
        if (run_count.values()[0] == 0.0)
            throw UsageError("batch_norm: eval mode before any training update");
        mu = run_mean.values();
        var = run_var.values();
    }
    Eigen::ArrayXd invs = (var + eps).sqrt().inverse();
    auto xhat = std::make_shared<Eigen::ArrayXd>(x.values());
    {
        double* xh = xhat->data();
        for (int bi = 0; bi < b; ++bi)
            for (int ci = 0; ci < c; ++ci) {
                const long base = (static_cast<long>(bi) * c + ci) * t;
                for (int j = 0; j < t; ++j) xh[base + j] = (xh[base + j] - mu[ci]) * invs[ci];
            }
    }
    Eigen::ArrayXd out(x.size());
    {
        const double* xh = xhat->data();
        const double* g = gain.values().data();
        const double* o = offset.values().data();
        for (int bi = 0; bi < b; ++bi)
            for (int ci = 0; ci < c; ++ci) {
                const long base = (static_cast<long>(bi) * c + ci) * t;
                for (int j = 0; j < t; ++j) out[base + j] = xh[base + j] * g[ci] + o[ci];
            }
    }
    auto m = make_node(x.shape(), std::move(out), "batch_norm",
                       {x.node_ptr(), gain.node_ptr(), offset.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        Node* pg = gain.node_ptr().get();
        Node* po = offset.node_ptr().get();
        auto invs_keep = std::make_shared<Eigen::ArrayXd>(std::move(invs));
        self->backprop = [self, px, pg, po, xhat, invs_keep, b, c, t, n, training] {
            const double* dy = self->grad.data();
            const double* xh = xhat->data();
            const double* g = pg->value.data();
            for (int ci = 0; ci < c; ++ci) {
                double sum_dy = 0.0, sum_dyxh = 0.0;
                for (int bi = 0; bi < b; ++bi) {
                    const long base = (static_cast<long>(bi) * c + ci) * t;
                    for (int j = 0; j < t; ++j) {
                        sum_dy += dy[base + j];
                        sum_dyxh += dy[base + j] * xh[base + j];
                    }
                }
                if (pg->requires_grad) pg->grad[ci] += sum_dyxh;
                if (po->requires_grad) po->grad[ci] += sum_dy;
                if (px->requires_grad) {
                    const double iv = (*invs_keep)[ci];
                    if (training) {
                        const double mdy = sum_dy / static_cast<double>(n);
                        const double mdyxh = sum_dyxh / static_cast<double>(n);
                        for (int bi = 0; bi < b; ++bi) {
                            const long base = (static_cast<long>(bi) * c + ci) * t;
                            for (int j = 0; j < t; ++j)
                                px->grad[base + j] +=
                                    g[ci] * iv * (dy[base + j] - mdy - xh[base + j] * mdyxh);
                        }
                    } else {
                        for (int bi = 0; bi < b; ++bi) {
                            const long base = (static_cast<long>(bi) * c + ci) * t;
                            for (int j = 0; j < t; ++j)
                                px->grad[base + j] += g[ci] * iv * dy[base + j];
                        }
                    }
                }
            }
        };
    }
    return Tensor(m.n);
}

Tensor log_softmax(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("log_softmax: input must be rank 2 [C x T]");
    const int c = x.shape().d[0];
    const int t = x.shape().d[1];
    Eigen::ArrayXd out(x.size());
    {
        ConstMatMap xm = x.matrix();
        MatMap y(out.data(), c, t);
        for (int j = 0; j < t; ++j) {
            const double mx = xm.col(j).maxCoeff();
            const double lse = std::log((xm.col(j).array() - mx).exp().sum());
            y.col(j) = xm.col(j).array() - mx - lse;
        }
    }
    auto m = make_node(Shape(c, t), std::move(out), "log_softmax", {x.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        self->backprop = [self, px, c, t] {
            MatMap dy = gmat(*self);
            MatMap y = mat(*self);
            for (int j = 0; j < t; ++j) {
                const double s = dy.col(j).sum();
                gmat(*px).col(j).array() += dy.col(j).array() - y.col(j).array().exp() * s;
            }
        };
    }
    return Tensor(m.n);
}

Tensor zscore(const Tensor& x, double min_std) {
    if (x.rank() != 2) throw ShapeError("zscore: input must be rank 2 [C x T]");
    const int c = x.shape().d[0];
    const int t = x.shape().d[1];
    auto inv = std::make_shared<Eigen::VectorXd>(c);
    Eigen::ArrayXd out(x.size());
    {
        ConstMatMap xm = x.matrix();
        MatMap y(out.data(), c, t);
        for (int ci = 0; ci < c; ++ci) {
            const double mu = xm.row(ci).mean();
            const double sd = std::sqrt((xm.row(ci).array() - mu).square().mean());
            if (!(sd >= min_std))
                throw DegenerateChannel("zscore: channel " + std::to_string(ci) +
                                        " has degenerate std " + std::to_string(sd));
            (*inv)[ci] = 1.0 / sd;
            y.row(ci) = (xm.row(ci).array() - mu) * (*inv)[ci];
        }
    }
    auto m = make_node(Shape(c, t), std::move(out), "zscore", {x.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        self->backprop = [self, px, inv, c, t] {
            MatMap dy = gmat(*self);
            MatMap y = mat(*self);
            for (int ci = 0; ci < c; ++ci) {
                const double mdy = dy.row(ci).mean();
                const double mdyy = (dy.row(ci).array() * y.row(ci).array()).mean();
                gmat(*px).row(ci).array() +=
                    (*inv)[ci] * (dy.row(ci).array() - mdy - y.row(ci).array() * mdyy);
            }
        };
    }
    return Tensor(m.n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: both inputs must be rank 2");
    if (a.shape().d[1] != b.shape().d[0])
        throw ShapeError("matmul: inner dims " + a.shape().str() + " vs " + b.shape().str());
    const int r = a.shape().d[0];
    const int cc = b.shape().d[1];
    Eigen::ArrayXd out(static_cast<long>(r) * cc);
    MatMap(out.data(), r, cc).noalias() = a.matrix() * b.matrix();
    auto m = make_node(Shape(r, cc), std::move(out), "matmul", {a.node_ptr(), b.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* pa = a.node_ptr().get();
        Node* pb = b.node_ptr().get();
        self->backprop = [self, pa, pb] {
            MatMap dy = gmat(*self);
            if (pa->requires_grad) gmat(*pa).noalias() += dy * mat(*pb).transpose();
            if (pb->requires_grad) gmat(*pb).noalias() += mat(*pa).transpose() * dy;
        };
    }
    return Tensor(m.n);
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: input must be rank 2");
    const int r = a.shape().d[0];
    const int c = a.shape().d[1];
    Eigen::ArrayXd out(a.size());
    MatMap(out.data(), c, r) = a.matrix().transpose();
    auto m = make_node(Shape(c, r), std::move(out), "transpose", {a.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* pa = a.node_ptr().get();
        self->backprop = [self, pa] { gmat(*pa) += gmat(*self).transpose(); };
    }
    return Tensor(m.n);
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    if (a.rank() != 2) throw ShapeError("slice_cols: input must be rank 2");
    if (c0 < 0 || c1 > a.shape().d[1] || c0 >= c1) throw ShapeError("slice_cols: bad range");
    const int r = a.shape().d[0];
    const int w = c1 - c0;
    Eigen::ArrayXd out(static_cast<long>(r) * w);
    MatMap(out.data(), r, w) = a.matrix().middleCols(c0, w);
    auto m = make_node(Shape(r, w), std::move(out), "slice_cols", {a.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* pa = a.node_ptr().get();
        self->backprop = [self, pa, c0, w] { gmat(*pa).middleCols(c0, w) += gmat(*self); };
    }
    return Tensor(m.n);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const int rk = parts[0].rank();
    if (rk != 2 && rk != 3) throw ShapeError("concat_rows: inputs must be rank 2 or 3");
    const int b = batch_of(parts[0].shape());
    const int t = time_of(parts[0].shape());
    int ctot = 0;
    std::vector<std::shared_ptr<Node>> ps;
    for (const auto& p : parts) {
        if (p.rank() != rk || batch_of(p.shape()) != b || time_of(p.shape()) != t)
            throw ShapeError("concat_rows: mismatched shapes");
        ctot += chan_of(p.shape());
        ps.push_back(p.node_ptr());
    }
    Shape os = rk == 3 ? Shape(b, ctot, t) : Shape(ctot, t);
    Eigen::ArrayXd out(os.size());
    for (int bi = 0; bi < b; ++bi) {
        long row = 0;
        for (const auto& p : parts) {
            const int pc = chan_of(p.shape());
            const double* src = p.values().data() + static_cast<long>(bi) * pc * t;
            std::copy(src, src + static_cast<long>(pc) * t,
                      out.data() + (static_cast<long>(bi) * ctot + row) * t);
            row += pc;
        }
    }
    auto m = make_node(os, std::move(out), "concat_rows", std::move(ps));
    if (m.tracked) {
        Node* self = m.n.get();
        std::vector<Node*> raw;
        for (const auto& p : parts) raw.push_back(p.node_ptr().get());
        self->backprop = [self, raw, b, ctot, t] {
            for (int bi = 0; bi < b; ++bi) {
                long row = 0;
                for (Node* p : raw) {
                    const int pc = chan_of(p->shape);
                    if (p->requires_grad) {
                        const double* g = self->grad.data() + (static_cast<long>(bi) * ctot + row) * t;
                        double* dst = p->grad.data() + static_cast<long>(bi) * pc * t;
                        for (long i = 0; i < static_cast<long>(pc) * t; ++i) dst[i] += g[i];
                    }
                    row += pc;
                }
            }
        };
    }
    return Tensor(m.n);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int r = parts[0].shape().d[0];
    int ctot = 0;
    std::vector<std::shared_ptr<Node>> ps;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.shape().d[0] != r) throw ShapeError("concat_cols: mismatched shapes");
        ctot += p.shape().d[1];
        ps.push_back(p.node_ptr());
    }
    Eigen::ArrayXd out(static_cast<long>(r) * ctot);
    {
        MatMap y(out.data(), r, ctot);
        int col = 0;
        for (const auto& p : parts) {
            y.middleCols(col, p.shape().d[1]) = p.matrix();
            col += p.shape().d[1];
        }
    }
    auto m = make_node(Shape(r, ctot), std::move(out), "concat_cols", std::move(ps));
    if (m.tracked) {
        Node* self = m.n.get();
        std::vector<Node*> raw;
        for (const auto& p : parts) raw.push_back(p.node_ptr().get());
        self->backprop = [self, raw] {
            int col = 0;
            for (Node* p : raw) {
                const int w = p->shape.d[1];
                if (p->requires_grad) gmat(*p) += gmat(*self).middleCols(col, w);
                col += w;
            }
        };
    }
    return Tensor(m.n);
}

Tensor mse_loss(const Tensor& z, const Tensor& target) {
    if (z.shape() != target.shape())
        throw ShapeError("mse_loss: shape mismatch " + z.shape().str() + " vs " +
                         target.shape().str());
    require_map(z, "mse_loss");
    const int b = batch_of(z.shape());
    const int c = chan_of(z.shape());
    const int t = time_of(z.shape());
    double acc = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        const double* zp = z.values().data() + static_cast<long>(bi) * c * t;
        const double* tp = target.values().data() + static_cast<long>(bi) * c * t;
        acc += detail::mean_of_channel_mses(zp, tp, c, t);
    }
    const double value = acc / static_cast<double>(b);
    Shape s;
    s.rank = 0;
    Eigen::ArrayXd v(1);
    v[0] = value;
    auto m = make_node(s, std::move(v), "mse_loss", {z.node_ptr(), target.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* pz = z.node_ptr().get();
        Node* pt = target.node_ptr().get();
        const double inv_n = 1.0 / (static_cast<double>(b) * c * t);
        self->backprop = [self, pz, pt, inv_n] {
            const double g = self->grad[0] * 2.0 * inv_n;
            if (pz->requires_grad) pz->grad += g * (pz->value - pt->value);
            if (pt->requires_grad) pt->grad += g * (pt->value - pz->value);
        };
    }
    return Tensor(m.n);
}

Tensor mean_of(const std::vector<Tensor>& scalars) {
    if (scalars.empty()) throw ShapeError("mean_of: no inputs");
    std::vector<std::shared_ptr<Node>> ps;
    double s = 0.0;
    for (const auto& x : scalars) {
        if (x.size() != 1) throw ShapeError("mean_of: inputs must be scalars");
        s += x.values()[0];
        ps.push_back(x.node_ptr());
    }
    const double n = static_cast<double>(scalars.size());
    Shape sh;
    sh.rank = 0;
    Eigen::ArrayXd v(1);
    v[0] = s / n;
    auto m = make_node(sh, std::move(v), "mean_of", std::move(ps));
    if (m.tracked) {
        Node* self = m.n.get();
        std::vector<Node*> raw;
        for (const auto& x : scalars) raw.push_back(x.node_ptr().get());
        self->backprop = [self, raw, n] {
            for (Node* p : raw)
                if (p->requires_grad) p->grad[0] += self->grad[0] / n;
        };
    }
    return Tensor(m.n);
}

Tensor batch_slice(const Tensor& x, int b) {
    if (x.rank() != 3) throw ShapeError("batch_slice: input must be rank 3");
    if (b < 0 || b >= x.shape().d[0]) throw ShapeError("batch_slice: index out of range");
    const int c = x.shape().d[1];
    const int t = x.shape().d[2];
    const long base = static_cast<long>(b) * c * t;
    Eigen::ArrayXd out = x.values().segment(base, static_cast<long>(c) * t);
    auto m = make_node(Shape(c, t), std::move(out), "batch_slice", {x.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* px = x.node_ptr().get();
        self->backprop = [self, px, base, c, t] {
            px->grad.segment(base, static_cast<long>(c) * t) += self->grad;
        };
    }
    return Tensor(m.n);
}

Tensor positional_encoding(int d, int t) {
    if (d < 2 || d % 2 != 0)
        throw ShapeError("positional_encoding: feature width must be even, have " +
                         std::to_string(d));
    if (t < 1) throw ShapeError("positional_encoding: empty time axis");
    Eigen::ArrayXd v(static_cast<long>(d) * t);
    for (int q = 0; q < d / 2; ++q) {
        const double rate = std::pow(10000.0, 2.0 * q / static_cast<double>(d));
        for (int p = 0; p < t; ++p) {
            v[static_cast<long>(2 * q) * t + p] = std::sin(p / rate);
            v[static_cast<long>(2 * q + 1) * t + p] = std::cos(p / rate);
        }
    }
    return Tensor::from_flat(Shape(d, t), std::move(v));
}

Tensor batch_stack(const std::vector<Tensor>& items) {
    if (items.empty()) throw ShapeError("batch_stack: no inputs");
    const Shape s0 = items[0].shape();
    if (s0.rank != 2) throw ShapeError("batch_stack: items must be rank 2");
    std::vector<std::shared_ptr<Node>> ps;
    for (const auto& it : items) {
        if (it.shape() != s0) throw ShapeError("batch_stack: mismatched item shapes");
        ps.push_back(it.node_ptr());
    }
    const int b = static_cast<int>(items.size());
    const long per = s0.size();
    Eigen::ArrayXd out(per * b);
    for (int bi = 0; bi < b; ++bi) out.segment(per * bi, per) = items[bi].values();
    auto m = make_node(Shape(b, s0.d[0], s0.d[1]), std::move(out), "batch_stack", std::move(ps));
    if (m.tracked) {
        Node* self = m.n.get();
        std::vector<Node*> raw;
        for (const auto& it : items) raw.push_back(it.node_ptr().get());
        self->backprop = [self, raw, per] {
            for (std::size_t bi = 0; bi < raw.size(); ++bi)
                if (raw[bi]->requires_grad)
                    raw[bi]->grad += self->grad.segment(per * static_cast<long>(bi), per);
        };
    }
    return Tensor(m.n);
}

} // namespace arteeg
