#include <cmath>
#include <limits>

#include "arteeg/ops.hpp"
#include "node_build.hpp"

namespace arteeg {

namespace {
using detail::Node;
using detail::make_node;
using detail::mat;
using detail::gmat;
} // namespace

Tensor scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale,
                        bool masked, Eigen::MatrixXd* scores_out) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
        throw ShapeError("scaled_attention: inputs must be rank 2");
    const int tq = q.shape().d[0];
    const int d = q.shape().d[1];
    const int tk = k.shape().d[0];
    if (k.shape().d[1] != d)
        throw ShapeError("scaled_attention: query/key feature dims differ");
    if (v.shape().d[0] != tk)
        throw ShapeError("scaled_attention: key/value row counts differ");
    const int dv = v.shape().d[1];
    if (masked && tq != tk)
        throw ShapeError("scaled_attention: causal mask needs square score matrix");

    // Only the post-softmax weights P are kept for the backward pass; the raw
    // logits are never stored, which keeps long-sequence graphs affordable.
    auto p = std::make_shared<RowMat>(tq, tk);
    {
        p->noalias() = q.matrix() * k.matrix().transpose();
        *p *= scale;
        if (masked)
            for (int i = 0; i < tq; ++i)
                for (int j = i + 1; j < tk; ++j) (*p)(i, j) = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < tq; ++i) {
            const double mx = p->row(i).maxCoeff();
            p->row(i) = (p->row(i).array() - mx).exp();
            // vectorized exp clamps -inf to its finite range low end, leaving
            // denormal residue where the mask demands an exact zero
            if (masked)
                for (int j = i + 1; j < tk; ++j) (*p)(i, j) = 0.0;
            p->row(i) /= p->row(i).sum();
        }
    }
    if (scores_out) *scores_out = *p;

    Eigen::ArrayXd out(static_cast<long>(tq) * dv);
    Eigen::Map<RowMat>(out.data(), tq, dv).noalias() = (*p) * v.matrix();
    auto m = make_node(Shape(tq, dv), std::move(out), "scaled_attention",
                       {q.node_ptr(), k.node_ptr(), v.node_ptr()});
    if (m.tracked) {
        Node* self = m.n.get();
        Node* pq = q.node_ptr().get();
        Node* pk = k.node_ptr().get();
        Node* pv = v.node_ptr().get();
        self->backprop = [self, pq, pk, pv, p, scale] {
            MatMap dout = gmat(*self);
            if (pv->requires_grad) gmat(*pv).noalias() += p->transpose() * dout;
            if (pq->requires_grad || pk->requires_grad) {
                RowMat dp = dout * mat(*pv).transpose();
                // dS = P .* (dP - rowsum(dP .* P)); masked entries have P == 0.
                Eigen::VectorXd rs = (dp.array() * p->array()).rowwise().sum();
                RowMat ds = (p->array() * (dp.array().colwise() - rs.array())).matrix();
                if (pq->requires_grad) gmat(*pq).noalias() += scale * ds * mat(*pk);
                if (pk->requires_grad) gmat(*pk).noalias() += scale * ds.transpose() * mat(*pq);
            }
        };
    }
    return Tensor(m.n);
}

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, int heads, const MhaParams& p,
                            bool masked, std::vector<Eigen::MatrixXd>* scores_out) {
    if (x_q.rank() != 2 || x_kv.rank() != 2)
        throw ShapeError("multi_head_attention: inputs must be rank 2 [D x T]");
    const int dmodel = x_q.shape().d[0];
    if (x_kv.shape().d[0] != dmodel)
        throw ShapeError("multi_head_attention: query/memory feature dims differ");
    if (heads < 1 || dmodel % heads != 0)
        throw ShapeError("multi_head_attention: feature dim must divide evenly across heads");
    const int dh = dmodel / heads;

    // Project in fused D x D matrices, then attend per head over time-major
    // slices. Column block h of the projected (T x D) matrix is head h.
    Tensor qt = transpose(linear(x_q, p.wq, p.bq));
    Tensor kt = transpose(linear(x_kv, p.wk, p.bk));
    Tensor vt = transpose(linear(x_kv, p.wv, p.bv));
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    if (scores_out) scores_out->assign(static_cast<std::size_t>(heads), Eigen::MatrixXd());
    std::vector<Tensor> heads_out;
    heads_out.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        Eigen::MatrixXd* sp = scores_out ? &(*scores_out)[h] : nullptr;
        heads_out.push_back(scaled_attention(slice_cols(qt, h * dh, (h + 1) * dh),
                                             slice_cols(kt, h * dh, (h + 1) * dh),
                                             slice_cols(vt, h * dh, (h + 1) * dh), sc, masked, sp));
    }
    Tensor merged = transpose(concat_cols(heads_out));
    return linear(merged, p.wo, p.bo);
}

} // namespace arteeg
