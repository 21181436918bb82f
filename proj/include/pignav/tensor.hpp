// Reverse-mode autodiff over dense Eigen matrices. One Tape instance records
// one forward pass; backward() walks the recording in reverse. Templated on
// the scalar so training runs in float while gradient checks run in double.
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pignav::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
class Tape {
public:
    /// Constant (no gradient tracked).
    int input(Mat<S> v) { return push(std::move(v), false); }

    /// Trainable leaf; the value is copied in, gradients accumulate on the tape.
    int param(const Mat<S>& v) { return push(v, true); }

    const Mat<S>& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }

    /// Gradient of a leaf/op output; zero-shaped matrix when untouched.
    const Mat<S>& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

    // y = a * b
    int matmul(int a, int b) {
        int out = push(val(a) * val(b), needs(a) || needs(b));
        if (!needs(out)) return out;
        node(out).back = [this, a, b, out] {
            const Mat<S>& g = grad(out);
            if (needs(a)) acc(a, g * val(b).transpose());
            if (needs(b)) acc(b, val(a).transpose() * g);
        };
        return out;
    }

    int add(int a, int b) {
        int out = push(val(a) + val(b), needs(a) || needs(b));
        if (!needs(out)) return out;
        node(out).back = [this, a, b, out] {
            if (needs(a)) acc(a, grad(out));
            if (needs(b)) acc(b, grad(out));
        };
        return out;
    }

    // y = a + bias (bias is 1 x D, broadcast over rows)
    int add_row(int a, int bias) {
        Mat<S> v = val(a);
        v.rowwise() += val(bias).row(0);
        int out = push(std::move(v), needs(a) || needs(bias));
        if (!needs(out)) return out;
        node(out).back = [this, a, bias, out] {
            if (needs(a)) acc(a, grad(out));
            if (needs(bias)) acc(bias, grad(out).colwise().sum());
        };
        return out;
    }

    int scale(int a, S k) {
        int out = push(Mat<S>(val(a) * k), needs(a));
        if (!needs(out)) return out;
        node(out).back = [this, a, k, out] { acc(a, grad(out) * k); };
        return out;
    }

    // y = a - c with a constant c
    int sub_const(int a, Mat<S> c) {
        int out = push(Mat<S>(val(a) - c), needs(a));
        if (!needs(out)) return out;
        node(out).back = [this, a, out] { acc(a, grad(out)); };
        return out;
    }

    // Weighted sum of same-shaped nodes (used for the scalar loss total).
    int lincomb(const std::vector<std::pair<S, int>>& terms) {
        if (terms.empty()) throw std::invalid_argument("lincomb: no terms");
        Mat<S> v = val(terms[0].second) * terms[0].first;
        bool any = needs(terms[0].second);
        for (size_t i = 1; i < terms.size(); ++i) {
            v += val(terms[i].second) * terms[i].first;
            any = any || needs(terms[i].second);
        }
        int out = push(std::move(v), any);
        if (!needs(out)) return out;
        node(out).back = [this, terms, out] {
            for (const auto& [w, id] : terms)
                if (needs(id)) acc(id, grad(out) * w);
        };
        return out;
    }

    int gelu(int a) {
        const S inv_sqrt2 = S(1) / std::sqrt(S(2));
        const auto& x = val(a).array();
        Mat<S> v = (x * S(0.5) * (S(1) + (x * inv_sqrt2).erf())).matrix();
        int out = push(std::move(v), needs(a));
        if (!needs(out)) return out;
        node(out).back = [this, a, out, inv_sqrt2] {
            const S inv_sqrt2pi = S(1) / std::sqrt(S(2) * S(3.14159265358979323846));
            const auto& x = val(a).array();
            const auto phi = S(0.5) * (S(1) + (x * inv_sqrt2).erf());
            const auto pdf = (S(-0.5) * x.square()).exp() * inv_sqrt2pi;
            acc(a, Mat<S>((grad(out).array() * (phi + x * pdf)).matrix()));
        };
        return out;
    }

    // Row-wise layer normalization with learnable gain/bias (both 1 x D).
    int layer_norm(int a, int gain, int bias, S eps = S(1e-5)) {
        using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
        const Mat<S>& x = val(a);
        const Vec mu = x.rowwise().mean();
        auto xhat = std::make_shared<Mat<S>>(x.array().colwise() - mu.array());
        const Vec var = xhat->array().square().rowwise().mean();
        auto inv = std::make_shared<Vec>((var.array() + eps).rsqrt());
        xhat->array().colwise() *= inv->array();
        Mat<S> y = xhat->array().rowwise() * val(gain).row(0).array();
        y.rowwise() += val(bias).row(0);
        int out = push(std::move(y), needs(a) || needs(gain) || needs(bias));
        if (!needs(out)) return out;
        node(out).back = [this, a, gain, bias, out, xhat, inv] {
            const Mat<S>& g = grad(out);
            if (needs(gain)) acc(gain, (g.cwiseProduct(*xhat)).colwise().sum());
            if (needs(bias)) acc(bias, g.colwise().sum());
            if (!needs(a)) return;
            Mat<S> dxhat = g.array().rowwise() * val(gain).row(0).array();
            const Vec m1 = dxhat.rowwise().mean();
            const Vec m2 = dxhat.cwiseProduct(*xhat).rowwise().mean();
            dxhat.array().colwise() -= m1.array();
            dxhat -= Mat<S>(xhat->array().colwise() * m2.array());
            dxhat.array().colwise() *= inv->array();
            acc(a, dxhat);
        };
        return out;
    }

    /// Multi-head self-attention core on (batch * seq) x dim projections.
    int attention(int q, int k, int v, int batch, int seq, int heads) {
        const Mat<S>& Q = val(q);
        const Eigen::Index dim = Q.cols();
        if (dim % heads != 0) throw std::invalid_argument("attention: dim % heads != 0");
        const Eigen::Index dh = dim / heads;
        const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));

        Mat<S> out_val(Q.rows(), dim);
        auto probs = std::make_shared<std::vector<Mat<S>>>(
            static_cast<size_t>(batch) * static_cast<size_t>(heads));
        const Mat<S>& K = val(k);
        const Mat<S>& V = val(v);

        // Stores P^T per (batch, head): column i holds the attention weights of
        // query token i, so the softmax runs over contiguous columns.
#pragma omp parallel for collapse(2) schedule(static)
        for (int b = 0; b < batch; ++b) {
            for (int h = 0; h < heads; ++h) {
                const Mat<S> Qb = Q.block(b * seq, h * dh, seq, dh);
                const Mat<S> Kb = K.block(b * seq, h * dh, seq, dh);
                const Mat<S> Vb = V.block(b * seq, h * dh, seq, dh);
                Mat<S> pt = Kb * Qb.transpose() * inv_sqrt;
                const Eigen::Matrix<S, 1, Eigen::Dynamic> mx = pt.colwise().maxCoeff();
                pt = (pt.rowwise() - mx).array().exp();
                pt.array().rowwise() /= pt.colwise().sum().array();
                out_val.block(b * seq, h * dh, seq, dh).noalias() = pt.transpose() * Vb;
                (*probs)[static_cast<size_t>(b) * heads + h] = std::move(pt);
            }
        }

        int out = push(std::move(out_val), needs(q) || needs(k) || needs(v));
        if (!needs(out)) return out;
        node(out).back = [this, q, k, v, batch, seq, heads, dh, inv_sqrt, probs, out] {
            const Mat<S>& g = grad(out);
            const Mat<S>& Q = val(q);
            const Mat<S>& K = val(k);
            const Mat<S>& V = val(v);
            if (needs(q)) ensure_grad(q);
            if (needs(k)) ensure_grad(k);
            if (needs(v)) ensure_grad(v);
            // (b, h) pairs touch disjoint blocks of the input gradients.
#pragma omp parallel for collapse(2) schedule(static)
            for (int b = 0; b < batch; ++b) {
                for (int h = 0; h < heads; ++h) {
                    const Mat<S>& Pt = (*probs)[static_cast<size_t>(b) * heads + h];
                    const Mat<S> Gb = g.block(b * seq, h * dh, seq, dh);
                    const Mat<S> Vb = V.block(b * seq, h * dh, seq, dh);
                    if (needs(v))
                        node(v).grad.block(b * seq, h * dh, seq, dh).noalias() += Pt * Gb;
                    if (!needs(q) && !needs(k)) continue;
                    // gPt(j, i) = dL/dP(i, j); softmax backward per column.
                    Mat<S> gPt = Vb * Gb.transpose();
                    const Eigen::Matrix<S, 1, Eigen::Dynamic> dots =
                        gPt.cwiseProduct(Pt).colwise().sum();
                    gPt.rowwise() -= dots;
                    gPt.array() *= Pt.array();
                    gPt *= inv_sqrt;
                    if (needs(q))
                        node(q).grad.block(b * seq, h * dh, seq, dh).noalias() +=
                            gPt.transpose() * K.block(b * seq, h * dh, seq, dh);
                    if (needs(k))
                        node(k).grad.block(b * seq, h * dh, seq, dh).noalias() +=
                            gPt * Q.block(b * seq, h * dh, seq, dh);
                }
            }
        };
        return out;
    }

    /// Builds the early-fusion token sequence [CLS; obs + t_obs + pos;
    /// goal + t_goal + pos] per batch item from per-image patch embeddings.
    int assemble_pair(int obs, int goal, int cls, int t_obs, int t_goal, int pos, int batch) {
        const Eigen::Index P = val(pos).rows(), D = val(pos).cols();
        const Eigen::Index seq = 1 + 2 * P;
        Mat<S> v(batch * seq, D);
        for (int b = 0; b < batch; ++b) {
            v.row(b * seq) = val(cls).row(0);
            v.middleRows(b * seq + 1, P) = val(obs).middleRows(b * P, P) + val(pos);
            v.middleRows(b * seq + 1, P).rowwise() += val(t_obs).row(0);
            v.middleRows(b * seq + 1 + P, P) = val(goal).middleRows(b * P, P) + val(pos);
            v.middleRows(b * seq + 1 + P, P).rowwise() += val(t_goal).row(0);
        }
        int out = push(std::move(v),
                       needs(obs) || needs(goal) || needs(cls) || needs(t_obs) ||
                           needs(t_goal) || needs(pos));
        if (!needs(out)) return out;
        node(out).back = [this, obs, goal, cls, t_obs, t_goal, pos, batch, P, seq, out] {
            const Mat<S>& g = grad(out);
            for (int b = 0; b < batch; ++b) {
                const auto g_obs = g.middleRows(b * seq + 1, P);
                const auto g_goal = g.middleRows(b * seq + 1 + P, P);
                if (needs(cls)) acc(cls, g.row(b * seq));
                if (needs(t_obs)) acc(t_obs, g_obs.colwise().sum());
                if (needs(t_goal)) acc(t_goal, g_goal.colwise().sum());
                if (needs(pos)) acc(pos, g_obs + g_goal);
                if (needs(obs)) {
                    ensure_grad(obs);
                    node(obs).grad.middleRows(b * P, P) += g_obs;
                }
                if (needs(goal)) {
                    ensure_grad(goal);
                    node(goal).grad.middleRows(b * P, P) += g_goal;
                }
            }
        };
        return out;
    }

    /// Single-stream token sequence [CLS; x + type + pos] per batch item.
    int assemble_single(int x, int cls, int type, int pos, int batch) {
        const Eigen::Index P = val(pos).rows(), D = val(pos).cols();
        const Eigen::Index seq = 1 + P;
        Mat<S> v(batch * seq, D);
        for (int b = 0; b < batch; ++b) {
            v.row(b * seq) = val(cls).row(0);
            v.middleRows(b * seq + 1, P) = val(x).middleRows(b * P, P) + val(pos);
            v.middleRows(b * seq + 1, P).rowwise() += val(type).row(0);
        }
        int out = push(std::move(v), needs(x) || needs(cls) || needs(type) || needs(pos));
        if (!needs(out)) return out;
        node(out).back = [this, x, cls, type, pos, batch, P, seq, out] {
            const Mat<S>& g = grad(out);
            for (int b = 0; b < batch; ++b) {
                const auto gx = g.middleRows(b * seq + 1, P);
                if (needs(cls)) acc(cls, g.row(b * seq));
                if (needs(type)) acc(type, gx.colwise().sum());
                if (needs(pos)) acc(pos, gx);
                if (needs(x)) {
                    ensure_grad(x);
                    node(x).grad.middleRows(b * P, P) += gx;
                }
            }
        };
        return out;
    }

    /// Rows first, first + stride, ... (CLS readout across a batch).
    int rows_strided(int a, int first, int stride, int count) {
        const Mat<S>& x = val(a);
        Mat<S> v(count, x.cols());
        for (int i = 0; i < count; ++i) v.row(i) = x.row(first + i * stride);
        int out = push(std::move(v), needs(a));
        if (!needs(out)) return out;
        node(out).back = [this, a, first, stride, count, out] {
            ensure_grad(a);
            for (int i = 0; i < count; ++i)
                node(a).grad.row(first + i * stride) += grad(out).row(i);
        };
        return out;
    }

    int concat_cols(int a, int b) {
        const Mat<S>& A = val(a);
        const Mat<S>& B = val(b);
        if (A.rows() != B.rows()) throw std::invalid_argument("concat_cols: row mismatch");
        Mat<S> v(A.rows(), A.cols() + B.cols());
        v.leftCols(A.cols()) = A;
        v.rightCols(B.cols()) = B;
        int out = push(std::move(v), needs(a) || needs(b));
        if (!needs(out)) return out;
        node(out).back = [this, a, b, out] {
            const Mat<S>& g = grad(out);
            if (needs(a)) acc(a, g.leftCols(val(a).cols()));
            if (needs(b)) acc(b, g.rightCols(val(b).cols()));
        };
        return out;
    }

    /// Row-wise sum of squared differences against a constant target -> (N x 1).
    int sse_rows(int a, Mat<S> target) {
        const Mat<S>& x = val(a);
        if (x.rows() != target.rows() || x.cols() != target.cols())
            throw std::invalid_argument("sse_rows: shape mismatch");
        Mat<S> v = (x - target).rowwise().squaredNorm();
        auto tgt = std::make_shared<Mat<S>>(std::move(target));
        int out = push(std::move(v), needs(a));
        if (!needs(out)) return out;
        node(out).back = [this, a, tgt, out] {
            const Mat<S> d = val(a) - *tgt;
            acc(a, Mat<S>(S(2) * (d.array().colwise() * grad(out).col(0).array())));
        };
        return out;
    }

    int mean_all(int a) {
        const Mat<S>& x = val(a);
        Mat<S> v(1, 1);
        v(0, 0) = x.mean();
        int out = push(std::move(v), needs(a));
        if (!needs(out)) return out;
        node(out).back = [this, a, out] {
            const S g = grad(out)(0, 0) / static_cast<S>(val(a).size());
            acc(a, Mat<S>(Mat<S>::Constant(val(a).rows(), val(a).cols(), g)));
        };
        return out;
    }

    void backward(int loss) {
        if (val(loss).rows() != 1 || val(loss).cols() != 1)
            throw std::logic_error("backward: loss must be a 1x1 node");
        ensure_grad(loss);
        node(loss).grad(0, 0) = S(1);
        for (int i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.back && n.grad.size() > 0) n.back();
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat<S> val;
        Mat<S> grad;
        bool needs = false;
        std::function<void()> back;
    };

    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    bool needs(int id) const { return nodes_[static_cast<size_t>(id)].needs; }

    void ensure_grad(int id) {
        Node& n = node(id);
        if (n.grad.rows() != n.val.rows() || n.grad.cols() != n.val.cols())
            n.grad = Mat<S>::Zero(n.val.rows(), n.val.cols());
    }

    template <class Expr>
    void acc(int id, const Expr& g) {
        if (!needs(id)) return;
        ensure_grad(id);
        node(id).grad += g;
    }

    int push(Mat<S> v, bool needs_grad) {
        nodes_.push_back(Node{std::move(v), {}, needs_grad, nullptr});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
};

/// Adam with bias correction; state is kept per parameter slot.
template <class S>
class Adam {
public:
    explicit Adam(S lr, S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8))
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    /// grads[i] may be zero-sized when a parameter received no gradient.
    void step(std::vector<Mat<S>*> params, const std::vector<const Mat<S>*>& grads) {
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                m_[i] = Mat<S>::Zero(params[i]->rows(), params[i]->cols());
                v_[i] = Mat<S>::Zero(params[i]->rows(), params[i]->cols());
            }
        }
        if (params.size() != m_.size()) throw std::logic_error("Adam: parameter count changed");
        ++t_;
        const S c1 = S(1) - std::pow(b1_, static_cast<S>(t_));
        const S c2 = S(1) - std::pow(b2_, static_cast<S>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            const Mat<S>* g = grads[i];
            if (!g || g->size() == 0) continue;
            m_[i] = b1_ * m_[i] + (S(1) - b1_) * (*g);
            v_[i] = b2_ * v_[i] + (S(1) - b2_) * g->cwiseProduct(*g);
            params[i]->array() -=
                lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
        }
    }

    long steps() const { return t_; }

private:
    S lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<Mat<S>> m_, v_;
};

}  // namespace pignav::nn
