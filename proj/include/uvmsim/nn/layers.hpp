#pragma once

#include <random>
#include <vector>

#include "uvmsim/nn/autograd.hpp"

namespace uvmsim::nn {

// Deterministic uniform in [0,1) straight from engine bits; keeps
// initialization identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Mat xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    return m;
}

inline Mat small_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                         double limit = 0.05) {
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    return m;
}

struct Linear {
    Var weight;  // in x out
    Var bias;    // 1 x out

    Linear() = default;
    Linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng)
        : weight(parameter(xavier_uniform(in, out, rng))), bias(parameter(Mat::Zero(1, out))) {}

    Var operator()(const Var& x) const { return add_rowwise(matmul(x, weight), bias); }

    void collect(std::vector<Var>& out) const {
        out.push_back(weight);
        out.push_back(bias);
    }
};

struct LayerNorm {
    Var gamma;
    Var beta;

    LayerNorm() = default;
    explicit LayerNorm(Eigen::Index dim)
        : gamma(parameter(Mat::Ones(1, dim))), beta(parameter(Mat::Zero(1, dim))) {}

    Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }

    void collect(std::vector<Var>& out) const {
        out.push_back(gamma);
        out.push_back(beta);
    }
};

struct MultiHeadAttention {
    Linear wq, wk, wv, wo;
    unsigned heads = 1;
    Eigen::Index head_dim = 0;

    MultiHeadAttention() = default;
    MultiHeadAttention(Eigen::Index d_model, unsigned num_heads, std::mt19937_64& rng)
        : wq(d_model, d_model, rng),
          wk(d_model, d_model, rng),
          wv(d_model, d_model, rng),
          wo(d_model, d_model, rng),
          heads(num_heads),
          head_dim(d_model / num_heads) {
        if (d_model % num_heads != 0) throw ConfigError("d_model must divide by heads");
    }

    Var operator()(const Var& x) const {
        const Var q = wq(x);
        const Var k = wk(x);
        const Var v = wv(x);
        Var merged;
        for (unsigned h = 0; h < heads; ++h) {
            const Eigen::Index off = static_cast<Eigen::Index>(h) * head_dim;
            const Var qh = slice_cols(q, off, head_dim);
            const Var kh = slice_cols(k, off, head_dim);
            const Var vh = slice_cols(v, off, head_dim);
            const Var scores =
                scale(matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(head_dim)));
            const Var attended = matmul(softmax_rows(scores), vh);
            merged = h == 0 ? attended : concat_cols(merged, attended);
        }
        return wo(merged);
    }

    void collect(std::vector<Var>& out) const {
        wq.collect(out);
        wk.collect(out);
        wv.collect(out);
        wo.collect(out);
    }
};

struct FeedForward {
    Linear up, down;

    FeedForward() = default;
    FeedForward(Eigen::Index d_model, Eigen::Index hidden, std::mt19937_64& rng)
        : up(d_model, hidden, rng), down(hidden, d_model, rng) {}

    Var operator()(const Var& x) const { return down(gelu(up(x))); }

    void collect(std::vector<Var>& out) const {
        up.collect(out);
        down.collect(out);
    }
};

// Post-norm encoder layer: x -> LN(x + MHA(x)) -> LN(. + FFN(.)).
struct EncoderLayer {
    MultiHeadAttention attention;
    FeedForward feed_forward;
    LayerNorm norm1, norm2;

    EncoderLayer() = default;
    EncoderLayer(Eigen::Index d_model, unsigned heads, Eigen::Index hidden, std::mt19937_64& rng)
        : attention(d_model, heads, rng),
          feed_forward(d_model, hidden, rng),
          norm1(d_model),
          norm2(d_model) {}

    Var operator()(const Var& x) const {
        const Var h = norm1(add(x, attention(x)));
        return norm2(add(h, feed_forward(h)));
    }

    void collect(std::vector<Var>& out) const {
        attention.collect(out);
        feed_forward.collect(out);
        norm1.collect(out);
        norm2.collect(out);
    }
};

struct TransformerEncoder {
    std::vector<EncoderLayer> layers;

    TransformerEncoder() = default;
    TransformerEncoder(unsigned depth, Eigen::Index d_model, unsigned heads, Eigen::Index hidden,
                       std::mt19937_64& rng) {
        for (unsigned i = 0; i < depth; ++i) layers.emplace_back(d_model, heads, hidden, rng);
    }

    Var operator()(Var x) const {
        for (const auto& layer : layers) x = layer(x);
        return x;
    }

    void collect(std::vector<Var>& out) const {
        for (const auto& layer : layers) layer.collect(out);
    }
};

struct Embedding {
    Var table;  // buckets x dim

    Embedding() = default;
    Embedding(Eigen::Index buckets, Eigen::Index dim, std::mt19937_64& rng)
        : table(parameter(small_uniform(buckets, dim, rng))) {}

    Var operator()(std::vector<Eigen::Index> indices) const {
        return gather_rows(table, std::move(indices));
    }

    void collect(std::vector<Var>& out) const { out.push_back(table); }
};

}  // namespace uvmsim::nn
