#pragma once

// Convolutional embedding network with hand-written backpropagation.
//
// Stack: for each entry of `conv_channels`, a 3x3 same-padded convolution,
// a rectifier and a 2x2 max-pool (floor); then a dense layer to the embedding.
// All parameters live in one flat array so optimizers and gradient checks can
// treat the network as a vector. Layout per conv layer: weights
// [out][in][ky][kx] followed by biases [out]; then dense weights
// [embedding][features] and dense biases [embedding].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trajmatch/random.hpp"

namespace trajmatch {

struct Architecture {
    int input_size = 128;
    int in_channels = 3;
    std::vector<int> conv_channels{8, 16, 32};
    int embedding_dim = 128;

    static constexpr int kKernel = 3;

    void validate() const {
        if (input_size <= 0 || in_channels <= 0 || embedding_dim <= 0) {
            throw std::invalid_argument("architecture sizes must be positive");
        }
        int s = input_size;
        for (int c : conv_channels) {
            if (c <= 0) throw std::invalid_argument("conv channel count must be positive");
            s /= 2;
            if (s <= 0) throw std::invalid_argument("input too small for the number of pooling stages");
        }
    }
    int final_spatial() const {
        int s = input_size;
        for (std::size_t i = 0; i < conv_channels.size(); ++i) s /= 2;
        return s;
    }
    int flat_features() const {
        const int s = final_spatial();
        const int c = conv_channels.empty() ? in_channels : conv_channels.back();
        return c * s * s;
    }
    std::size_t input_length() const {
        return static_cast<std::size_t>(in_channels) * input_size * input_size;
    }
    friend bool operator==(const Architecture&, const Architecture&) = default;
};

template <typename T>
class Embedder {
public:
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

    struct ConvLayer {
        int in_c = 0;
        int out_c = 0;
        int h = 0;  // input spatial size
        int w = 0;
        std::size_t weight_offset = 0;
        std::size_t bias_offset = 0;
        int pooled_h() const { return h / 2; }
        int pooled_w() const { return w / 2; }
    };

    /// Activations kept by a forward pass for the matching backward pass.
    struct Cache {
        std::vector<Mat> cols;           // im2col of each conv input
        std::vector<Mat> activations;    // post-rectifier, [out_c][h*w]
        std::vector<std::vector<int>> argmax;  // pool winners, index into activations row-major
        Vec features;                    // flattened input of the dense layer
        // Scratch reused across calls.
        std::vector<T> buffer;
        Mat d_pre;
        Mat d_cols;
        Vec d_current;
    };

    Embedder() : Embedder(Architecture{}) {}

    explicit Embedder(Architecture arch) : arch_(std::move(arch)) {
        arch_.validate();
        std::size_t off = 0;
        int c = arch_.in_channels;
        int s = arch_.input_size;
        for (int out : arch_.conv_channels) {
            ConvLayer L;
            L.in_c = c;
            L.out_c = out;
            L.h = L.w = s;
            L.weight_offset = off;
            off += static_cast<std::size_t>(out) * c * 9;
            L.bias_offset = off;
            off += static_cast<std::size_t>(out);
            convs_.push_back(L);
            c = out;
            s /= 2;
        }
        features_ = arch_.flat_features();
        dense_w_offset_ = off;
        off += static_cast<std::size_t>(arch_.embedding_dim) * features_;
        dense_b_offset_ = off;
        off += static_cast<std::size_t>(arch_.embedding_dim);
        params_.assign(off, T(0));
    }

    const Architecture& architecture() const { return arch_; }
    const std::vector<ConvLayer>& conv_layers() const { return convs_; }
    std::size_t dense_weight_offset() const { return dense_w_offset_; }
    std::size_t dense_bias_offset() const { return dense_b_offset_; }
    int feature_count() const { return features_; }
    std::size_t parameter_count() const { return params_.size(); }

    std::span<T> parameters() { return params_; }
    std::span<const T> parameters() const { return params_; }

    /// Uniform fan-in scaling: conv weights U(-sqrt(6/fan_in), +), dense
    /// weights U(-sqrt(3/fan_in), +), biases zero.
    void init_uniform_fan_in(Rng& rng) {
        std::fill(params_.begin(), params_.end(), T(0));
        for (const auto& L : convs_) {
            const double lim = std::sqrt(6.0 / (L.in_c * 9.0));
            const std::size_t n = static_cast<std::size_t>(L.out_c) * L.in_c * 9;
            for (std::size_t i = 0; i < n; ++i) params_[L.weight_offset + i] = static_cast<T>(rng.uniform(-lim, lim));
        }
        const double lim = std::sqrt(3.0 / features_);
        const std::size_t n = static_cast<std::size_t>(arch_.embedding_dim) * features_;
        for (std::size_t i = 0; i < n; ++i) params_[dense_w_offset_ + i] = static_cast<T>(rng.uniform(-lim, lim));
    }

    /// `input` is [channel][row][col] of length architecture().input_length().
    void forward(std::span<const T> input, std::span<T> embedding, Cache* cache = nullptr) const {
        if (input.size() != arch_.input_length()) throw std::invalid_argument("embedder input has the wrong shape");
        if (embedding.size() != static_cast<std::size_t>(arch_.embedding_dim)) {
            throw std::invalid_argument("embedding buffer has the wrong size");
        }
        thread_local Cache scratch;
        Cache& C = cache ? *cache : scratch;
        C.cols.resize(convs_.size());
        C.activations.resize(convs_.size());
        C.argmax.resize(convs_.size());

        std::vector<T>& current = C.buffer;
        current.assign(input.begin(), input.end());
        for (std::size_t li = 0; li < convs_.size(); ++li) {
            const ConvLayer& L = convs_[li];
            im2col(current.data(), L, C.cols[li]);
            Eigen::Map<const Mat> W(params_.data() + L.weight_offset, L.out_c, L.in_c * 9);
            Eigen::Map<const Vec> b(params_.data() + L.bias_offset, L.out_c);
            Mat& act = C.activations[li];
            act.noalias() = W * C.cols[li];
            for (int c = 0; c < L.out_c; ++c) {
                T* row = act.data() + static_cast<std::size_t>(c) * L.h * L.w;
                const T bias = b[c];
                for (int p = 0; p < L.h * L.w; ++p) row[p] = std::max(row[p] + bias, T(0));
            }
            max_pool(act, L, current, C.argmax[li]);
        }
        C.features = Eigen::Map<const Vec>(current.data(), static_cast<Eigen::Index>(current.size()));

        Eigen::Map<const Mat> Wd(params_.data() + dense_w_offset_, arch_.embedding_dim, features_);
        Eigen::Map<const Vec> bd(params_.data() + dense_b_offset_, arch_.embedding_dim);
        Eigen::Map<Vec> out(embedding.data(), arch_.embedding_dim);
        out.noalias() = Wd * C.features;
        out += bd;
    }

    std::vector<T> embed(std::span<const T> input) const {
        std::vector<T> e(static_cast<std::size_t>(arch_.embedding_dim));
        forward(input, e);
        return e;
    }

    /// Adds d(loss)/d(parameters) into `grad` given d(loss)/d(embedding).
    void backward(Cache& C, std::span<const T> d_embedding, std::span<T> grad) const {
        if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer has the wrong size");
        Eigen::Map<const Vec> de(d_embedding.data(), arch_.embedding_dim);
        Eigen::Map<Mat> dWd(grad.data() + dense_w_offset_, arch_.embedding_dim, features_);
        Eigen::Map<Vec> dbd(grad.data() + dense_b_offset_, arch_.embedding_dim);
        dWd.noalias() += de * C.features.transpose();
        dbd += de;

        Eigen::Map<const Mat> Wd(params_.data() + dense_w_offset_, arch_.embedding_dim, features_);
        Vec& d_current = C.d_current;
        d_current.noalias() = Wd.transpose() * de;  // gradient w.r.t. pooled output of the last conv stage

        for (std::size_t li = convs_.size(); li-- > 0;) {
            const ConvLayer& L = convs_[li];
            const Mat& act = C.activations[li];
            const int hw = L.h * L.w;
            Mat& d_pre = C.d_pre;
            d_pre.setZero(L.out_c, hw);
            const auto& winners = C.argmax[li];
            for (std::size_t i = 0; i < winners.size(); ++i) {
                const int idx = winners[i];
                const int c = idx / hw;
                const int p = idx % hw;
                if (act(c, p) > T(0)) d_pre(c, p) += d_current[static_cast<Eigen::Index>(i)];
            }
            Eigen::Map<Mat> dW(grad.data() + L.weight_offset, L.out_c, L.in_c * 9);
            Eigen::Map<Vec> db(grad.data() + L.bias_offset, L.out_c);
            dW.noalias() += d_pre * C.cols[li].transpose();
            db += d_pre.rowwise().sum();
            if (li == 0) break;
            Eigen::Map<const Mat> W(params_.data() + L.weight_offset, L.out_c, L.in_c * 9);
            C.d_cols.noalias() = W.transpose() * d_pre;
            col2im(C.d_cols, L, d_current);
        }
    }

private:
    static void im2col(const T* in, const ConvLayer& L, Mat& cols) {
        const int H = L.h, W = L.w;
        cols.resize(L.in_c * 9, H * W);
        for (int c = 0; c < L.in_c; ++c) {
            const T* plane = in + static_cast<std::size_t>(c) * H * W;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    T* row = cols.data() + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * H * W;
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + ky - 1;
                        T* dst = row + static_cast<std::size_t>(y) * W;
                        if (sy < 0 || sy >= H) {
                            std::fill(dst, dst + W, T(0));
                            continue;
                        }
                        const T* src = plane + static_cast<std::size_t>(sy) * W;
                        const int x_lo = kx == 0 ? 1 : 0;
                        const int x_hi = kx == 2 ? W - 1 : W;
                        if (x_lo == 1) dst[0] = T(0);
                        if (x_hi == W - 1) dst[W - 1] = T(0);
                        for (int x = x_lo; x < x_hi; ++x) dst[x] = src[x + kx - 1];
                    }
                }
            }
        }
    }

    static void col2im(const Mat& d_cols, const ConvLayer& L, Vec& d_in) {
        const int H = L.h, W = L.w;
        d_in.setZero(static_cast<Eigen::Index>(L.in_c) * H * W);
        for (int c = 0; c < L.in_c; ++c) {
            T* plane = d_in.data() + static_cast<std::size_t>(c) * H * W;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const T* row = d_cols.data() + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * H * W;
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + ky - 1;
                        if (sy < 0 || sy >= H) continue;
                        const T* src = row + static_cast<std::size_t>(y) * W;
                        T* dst = plane + static_cast<std::size_t>(sy) * W;
                        // dst[x + kx - 1] += src[x] over the valid x range
                        const int x_lo = kx == 0 ? 1 : 0;
                        const int x_hi = kx == 2 ? W - 1 : W;
                        for (int x = x_lo; x < x_hi; ++x) dst[x + kx - 1] += src[x];
                    }
                }
            }
        }
    }

    static void max_pool(const Mat& act, const ConvLayer& L, std::vector<T>& out, std::vector<int>& argmax) {
        const int Ho = L.pooled_h(), Wo = L.pooled_w();
        const int hw = L.h * L.w;
        out.assign(static_cast<std::size_t>(L.out_c) * Ho * Wo, T(0));
        argmax.assign(out.size(), 0);
        for (int c = 0; c < L.out_c; ++c) {
            const T* a = act.data() + static_cast<std::size_t>(c) * hw;
            for (int oy = 0; oy < Ho; ++oy) {
                for (int ox = 0; ox < Wo; ++ox) {
                    int best = (2 * oy) * L.w + 2 * ox;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const int p = (2 * oy + dy) * L.w + 2 * ox + dx;
                            if (a[p] > a[best]) best = p;
                        }
                    }
                    const std::size_t o = (static_cast<std::size_t>(c) * Ho + oy) * Wo + ox;
                    out[o] = a[best];
                    argmax[o] = c * hw + best;
                }
            }
        }
    }

    Architecture arch_;
    std::vector<ConvLayer> convs_;
    int features_ = 0;
    std::size_t dense_w_offset_ = 0;
    std::size_t dense_b_offset_ = 0;
    std::vector<T> params_;
};

}  // namespace trajmatch
