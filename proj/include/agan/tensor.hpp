#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agan/errors.hpp"

namespace agan {

/// Dense row-major double tensor. Feature maps are laid out channels-first
/// as (C, T, K): channel, frame, joint.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shp);
    Tensor(std::vector<int> shp, std::vector<double> values);

    static Tensor zeros(std::vector<int> shp) { return Tensor(std::move(shp)); }
    static Tensor full(std::vector<int> shp, double value);
    /// Construction with invariant checks: shape/data length agreement and
    /// rejection of non-finite values.
    static Tensor checked(std::vector<int> shp, std::vector<double> values);

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    // 3-d accessors for (C, H, W) maps.
    double& at(int c, int h, int w) {
        return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
    }
    double at(int c, int h, int w) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
    }

    void require_finite(const std::string& what) const;
};

std::string shape_str(const std::vector<int>& shape);
std::int64_t shape_product(const std::vector<int>& shape);

/// Named gradients, one entry per parameter, shapes matching the parameters.
struct Gradient {
    std::map<std::string, Tensor> by_name;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
};

/// 2-d convolution geometry. kernel_h/stride_h/pad_h act on the frame (T)
/// axis, kernel_w/stride_w/pad_w on the joint (K) axis.
struct ConvSpec {
    int kernel_h = 1;
    int kernel_w = 1;
    int stride_h = 1;
    int stride_w = 1;
    int pad_h = 0;
    int pad_w = 0;
    int in_channels = 1;
    int out_channels = 1;

    void validate() const;
    int out_h(int in_h) const { return (in_h + 2 * pad_h - kernel_h) / stride_h + 1; }
    int out_w(int in_w) const { return (in_w + 2 * pad_w - kernel_w) / stride_w + 1; }
};

struct ConvGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

/// Cross-correlation with zero padding. input (C_in,H,W), weight
/// (C_out,C_in,kh,kw), bias (C_out) -> (C_out,H',W').
Tensor conv2d(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
              const Tensor& bias);
ConvGrads conv2d_backward(const Tensor& input, const ConvSpec& spec,
                          const Tensor& weight, const Tensor& upstream);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& upstream);

Tensor sigmoid(const Tensor& x);
/// Backward from the forward *output* y: dy/dx = y(1-y).
Tensor sigmoid_backward(const Tensor& y, const Tensor& upstream);

enum class PoolMode { Max, Avg };

/// Pooling along the T axis of a (C,T,W) tensor. full_extent collapses T to
/// length 1; otherwise pools non-overlapping pairs (window 2, stride 2).
Tensor pool_time(const Tensor& x, PoolMode mode, bool full_extent = true);
/// Max routes gradient to the first (lowest-index) argmax; avg spreads it
/// uniformly over the pooled extent.
Tensor pool_time_backward(const Tensor& x, PoolMode mode, const Tensor& upstream,
                          bool full_extent = true);

/// Nearest-neighbour repetition along T: (C,T,W) -> (C,factor*T,W).
Tensor upsample_time(const Tensor& x, int factor);
Tensor upsample_time_backward(const Tensor& upstream, int factor);

/// Residual soft-mask modulation out = f * (1 + m), elementwise.
Tensor residual_modulate(const Tensor& f, const Tensor& m);
void residual_modulate_backward(const Tensor& f, const Tensor& m,
                                const Tensor& upstream, Tensor& grad_f,
                                Tensor& grad_m);

/// Per-channel residual scaling out[c,t,k] = f[c,t,k] * (1 + w[c]); w holds
/// one value per channel (trailing dims of size 1 allowed).
Tensor scale_channels_residual(const Tensor& f, const Tensor& w);
void scale_channels_residual_backward(const Tensor& f, const Tensor& w,
                                      const Tensor& upstream, Tensor& grad_f,
                                      Tensor& grad_w);

/// Channel concatenation of two (C,T,W) maps with equal T,W.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void concat_channels_backward(const Tensor& upstream, int channels_a,
                              Tensor& grad_a, Tensor& grad_b);

/// Mean over the trailing (joint) axis: (C,T,W) -> (C,T,1).
Tensor mean_width(const Tensor& x);
Tensor mean_width_backward(const Tensor& upstream, int width);

/// Clamp into [lo, hi]. Backward is treated as identity by callers; the
/// clamp only guards score range at the model head.
Tensor clamp(const Tensor& x, double lo, double hi);

}  // namespace agan
