#include "agan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace agan {

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

std::int64_t shape_product(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + shape_str(shape));
    }
    data.assign(static_cast<std::size_t>(shape_product(shape)), 0.0);
}

Tensor::Tensor(std::vector<int> shp, std::vector<double> values)
    : shape(std::move(shp)), data(std::move(values)) {
    if (shape_product(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::full(std::vector<int> shp, double value) {
    Tensor t(std::move(shp));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

Tensor Tensor::checked(std::vector<int> shp, std::vector<double> values) {
    Tensor t(std::move(shp), std::move(values));
    t.require_finite("tensor");
    return t;
}

void Tensor::require_finite(const std::string& what) const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw NumericError(what + ": non-finite value encountered");
        }
    }
}

Tensor& Gradient::at(const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("gradient entry missing: " + name);
    return it->second;
}

const Tensor& Gradient::at(const std::string& name) const {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("gradient entry missing: " + name);
    return it->second;
}

void ConvSpec::validate() const {
    if (kernel_h < 1 || kernel_w < 1) {
        throw ShapeError("conv kernel must be >= 1, got " + std::to_string(kernel_h) + "x" +
                         std::to_string(kernel_w));
    }
    if (stride_h < 1 || stride_w < 1) {
        throw ShapeError("conv stride must be >= 1, got " + std::to_string(stride_h) + "x" +
                         std::to_string(stride_w));
    }
    if (pad_h < 0 || pad_w < 0) {
        throw ShapeError("conv padding must be >= 0, got " + std::to_string(pad_h) + "x" +
                         std::to_string(pad_w));
    }
    if (in_channels < 1 || out_channels < 1) {
        throw ShapeError("conv channels must be >= 1, got in=" + std::to_string(in_channels) +
                         " out=" + std::to_string(out_channels));
    }
}

namespace {

void check_conv_args(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
                     const Tensor* bias) {
    spec.validate();
    if (input.rank() != 3 || input.dim(0) != spec.in_channels) {
        throw ShapeError("conv2d input shape " + shape_str(input.shape) + " does not match " +
                         std::to_string(spec.in_channels) + " input channels");
    }
    const std::vector<int> want{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w};
    if (weight.shape != want) {
        throw ShapeError("conv2d weight shape " + shape_str(weight.shape) + ", expected " +
                         shape_str(want));
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != spec.out_channels)) {
        throw ShapeError("conv2d bias shape " + shape_str(bias->shape) + ", expected (" +
                         std::to_string(spec.out_channels) + ")");
    }
    if (spec.out_h(input.dim(1)) < 1 || spec.out_w(input.dim(2)) < 1) {
        throw ShapeError("conv2d output would be empty for input " + shape_str(input.shape));
    }
}

// Valid output range [lo, hi) on one axis for a fixed kernel offset d:
// positions o where o*stride + d - pad lands inside [0, in).
inline void out_range(int in, int out, int stride, int pad, int d, int& lo, int& hi) {
    int num = pad - d;
    lo = num <= 0 ? 0 : (num + stride - 1) / stride;
    int top = in - 1 - d + pad;
    int last = top < 0 ? -1 : top / stride;
    hi = std::min(out - 1, last) + 1;
    if (hi < lo) hi = lo;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
              const Tensor& bias) {
    check_conv_args(input, spec, weight, &bias);
    const int H = input.dim(1), W = input.dim(2);
    const int OH = spec.out_h(H), OW = spec.out_w(W);
    Tensor out({spec.out_channels, OH, OW});

    for (int co = 0; co < spec.out_channels; ++co) {
        double* ybase = &out.data[static_cast<std::size_t>(co) * OH * OW];
        std::fill(ybase, ybase + static_cast<std::size_t>(OH) * OW, bias.data[co]);
        for (int ci = 0; ci < spec.in_channels; ++ci) {
            const double* xbase = &input.data[static_cast<std::size_t>(ci) * H * W];
            const double* wbase =
                &weight.data[((static_cast<std::size_t>(co) * spec.in_channels + ci) *
                              spec.kernel_h) *
                             spec.kernel_w];
            for (int dh = 0; dh < spec.kernel_h; ++dh) {
                int oh_lo, oh_hi;
                out_range(H, OH, spec.stride_h, spec.pad_h, dh, oh_lo, oh_hi);
                for (int dw = 0; dw < spec.kernel_w; ++dw) {
                    const double wv = wbase[dh * spec.kernel_w + dw];
                    int ow_lo, ow_hi;
                    out_range(W, OW, spec.stride_w, spec.pad_w, dw, ow_lo, ow_hi);
                    const int shift = dw - spec.pad_w;
                    for (int oh = oh_lo; oh < oh_hi; ++oh) {
                        const int ih = oh * spec.stride_h + dh - spec.pad_h;
                        double* yrow = ybase + static_cast<std::size_t>(oh) * OW;
                        const double* xrow = xbase + static_cast<std::size_t>(ih) * W;
                        if (spec.stride_w == 1) {
                            for (int ow = ow_lo; ow < ow_hi; ++ow)
                                yrow[ow] += wv * xrow[ow + shift];
                        } else {
                            for (int ow = ow_lo; ow < ow_hi; ++ow)
                                yrow[ow] += wv * xrow[ow * spec.stride_w + shift];
                        }
                    }
                }
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
                          const Tensor& upstream) {
    check_conv_args(input, spec, weight, nullptr);
    const int H = input.dim(1), W = input.dim(2);
    const int OH = spec.out_h(H), OW = spec.out_w(W);
    if (upstream.shape != std::vector<int>{spec.out_channels, OH, OW}) {
        throw ShapeError("conv2d_backward upstream shape " + shape_str(upstream.shape) +
                         ", expected (" + std::to_string(spec.out_channels) + "," +
                         std::to_string(OH) + "," + std::to_string(OW) + ")");
    }

    ConvGrads g;
    g.input = Tensor(input.shape);
    g.weight = Tensor(weight.shape);
    g.bias = Tensor({spec.out_channels});

    for (int co = 0; co < spec.out_channels; ++co) {
        const double* ubase = &upstream.data[static_cast<std::size_t>(co) * OH * OW];
        double acc = 0.0;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(OH) * OW; ++i) acc += ubase[i];
        g.bias.data[co] = acc;

        for (int ci = 0; ci < spec.in_channels; ++ci) {
            const double* xbase = &input.data[static_cast<std::size_t>(ci) * H * W];
            double* gxbase = &g.input.data[static_cast<std::size_t>(ci) * H * W];
            const std::size_t woff =
                ((static_cast<std::size_t>(co) * spec.in_channels + ci) * spec.kernel_h) *
                spec.kernel_w;
            for (int dh = 0; dh < spec.kernel_h; ++dh) {
                int oh_lo, oh_hi;
                out_range(H, OH, spec.stride_h, spec.pad_h, dh, oh_lo, oh_hi);
                for (int dw = 0; dw < spec.kernel_w; ++dw) {
                    int ow_lo, ow_hi;
                    out_range(W, OW, spec.stride_w, spec.pad_w, dw, ow_lo, ow_hi);
                    const double wv = weight.data[woff + dh * spec.kernel_w + dw];
                    const int shift = dw - spec.pad_w;
                    double wg = 0.0;
                    for (int oh = oh_lo; oh < oh_hi; ++oh) {
                        const int ih = oh * spec.stride_h + dh - spec.pad_h;
                        const double* urow = ubase + static_cast<std::size_t>(oh) * OW;
                        const double* xrow = xbase + static_cast<std::size_t>(ih) * W;
                        double* gxrow = gxbase + static_cast<std::size_t>(ih) * W;
                        if (spec.stride_w == 1) {
                            for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                wg += urow[ow] * xrow[ow + shift];
                                gxrow[ow + shift] += wv * urow[ow];
                            }
                        } else {
                            for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                const int iw = ow * spec.stride_w + shift;
                                wg += urow[ow] * xrow[iw];
                                gxrow[iw] += wv * urow[ow];
                            }
                        }
                    }
                    g.weight.data[woff + dh * spec.kernel_w + dw] = wg;
                }
            }
        }
    }
    return g;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& upstream) {
    if (!x.same_shape(upstream)) {
        throw ShapeError("relu_backward shape mismatch " + shape_str(x.shape) + " vs " +
                         shape_str(upstream.shape));
    }
    Tensor g(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        g.data[i] = x.data[i] > 0.0 ? upstream.data[i] : 0.0;
    return g;
}

Tensor sigmoid(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double v = x.data[i];
        if (v >= 0.0) {
            y.data[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            y.data[i] = e / (1.0 + e);
        }
    }
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& upstream) {
    if (!y.same_shape(upstream)) {
        throw ShapeError("sigmoid_backward shape mismatch " + shape_str(y.shape) + " vs " +
                         shape_str(upstream.shape));
    }
    Tensor g(y.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i)
        g.data[i] = upstream.data[i] * y.data[i] * (1.0 - y.data[i]);
    return g;
}

Tensor pool_time(const Tensor& x, PoolMode mode, bool full_extent) {
    if (x.rank() != 3) throw ShapeError("pool_time expects rank-3 input, got " + shape_str(x.shape));
    const int C = x.dim(0), T = x.dim(1), W = x.dim(2);
    if (T < 1) throw ShapeError("pool_time: empty T axis");
    const int window = full_extent ? T : 2;
    const int OT = full_extent ? 1 : T / 2;
    if (OT < 1) throw ShapeError("pool_time: T=" + std::to_string(T) + " too short for window 2");
    Tensor out({C, OT, W});
    for (int c = 0; c < C; ++c) {
        for (int ot = 0; ot < OT; ++ot) {
            for (int w = 0; w < W; ++w) {
                const int t0 = ot * window;
                if (mode == PoolMode::Max) {
                    double best = x.at(c, t0, w);
                    for (int t = t0 + 1; t < t0 + window; ++t)
                        best = std::max(best, x.at(c, t, w));
                    out.at(c, ot, w) = best;
                } else {
                    double acc = 0.0;
                    for (int t = t0; t < t0 + window; ++t) acc += x.at(c, t, w);
                    out.at(c, ot, w) = acc / window;
                }
            }
        }
    }
    return out;
}

Tensor pool_time_backward(const Tensor& x, PoolMode mode, const Tensor& upstream,
                          bool full_extent) {
    const int C = x.dim(0), T = x.dim(1), W = x.dim(2);
    const int window = full_extent ? T : 2;
    const int OT = full_extent ? 1 : T / 2;
    if (upstream.shape != std::vector<int>{C, OT, W}) {
        throw ShapeError("pool_time_backward upstream shape " + shape_str(upstream.shape));
    }
    Tensor g(x.shape);
    for (int c = 0; c < C; ++c) {
        for (int ot = 0; ot < OT; ++ot) {
            for (int w = 0; w < W; ++w) {
                const int t0 = ot * window;
                const double u = upstream.at(c, ot, w);
                if (mode == PoolMode::Max) {
                    int arg = t0;  // first argmax wins ties
                    double best = x.at(c, t0, w);
                    for (int t = t0 + 1; t < t0 + window; ++t) {
                        if (x.at(c, t, w) > best) {
                            best = x.at(c, t, w);
                            arg = t;
                        }
                    }
                    g.at(c, arg, w) += u;
                } else {
                    const double share = u / window;
                    for (int t = t0; t < t0 + window; ++t) g.at(c, t, w) += share;
                }
            }
        }
    }
    return g;
}

Tensor upsample_time(const Tensor& x, int factor) {
    if (factor < 1) throw ShapeError("upsample_time factor must be >= 1");
    if (x.rank() != 3) throw ShapeError("upsample_time expects rank-3 input");
    const int C = x.dim(0), T = x.dim(1), W = x.dim(2);
    Tensor out({C, T * factor, W});
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < T; ++t)
            for (int r = 0; r < factor; ++r)
                for (int w = 0; w < W; ++w) out.at(c, t * factor + r, w) = x.at(c, t, w);
    return out;
}

Tensor upsample_time_backward(const Tensor& upstream, int factor) {
    const int C = upstream.dim(0), OT = upstream.dim(1), W = upstream.dim(2);
    if (OT % factor != 0) throw ShapeError("upsample_time_backward: T not divisible by factor");
    Tensor g({C, OT / factor, W});
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < OT / factor; ++t)
            for (int r = 0; r < factor; ++r)
                for (int w = 0; w < W; ++w) g.at(c, t, w) += upstream.at(c, t * factor + r, w);
    return g;
}

Tensor residual_modulate(const Tensor& f, const Tensor& m) {
    if (!f.same_shape(m)) {
        throw ShapeError("residual_modulate shape mismatch " + shape_str(f.shape) + " vs " +
                         shape_str(m.shape));
    }
    Tensor out(f.shape);
    for (std::size_t i = 0; i < f.data.size(); ++i)
        out.data[i] = f.data[i] * (1.0 + m.data[i]);
    return out;
}

void residual_modulate_backward(const Tensor& f, const Tensor& m, const Tensor& upstream,
                                Tensor& grad_f, Tensor& grad_m) {
    grad_f = Tensor(f.shape);
    grad_m = Tensor(m.shape);
    for (std::size_t i = 0; i < f.data.size(); ++i) {
        grad_f.data[i] = upstream.data[i] * (1.0 + m.data[i]);
        grad_m.data[i] = upstream.data[i] * f.data[i];
    }
}

Tensor scale_channels_residual(const Tensor& f, const Tensor& w) {
    const int C = f.dim(0);
    if (w.size() != C) {
        throw ShapeError("scale_channels_residual: " + std::to_string(C) + " channels but " +
                         std::to_string(w.size()) + " weights");
    }
    Tensor out(f.shape);
    const std::size_t plane = f.data.size() / static_cast<std::size_t>(C);
    for (int c = 0; c < C; ++c) {
        const double s = 1.0 + w.data[c];
        const std::size_t off = c * plane;
        for (std::size_t i = 0; i < plane; ++i) out.data[off + i] = f.data[off + i] * s;
    }
    return out;
}

void scale_channels_residual_backward(const Tensor& f, const Tensor& w, const Tensor& upstream,
                                      Tensor& grad_f, Tensor& grad_w) {
    const int C = f.dim(0);
    grad_f = Tensor(f.shape);
    grad_w = Tensor(w.shape);
    const std::size_t plane = f.data.size() / static_cast<std::size_t>(C);
    for (int c = 0; c < C; ++c) {
        const double s = 1.0 + w.data[c];
        const std::size_t off = c * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            grad_f.data[off + i] = upstream.data[off + i] * s;
            acc += upstream.data[off + i] * f.data[off + i];
        }
        grad_w.data[c] = acc;
    }
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
        throw ShapeError("concat_channels shape mismatch " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

void concat_channels_backward(const Tensor& upstream, int channels_a, Tensor& grad_a,
                              Tensor& grad_b) {
    const int C = upstream.dim(0), T = upstream.dim(1), W = upstream.dim(2);
    grad_a = Tensor({channels_a, T, W});
    grad_b = Tensor({C - channels_a, T, W});
    std::copy(upstream.data.begin(), upstream.data.begin() + grad_a.data.size(),
              grad_a.data.begin());
    std::copy(upstream.data.begin() + grad_a.data.size(), upstream.data.end(),
              grad_b.data.begin());
}

Tensor mean_width(const Tensor& x) {
    const int C = x.dim(0), T = x.dim(1), W = x.dim(2);
    Tensor out({C, T, 1});
    for (int c = 0; c < C; ++c) {
        for (int t = 0; t < T; ++t) {
            double acc = 0.0;
            for (int w = 0; w < W; ++w) acc += x.at(c, t, w);
            out.at(c, t, 0) = acc / W;
        }
    }
    return out;
}

Tensor mean_width_backward(const Tensor& upstream, int width) {
    const int C = upstream.dim(0), T = upstream.dim(1);
    Tensor g({C, T, width});
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < T; ++t) {
            const double share = upstream.at(c, t, 0) / width;
            for (int w = 0; w < width; ++w) g.at(c, t, w) = share;
        }
    return g;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        y.data[i] = std::min(hi, std::max(lo, x.data[i]));
    return y;
}

}  // namespace agan
