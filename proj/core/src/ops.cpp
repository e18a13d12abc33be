// Copyright 2026 The dwarf-sceneflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dwarf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "gemm.hpp"

namespace dwarf {

namespace {

struct Patch {
    int64_t channels, height, width;  // image
    int64_t kernel;
    ConvGeometry geom;
    int64_t out_h, out_w;
    int64_t rows() const { return channels * kernel * kernel; }
    int64_t cols() const { return out_h * out_w; }
};

template <typename T>
void im2col(const T* image, const Patch& p, T* col) {
    const int64_t s = p.geom.stride, d = p.geom.dilation, pad = p.geom.padding;
    for (int64_t c = 0; c < p.channels; ++c) {
        const T* plane = image + c * p.height * p.width;
        for (int64_t ky = 0; ky < p.kernel; ++ky) {
            for (int64_t kx = 0; kx < p.kernel; ++kx) {
                T* row = col + ((c * p.kernel + ky) * p.kernel + kx) * p.cols();
                for (int64_t oy = 0; oy < p.out_h; ++oy) {
                    const int64_t iy = oy * s - pad + ky * d;
                    T* dst = row + oy * p.out_w;
                    if (iy < 0 || iy >= p.height) {
                        std::fill(dst, dst + p.out_w, T(0));
                        continue;
                    }
                    const T* src = plane + iy * p.width;
                    for (int64_t ox = 0; ox < p.out_w; ++ox) {
                        const int64_t ix = ox * s - pad + kx * d;
                        dst[ox] = (ix >= 0 && ix < p.width) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const T* col, const Patch& p, T* image) {
    const int64_t s = p.geom.stride, d = p.geom.dilation, pad = p.geom.padding;
    for (int64_t c = 0; c < p.channels; ++c) {
        T* plane = image + c * p.height * p.width;
        for (int64_t ky = 0; ky < p.kernel; ++ky) {
            for (int64_t kx = 0; kx < p.kernel; ++kx) {
                const T* row = col + ((c * p.kernel + ky) * p.kernel + kx) * p.cols();
                for (int64_t oy = 0; oy < p.out_h; ++oy) {
                    const int64_t iy = oy * s - pad + ky * d;
                    if (iy < 0 || iy >= p.height) continue;
                    T* dst = plane + iy * p.width;
                    const T* src = row + oy * p.out_w;
                    for (int64_t ox = 0; ox < p.out_w; ++ox) {
                        const int64_t ix = ox * s - pad + kx * d;
                        if (ix >= 0 && ix < p.width) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    require(a.shape() == b.shape(),
            std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

template <typename T>
void accumulate(const Tensor<T>& t, const std::vector<T>& g) {
    if (!t.requires_grad()) return;
    auto& dst = t.impl()->grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

template <typename T>
Tensor<T> scalar_result(T value, const char* name, std::vector<Tensor<T>> inputs,
                        std::function<void(const TensorImpl<T>&)> fn) {
    return make_result<T>({1, 1, 1, 1}, {value}, name, std::move(inputs), std::move(fn));
}


// Stride-1 convolution without a column buffer. The input is zero-padded
// once; with the padded row pitch wp, tap (ky, kx) is a contiguous window of
// the padded planes starting at ky*d*wp + kx*d, so each tap is one GEMM into a
// "wide" output of out_h rows of pitch wp. Columns x >= out_w of the wide
// output are discarded (forward) or zeroed (backward).
struct ShiftPlan {
    int64_t channels, height, width, pad;
    int64_t hp, wp, out_h, out_w, wide;
    std::vector<int64_t> offsets;

    ShiftPlan(int64_t c, int64_t h, int64_t w, int64_t k, int64_t d, int64_t p)
        : channels(c), height(h), width(w), pad(p), hp(h + 2 * p), wp(w + 2 * p) {
        out_h = hp - d * (k - 1);
        out_w = wp - d * (k - 1);
        wide = (out_h - 1) * wp + out_w;
        for (int64_t ky = 0; ky < k; ++ky)
            for (int64_t kx = 0; kx < k; ++kx) offsets.push_back(ky * d * wp + kx * d);
    }
    int64_t plane() const { return hp * wp; }
};

template <typename T>
void pad_planes(const T* x, const ShiftPlan& sp, T* xp) {
    std::fill(xp, xp + sp.channels * sp.plane(), T(0));
    for (int64_t c = 0; c < sp.channels; ++c)
        for (int64_t y = 0; y < sp.height; ++y)
            std::copy_n(x + (c * sp.height + y) * sp.width, sp.width,
                        xp + c * sp.plane() + (y + sp.pad) * sp.wp + sp.pad);
}

// (C_out, C_in, k, k) -> k*k blocks of (C_out, C_in).
template <typename T>
std::vector<T> taps_major(const T* w, int64_t cout, int64_t cin, int64_t taps) {
    std::vector<T> out(static_cast<size_t>(cout * cin * taps));
    for (int64_t co = 0; co < cout; ++co)
        for (int64_t ci = 0; ci < cin; ++ci)
            for (int64_t t = 0; t < taps; ++t) out[(t * cout + co) * cin + ci] = w[(co * cin + ci) * taps + t];
    return out;
}

template <typename T>
Tensor<T> conv2d_shifted(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, ConvGeometry geom) {
    const Shape& is = input.shape();
    const Shape& ws = weight.shape();
    const auto sp = std::make_shared<ShiftPlan>(is.c, is.h, is.w, ws.h, geom.dilation, geom.padding);
    const Shape os{is.n, ws.n, sp->out_h, sp->out_w};
    const int64_t taps = ws.h * ws.w;
    const int m = static_cast<int>(ws.n), kin = static_cast<int>(is.c), n = static_cast<int>(sp->wide);
    const int ldp = static_cast<int>(sp->plane());
    const auto wt = taps_major(weight.ptr(), ws.n, is.c, taps);
    std::vector<T> out(static_cast<size_t>(os.numel()));
    std::vector<T> xp(static_cast<size_t>(is.c * sp->plane()));
    std::vector<T> wide(static_cast<size_t>(ws.n * sp->wide));
    for (int64_t b = 0; b < is.n; ++b) {
        pad_planes(input.ptr() + b * is.c * is.plane(), *sp, xp.data());
        for (int64_t t = 0; t < taps; ++t)
            detail::gemm(false, false, m, n, kin, T(1), wt.data() + t * ws.n * is.c, kin,
                         xp.data() + sp->offsets[static_cast<size_t>(t)], ldp, t == 0 ? T(0) : T(1), wide.data(), n);
        T* dst = out.data() + b * os.c * os.plane();
        for (int64_t co = 0; co < os.c; ++co) {
            const T bv = bias.defined() ? bias.ptr()[co] : T(0);
            for (int64_t y = 0; y < os.h; ++y) {
                const T* src = wide.data() + co * sp->wide + y * sp->wp;
                T* row = dst + (co * os.h + y) * os.w;
                for (int64_t x = 0; x < os.w; ++x) row[x] = src[x] + bv;
            }
        }
    }

    return make_result<T>(os, std::move(out), "conv2d", {input, weight, bias},
                          [input, weight, bias, sp, is, os, taps, m, kin, n, ldp](const TensorImpl<T>& o) {
                              const Shape& ws = weight.shape();
                              const T* g = o.grad.data();
                              T* dw = weight.requires_grad() ? weight.impl()->grad_buffer().data() : nullptr;
                              T* dx = input.requires_grad() ? input.impl()->grad_buffer().data() : nullptr;
                              std::vector<T> gw(static_cast<size_t>(ws.n * sp->wide), T(0));
                              std::vector<T> xp(static_cast<size_t>(is.c * sp->plane()));
                              std::vector<T> dwt(dw ? static_cast<size_t>(ws.n * is.c * taps) : 0, T(0));
                              const auto wt = dx ? taps_major(weight.ptr(), ws.n, is.c, taps) : std::vector<T>{};
                              for (int64_t b = 0; b < is.n; ++b) {
                                  const T* gb = g + b * os.c * os.plane();
                                  for (int64_t co = 0; co < os.c; ++co)
                                      for (int64_t y = 0; y < os.h; ++y)
                                          std::copy_n(gb + (co * os.h + y) * os.w, os.w,
                                                      gw.data() + co * sp->wide + y * sp->wp);
                                  if (dw) {
                                      pad_planes(input.ptr() + b * is.c * is.plane(), *sp, xp.data());
                                      for (int64_t t = 0; t < taps; ++t)
                                          detail::gemm(false, true, m, kin, n, T(1), gw.data(), n,
                                                       xp.data() + sp->offsets[static_cast<size_t>(t)], ldp, T(1),
                                                       dwt.data() + t * ws.n * is.c, kin);
                                  }
                                  if (dx) {
                                      std::fill(xp.begin(), xp.end(), T(0));
                                      for (int64_t t = 0; t < taps; ++t)
                                          detail::gemm(true, false, kin, n, m, T(1), wt.data() + t * ws.n * is.c, kin,
                                                       gw.data(), n, T(1),
                                                       xp.data() + sp->offsets[static_cast<size_t>(t)], ldp);
                                      T* dxb = dx + b * is.c * is.plane();
                                      for (int64_t c = 0; c < is.c; ++c)
                                          for (int64_t y = 0; y < is.h; ++y) {
                                              const T* src = xp.data() + c * sp->plane() + (y + sp->pad) * sp->wp + sp->pad;
                                              T* row = dxb + (c * is.h + y) * is.w;
                                              for (int64_t x = 0; x < is.w; ++x) row[x] += src[x];
                                          }
                                  }
                              }
                              if (dw)
                                  for (int64_t co = 0; co < ws.n; ++co)
                                      for (int64_t ci = 0; ci < is.c; ++ci)
                                          for (int64_t t = 0; t < taps; ++t)
                                              dw[(co * is.c + ci) * taps + t] += dwt[(t * ws.n + co) * is.c + ci];
                              if (bias.defined() && bias.requires_grad()) {
                                  auto& db = bias.impl()->grad_buffer();
                                  for (int64_t b = 0; b < is.n; ++b)
                                      for (int64_t co = 0; co < os.c; ++co) {
                                          const T* plane = g + (b * os.c + co) * os.plane();
                                          T acc = 0;
                                          for (int64_t i = 0; i < os.plane(); ++i) acc += plane[i];
                                          db[co] += acc;
                                      }
                              }
                          });
}
}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, ConvGeometry geom) {
    const Shape& is = input.shape();
    const Shape& ws = weight.shape();
    require(geom.stride >= 1 && geom.dilation >= 1 && geom.padding >= 0,
            "conv2d: stride and dilation must be >= 1 and padding >= 0");
    require(ws.h == ws.w, "conv2d: weight must be square, got " + ws.str());
    require(ws.c == is.c, "conv2d: weight " + ws.str() + " expects " + std::to_string(ws.c) +
                              " input channels, input " + is.str() + " has " + std::to_string(is.c));
    require(!bias.defined() || bias.numel() == ws.n,
            "conv2d: bias of " + (bias.defined() ? std::to_string(bias.numel()) : std::string("0")) +
                " values for " + std::to_string(ws.n) + " filters");
    const int64_t k = ws.h;
    const int64_t oh = conv_out_size(is.h, k, geom);
    const int64_t ow = conv_out_size(is.w, k, geom);
    require(oh > 0 && ow > 0, "conv2d: input " + is.str() + " with kernel " + std::to_string(k) +
                                  " gives empty output");
    if (geom.stride == 1) return conv2d_shifted(input, weight, bias, geom);

    const Patch p{is.c, is.h, is.w, k, geom, oh, ow};
    const Shape os{is.n, ws.n, oh, ow};
    std::vector<T> out(static_cast<size_t>(os.numel()));
    std::vector<T> col(static_cast<size_t>(p.rows() * p.cols()));
    const int m = static_cast<int>(ws.n), n = static_cast<int>(p.cols()), kk = static_cast<int>(p.rows());
    for (int64_t b = 0; b < is.n; ++b) {
        im2col(input.ptr() + b * is.c * is.plane(), p, col.data());
        T* dst = out.data() + b * os.c * os.plane();
        detail::gemm(false, false, m, n, kk, T(1), weight.ptr(), kk, col.data(), n, T(0), dst, n);
        if (bias.defined()) {
            for (int64_t co = 0; co < os.c; ++co) {
                const T bv = bias.ptr()[co];
                T* plane = dst + co * os.plane();
                for (int64_t i = 0; i < os.plane(); ++i) plane[i] += bv;
            }
        }
    }

    return make_result<T>(os, std::move(out), "conv2d", {input, weight, bias},
                          [input, weight, bias, p, is, os, m, n, kk](const TensorImpl<T>& o) {
                              const T* g = o.grad.data();
                              std::vector<T> col(static_cast<size_t>(p.rows() * p.cols()));
                              std::vector<T> dcol(col.size());
                              T* dw = weight.requires_grad() ? weight.impl()->grad_buffer().data() : nullptr;
                              T* dx = input.requires_grad() ? input.impl()->grad_buffer().data() : nullptr;
                              for (int64_t b = 0; b < is.n; ++b) {
                                  const T* gb = g + b * os.c * os.plane();
                                  if (dw) {
                                      im2col(input.ptr() + b * is.c * is.plane(), p, col.data());
                                      detail::gemm(false, true, m, kk, n, T(1), gb, n, col.data(), n, T(1), dw, kk);
                                  }
                                  if (dx) {
                                      detail::gemm(true, false, kk, n, m, T(1), weight.ptr(), kk, gb, n, T(0),
                                                   dcol.data(), n);
                                      col2im(dcol.data(), p, dx + b * is.c * is.plane());
                                  }
                              }
                              if (bias.defined() && bias.requires_grad()) {
                                  auto& db = bias.impl()->grad_buffer();
                                  for (int64_t b = 0; b < is.n; ++b)
                                      for (int64_t co = 0; co < os.c; ++co) {
                                          const T* plane = g + (b * os.c + co) * os.plane();
                                          T acc = 0;
                                          for (int64_t i = 0; i < os.plane(); ++i) acc += plane[i];
                                          db[co] += acc;
                                      }
                              }
                          });
}

template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                           int padding) {
    const Shape& is = input.shape();
    const Shape& ws = weight.shape();
    require(stride >= 1 && padding >= 0, "conv2d_transpose: stride must be >= 1 and padding >= 0");
    require(ws.h == ws.w, "conv2d_transpose: weight must be square, got " + ws.str());
    require(ws.n == is.c, "conv2d_transpose: weight " + ws.str() + " expects " + std::to_string(ws.n) +
                              " input channels, input " + is.str() + " has " + std::to_string(is.c));
    require(!bias.defined() || bias.numel() == ws.c, "conv2d_transpose: bias size does not match output channels");
    const int64_t k = ws.h;
    const int64_t oh = (is.h - 1) * stride - 2 * padding + k;
    const int64_t ow = (is.w - 1) * stride - 2 * padding + k;
    require(oh > 0 && ow > 0, "conv2d_transpose: input " + is.str() + " gives empty output");

    const ConvGeometry geom{stride, 1, padding};
    require(conv_out_size(oh, k, geom) == is.h && conv_out_size(ow, k, geom) == is.w,
            "conv2d_transpose: geometry is not invertible for input " + is.str());
    // The patch geometry of the adjoint convolution: the big image is our output.
    const Patch p{ws.c, oh, ow, k, geom, is.h, is.w};
    const Shape os{is.n, ws.c, oh, ow};
    const int ci = static_cast<int>(ws.n), rows = static_cast<int>(p.rows()), cols = static_cast<int>(p.cols());
    std::vector<T> out(static_cast<size_t>(os.numel()), T(0));
    std::vector<T> col(static_cast<size_t>(p.rows() * p.cols()));
    for (int64_t b = 0; b < is.n; ++b) {
        detail::gemm(true, false, rows, cols, ci, T(1), weight.ptr(), rows, input.ptr() + b * is.c * is.plane(), cols,
                     T(0), col.data(), cols);
        T* dst = out.data() + b * os.c * os.plane();
        col2im(col.data(), p, dst);
        if (bias.defined()) {
            for (int64_t co = 0; co < os.c; ++co) {
                const T bv = bias.ptr()[co];
                T* plane = dst + co * os.plane();
                for (int64_t i = 0; i < os.plane(); ++i) plane[i] += bv;
            }
        }
    }

    return make_result<T>(os, std::move(out), "conv2d_transpose", {input, weight, bias},
                          [input, weight, bias, p, is, os, ci, rows, cols](const TensorImpl<T>& o) {
                              const T* g = o.grad.data();
                              std::vector<T> gcol(static_cast<size_t>(p.rows() * p.cols()));
                              T* dw = weight.requires_grad() ? weight.impl()->grad_buffer().data() : nullptr;
                              T* dx = input.requires_grad() ? input.impl()->grad_buffer().data() : nullptr;
                              for (int64_t b = 0; b < is.n; ++b) {
                                  im2col(g + b * os.c * os.plane(), p, gcol.data());
                                  const T* xb = input.ptr() + b * is.c * is.plane();
                                  if (dx) {
                                      detail::gemm(false, false, ci, cols, rows, T(1), weight.ptr(), rows, gcol.data(),
                                                   cols, T(1), dx + b * is.c * is.plane(), cols);
                                  }
                                  if (dw) {
                                      detail::gemm(false, true, ci, rows, cols, T(1), xb, cols, gcol.data(), cols, T(1),
                                                   dw, rows);
                                  }
                              }
                              if (bias.defined() && bias.requires_grad()) {
                                  auto& db = bias.impl()->grad_buffer();
                                  for (int64_t b = 0; b < is.n; ++b)
                                      for (int64_t co = 0; co < os.c; ++co) {
                                          const T* plane = g + (b * os.c + co) * os.plane();
                                          T acc = 0;
                                          for (int64_t i = 0; i < os.plane(); ++i) acc += plane[i];
                                          db[co] += acc;
                                      }
                              }
                          });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T alpha) {
    require(alpha >= T(0) && alpha < T(1), "leaky_relu: alpha must lie in [0, 1)");
    std::vector<T> out(x.data().begin(), x.data().end());
    for (auto& v : out) v = v > T(0) ? v : alpha * v;
    return make_result<T>(x.shape(), std::move(out), "leaky_relu", {x}, [x, alpha](const TensorImpl<T>& o) {
        auto& dx = x.impl()->grad_buffer();
        const T* xv = x.ptr();
        for (size_t i = 0; i < dx.size(); ++i) dx[i] += o.grad[i] * (xv[i] > T(0) ? T(1) : alpha);
    });
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    require(!parts.empty(), "concat_channels: no parts");
    if (parts.size() == 1) return parts.front();
    Shape os = parts.front().shape();
    os.c = 0;
    for (const auto& p : parts) {
        require(p.shape().spatially_equal(parts.front().shape()),
                "concat_channels: part " + p.shape().str() + " does not match " + parts.front().shape().str());
        os.c += p.shape().c;
    }
    std::vector<T> out(static_cast<size_t>(os.numel()));
    const int64_t plane = os.plane();
    for (int64_t b = 0; b < os.n; ++b) {
        T* dst = out.data() + b * os.c * plane;
        for (const auto& p : parts) {
            const int64_t len = p.shape().c * plane;
            std::copy_n(p.ptr() + b * len, len, dst);
            dst += len;
        }
    }
    return make_result<T>(os, std::move(out), "concat_channels", parts, [parts, os](const TensorImpl<T>& o) {
        const int64_t plane = os.plane();
        for (int64_t b = 0; b < os.n; ++b) {
            const T* src = o.grad.data() + b * os.c * plane;
            for (const auto& p : parts) {
                const int64_t len = p.shape().c * plane;
                if (p.requires_grad()) {
                    T* dst = p.impl()->grad_buffer().data() + b * len;
                    for (int64_t i = 0; i < len; ++i) dst[i] += src[i];
                }
                src += len;
            }
        }
    });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int64_t begin, int64_t end) {
    const Shape& xs = x.shape();
    require(0 <= begin && begin < end && end <= xs.c, "slice_channels: bad range [" + std::to_string(begin) + ", " +
                                                          std::to_string(end) + ") for " + xs.str());
    const Shape os{xs.n, end - begin, xs.h, xs.w};
    const int64_t plane = xs.plane();
    std::vector<T> out(static_cast<size_t>(os.numel()));
    for (int64_t b = 0; b < xs.n; ++b)
        std::copy_n(x.ptr() + (b * xs.c + begin) * plane, os.c * plane, out.data() + b * os.c * plane);
    return make_result<T>(os, std::move(out), "slice_channels", {x}, [x, os, begin](const TensorImpl<T>& o) {
        const Shape& xs = x.shape();
        const int64_t plane = xs.plane();
        auto& dx = x.impl()->grad_buffer();
        for (int64_t b = 0; b < xs.n; ++b) {
            T* dst = dx.data() + (b * xs.c + begin) * plane;
            const T* src = o.grad.data() + b * os.c * plane;
            for (int64_t i = 0; i < os.c * plane; ++i) dst[i] += src[i];
        }
    });
}

namespace {
struct Tap {
    int64_t i0, i1;
    double w1;  // weight of i1; i0 gets 1 - w1
};

// Half-pixel source taps for an upsampled axis, clamped at the edges.
std::vector<Tap> upsample_taps(int64_t in, int factor) {
    std::vector<Tap> taps(static_cast<size_t>(in * factor));
    for (int64_t o = 0; o < in * factor; ++o) {
        double src = (static_cast<double>(o) + 0.5) / factor - 0.5;
        if (src < 0) src = 0;
        int64_t i0 = static_cast<int64_t>(std::floor(src));
        if (i0 > in - 1) i0 = in - 1;
        const int64_t i1 = std::min(i0 + 1, in - 1);
        taps[static_cast<size_t>(o)] = {i0, i1, src - static_cast<double>(i0)};
    }
    return taps;
}
}  // namespace

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, int factor) {
    require(factor >= 1, "bilinear_upsample: factor must be >= 1");
    if (factor == 1) return x;
    const Shape& xs = x.shape();
    const Shape os{xs.n, xs.c, xs.h * factor, xs.w * factor};
    const auto ty = upsample_taps(xs.h, factor);
    const auto tx = upsample_taps(xs.w, factor);
    std::vector<T> out(static_cast<size_t>(os.numel()));
    for (int64_t pl = 0; pl < xs.n * xs.c; ++pl) {
        const T* src = x.ptr() + pl * xs.plane();
        T* dst = out.data() + pl * os.plane();
        for (int64_t oy = 0; oy < os.h; ++oy) {
            const Tap& a = ty[static_cast<size_t>(oy)];
            const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
            for (int64_t ox = 0; ox < os.w; ++ox) {
                const Tap& b = tx[static_cast<size_t>(ox)];
                const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
                dst[oy * os.w + ox] = wy0 * (wx0 * src[a.i0 * xs.w + b.i0] + wx1 * src[a.i0 * xs.w + b.i1]) +
                                      wy1 * (wx0 * src[a.i1 * xs.w + b.i0] + wx1 * src[a.i1 * xs.w + b.i1]);
            }
        }
    }
    return make_result<T>(os, std::move(out), "bilinear_upsample", {x}, [x, os, ty, tx](const TensorImpl<T>& o) {
        const Shape& xs = x.shape();
        auto& dx = x.impl()->grad_buffer();
        for (int64_t pl = 0; pl < xs.n * xs.c; ++pl) {
            T* d = dx.data() + pl * xs.plane();
            const T* g = o.grad.data() + pl * os.plane();
            for (int64_t oy = 0; oy < os.h; ++oy) {
                const Tap& a = ty[static_cast<size_t>(oy)];
                const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
                for (int64_t ox = 0; ox < os.w; ++ox) {
                    const Tap& b = tx[static_cast<size_t>(ox)];
                    const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
                    const T gv = g[oy * os.w + ox];
                    d[a.i0 * xs.w + b.i0] += gv * wy0 * wx0;
                    d[a.i0 * xs.w + b.i1] += gv * wy0 * wx1;
                    d[a.i1 * xs.w + b.i0] += gv * wy1 * wx0;
                    d[a.i1 * xs.w + b.i1] += gv * wy1 * wx1;
                }
            }
        }
    });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same(a, b, "add");
    std::vector<T> out(a.data().begin(), a.data().end());
    for (size_t i = 0; i < out.size(); ++i) out[i] += b.ptr()[i];
    return make_result<T>(a.shape(), std::move(out), "add", {a, b}, [a, b](const TensorImpl<T>& o) {
        accumulate(a, o.grad);
        accumulate(b, o.grad);
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same(a, b, "sub");
    std::vector<T> out(a.data().begin(), a.data().end());
    for (size_t i = 0; i < out.size(); ++i) out[i] -= b.ptr()[i];
    return make_result<T>(a.shape(), std::move(out), "sub", {a, b}, [a, b](const TensorImpl<T>& o) {
        accumulate(a, o.grad);
        if (b.requires_grad()) {
            auto& db = b.impl()->grad_buffer();
            for (size_t i = 0; i < db.size(); ++i) db[i] -= o.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same(a, b, "mul");
    std::vector<T> out(a.data().begin(), a.data().end());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b.ptr()[i];
    return make_result<T>(a.shape(), std::move(out), "mul", {a, b}, [a, b](const TensorImpl<T>& o) {
        if (a.requires_grad()) {
            auto& da = a.impl()->grad_buffer();
            for (size_t i = 0; i < da.size(); ++i) da[i] += o.grad[i] * b.ptr()[i];
        }
        if (b.requires_grad()) {
            auto& db = b.impl()->grad_buffer();
            for (size_t i = 0; i < db.size(); ++i) db[i] += o.grad[i] * a.ptr()[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    std::vector<T> out(x.data().begin(), x.data().end());
    for (auto& v : out) v *= factor;
    return make_result<T>(x.shape(), std::move(out), "scale", {x}, [x, factor](const TensorImpl<T>& o) {
        auto& dx = x.impl()->grad_buffer();
        for (size_t i = 0; i < dx.size(); ++i) dx[i] += o.grad[i] * factor;
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = 0;
    for (T v : x.data()) acc += v;
    return scalar_result<T>(acc, "sum", {x}, [x](const TensorImpl<T>& o) {
        auto& dx = x.impl()->grad_buffer();
        for (auto& d : dx) d += o.grad[0];
    });
}

template <typename T>
Tensor<T> sum_squares(const Tensor<T>& x) {
    T acc = 0;
    for (T v : x.data()) acc += v * v;
    return scalar_result<T>(acc, "sum_squares", {x}, [x](const TensorImpl<T>& o) {
        auto& dx = x.impl()->grad_buffer();
        const T* xv = x.ptr();
        for (size_t i = 0; i < dx.size(); ++i) dx[i] += T(2) * xv[i] * o.grad[0];
    });
}

template <typename T>
Tensor<T> sum_abs(const Tensor<T>& x) {
    T acc = 0;
    for (T v : x.data()) acc += std::abs(v);
    return scalar_result<T>(acc, "sum_abs", {x}, [x](const TensorImpl<T>& o) {
        auto& dx = x.impl()->grad_buffer();
        const T* xv = x.ptr();
        for (size_t i = 0; i < dx.size(); ++i) dx[i] += (xv[i] > T(0) ? T(1) : xv[i] < T(0) ? T(-1) : T(0)) * o.grad[0];
    });
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& weights) {
    require_same(x, weights, "weighted_sum");
    T acc = 0;
    for (int64_t i = 0; i < x.numel(); ++i) acc += x.ptr()[i] * weights.ptr()[i];
    return scalar_result<T>(acc, "weighted_sum", {x}, [x, weights](const TensorImpl<T>& o) {
        auto& dx = x.impl()->grad_buffer();
        for (size_t i = 0; i < dx.size(); ++i) dx[i] += weights.ptr()[i] * o.grad[0];
    });
}

template <typename T>
Tensor<T> masked_l1(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& mask) {
    require_same(pred, target, "masked_l1");
    const Shape& ps = pred.shape();
    require(mask.shape() == Shape{ps.n, 1, ps.h, ps.w},
            "masked_l1: mask " + mask.shape().str() + " does not match prediction " + ps.str());
    const int64_t plane = ps.plane();
    T acc = 0;
    for (int64_t b = 0; b < ps.n; ++b)
        for (int64_t c = 0; c < ps.c; ++c) {
            const T* p = pred.ptr() + (b * ps.c + c) * plane;
            const T* t = target.ptr() + (b * ps.c + c) * plane;
            const T* m = mask.ptr() + b * plane;
            for (int64_t i = 0; i < plane; ++i)
                if (m[i] != T(0)) acc += std::abs(p[i] - t[i]);
        }
    return scalar_result<T>(acc, "masked_l1", {pred}, [pred, target, mask](const TensorImpl<T>& o) {
        const Shape& ps = pred.shape();
        const int64_t plane = ps.plane();
        auto& dp = pred.impl()->grad_buffer();
        for (int64_t b = 0; b < ps.n; ++b)
            for (int64_t c = 0; c < ps.c; ++c) {
                const int64_t off = (b * ps.c + c) * plane;
                const T* m = mask.ptr() + b * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    if (m[i] == T(0)) continue;
                    const T d = pred.ptr()[off + i] - target.ptr()[off + i];
                    dp[static_cast<size_t>(off + i)] += (d > T(0) ? T(1) : d < T(0) ? T(-1) : T(0)) * o.grad[0];
                }
            }
    });
}

#define DWARF_INSTANTIATE_OPS(T)                                                                          \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, ConvGeometry);        \
    template Tensor<T> conv2d_transpose(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);  \
    template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                   \
    template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                    \
    template Tensor<T> slice_channels(const Tensor<T>&, int64_t, int64_t);                                \
    template Tensor<T> bilinear_upsample(const Tensor<T>&, int);                                          \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                           \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                           \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                           \
    template Tensor<T> scale(const Tensor<T>&, T);                                                        \
    template Tensor<T> sum(const Tensor<T>&);                                                             \
    template Tensor<T> sum_squares(const Tensor<T>&);                                                     \
    template Tensor<T> sum_abs(const Tensor<T>&);                                                         \
    template Tensor<T> weighted_sum(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> masked_l1(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

DWARF_INSTANTIATE_OPS(float)
DWARF_INSTANTIATE_OPS(double)

}  // namespace dwarf
