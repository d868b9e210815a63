#pragma once

// Differentiable ops over (C, H, W) tensors. Scalars have shape {}.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "auxmat/autodiff.hpp"

namespace auxmat::ad {

namespace detail {

inline void require_rank3(const Shape& s, const char* op) {
  if (s.size() != 3) throw std::invalid_argument(std::string(op) + ": expected (C,H,W), got " + shape_string(s));
}

inline void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

// Half-pixel-centred source taps, the same convention as resize_bilinear.
struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

inline Taps bilinear_taps(int in, int out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double f = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
    t.lo[i] = static_cast<int>(f);
    t.hi[i] = std::min(t.lo[i] + 1, in - 1);
    t.frac[i] = f - t.lo[i];
  }
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same(a.shape(), b.shape(), "add");
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] + b.value()[i];
  return make_op<T>("add", a.shape(), std::move(v), {a, b}, [](Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = input_grad(n, k)) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
      }
    }
  });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same(a.shape(), b.shape(), "sub");
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] - b.value()[i];
  return make_op<T>("sub", a.shape(), std::move(v), {a, b}, [](Node<T>& n) {
    if (auto* g = input_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
    }
    if (auto* g = input_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] -= n.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same(a.shape(), b.shape(), "mul");
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] * b.value()[i];
  return make_op<T>("mul", a.shape(), std::move(v), {a, b}, [](Node<T>& n) {
    const auto& av = n.inputs[0]->value;
    const auto& bv = n.inputs[1]->value;
    if (auto* g = input_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * bv[i];
    }
    if (auto* g = input_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * av[i];
    }
  });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] * s;
  return make_op<T>("scale", a.shape(), std::move(v), {a}, [s](Node<T>& n) {
    if (auto* g = input_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * s;
    }
  });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  std::vector<T> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.value()[i] > T(0) ? x.value()[i] : T(0);
  return make_op<T>("relu", x.shape(), std::move(v), {x}, [](Node<T>& n) {
    if (auto* g = input_grad(n, 0)) {
      const auto& xv = n.inputs[0]->value;
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        if (xv[i] > T(0)) (*g)[i] += n.grad[i];
      }
    }
  });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  std::vector<T> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const T z = x.value()[i];
    v[i] = z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
  }
  return make_op<T>("sigmoid", x.shape(), std::move(v), {x}, [](Node<T>& n) {
    if (auto* g = input_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * n.value[i] * (T(1) - n.value[i]);
    }
  });
}

/// Sum of all elements, weighted elementwise by a constant when given.
template <typename T>
BasicTensor<T> weighted_sum(const BasicTensor<T>& x, const std::vector<T>& weights) {
  if (weights.size() != x.numel()) throw std::invalid_argument("weighted_sum: weight length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += static_cast<double>(x.value()[i]) * weights[i];
  return make_op<T>("weighted_sum", {}, {static_cast<T>(acc)}, {x}, [weights](Node<T>& n) {
    if (auto* g = input_grad(n, 0)) {
      for (std::size_t i = 0; i < weights.size(); ++i) (*g)[i] += n.grad[0] * weights[i];
    }
  });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  return weighted_sum(x, std::vector<T>(x.numel(), T(1)));
}

/// Channel slice [begin, end) of a (C,H,W) tensor.
template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, int begin, int end) {
  detail::require_rank3(x.shape(), "slice_channels");
  if (begin < 0 || end > x.channels() || begin >= end) throw std::invalid_argument("slice_channels: bad range");
  const std::size_t plane = static_cast<std::size_t>(x.height()) * x.width();
  std::vector<T> v(x.value().begin() + begin * plane, x.value().begin() + end * plane);
  return make_op<T>("slice_channels", {end - begin, x.height(), x.width()}, std::move(v), {x},
                    [begin, plane](Node<T>& n) {
                      if (auto* g = input_grad(n, 0)) {
                        for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[begin * plane + i] += n.grad[i];
                      }
                    });
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_rank3(a.shape(), "concat_channels");
  detail::require_rank3(b.shape(), "concat_channels");
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("concat_channels: spatial mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
  std::vector<T> v(a.value().begin(), a.value().end());
  v.insert(v.end(), b.value().begin(), b.value().end());
  const std::size_t split = a.numel();
  return make_op<T>("concat_channels", {a.channels() + b.channels(), a.height(), a.width()}, std::move(v), {a, b},
                    [split](Node<T>& n) {
                      if (auto* g = input_grad(n, 0)) {
                        for (std::size_t i = 0; i < split; ++i) (*g)[i] += n.grad[i];
                      }
                      if (auto* g = input_grad(n, 1)) {
                        for (std::size_t i = split; i < n.grad.size(); ++i) (*g)[i - split] += n.grad[i];
                      }
                    });
}

// ---------------------------------------------------------------------------
// Convolution

/// Cross-correlation with zero padding. weight: (Cout, Cin, K, K); bias: (Cout) or undefined.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      int stride = 1, int pad = 0) {
  detail::require_rank3(x.shape(), "conv2d");
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) throw std::invalid_argument("conv2d: weight must be (Cout,Cin,K,K)");
  if (weight.dim(1) != x.channels()) {
    throw std::invalid_argument("conv2d: channel mismatch, input " + shape_string(x.shape()) + " weight " +
                                shape_string(weight.shape()));
  }
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: stride >= 1 and pad >= 0 required");
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) throw std::invalid_argument("conv2d: bias must be (Cout)");

  const int cin = x.channels(), h = x.height(), w = x.width();
  const int cout = weight.dim(0), k = weight.dim(2);
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");

  // Valid output index range [lo, hi) for a kernel offset.
  auto range = [stride, pad](int kk, int in, int out_n, int& lo, int& hi) {
    auto floor_div = [](int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    lo = std::max(0, -floor_div(kk - pad, stride));
    hi = std::min(out_n, floor_div(in - 1 + pad - kk, stride) + 1);
  };

  std::vector<T> out(static_cast<std::size_t>(cout) * ho * wo, T(0));
  const auto xv = x.value();
  const auto wv = weight.value();
  for (int co = 0; co < cout; ++co) {
    T* o = out.data() + static_cast<std::size_t>(co) * ho * wo;
    if (has_bias) std::fill(o, o + static_cast<std::size_t>(ho) * wo, bias.value()[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const T* in = xv.data() + static_cast<std::size_t>(ci) * h * w;
      for (int ky = 0; ky < k; ++ky) {
        int ylo, yhi;
        range(ky, h, ho, ylo, yhi);
        for (int kx = 0; kx < k; ++kx) {
          int xlo, xhi;
          range(kx, w, wo, xlo, xhi);
          const T wk = wv[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
          for (int oy = ylo; oy < yhi; ++oy) {
            const T* row = in + static_cast<std::size_t>(oy * stride - pad + ky) * w - pad + kx;
            T* orow = o + static_cast<std::size_t>(oy) * wo;
            for (int ox = xlo; ox < xhi; ++ox) orow[ox] += wk * row[ox * stride];
          }
        }
      }
    }
  }

  std::vector<BasicTensor<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_op<T>("conv2d", {cout, ho, wo}, std::move(out), std::move(inputs),
                    [=](Node<T>& n) {
                      const auto& xin = n.inputs[0]->value;
                      const auto& wt = n.inputs[1]->value;
                      auto* gx = input_grad(n, 0);
                      auto* gw = input_grad(n, 1);
                      auto* gb = has_bias ? input_grad(n, 2) : nullptr;
                      for (int co = 0; co < cout; ++co) {
                        const T* go = n.grad.data() + static_cast<std::size_t>(co) * ho * wo;
                        if (gb) {
                          T acc = T(0);
                          for (std::size_t i = 0; i < static_cast<std::size_t>(ho) * wo; ++i) acc += go[i];
                          (*gb)[co] += acc;
                        }
                        for (int ci = 0; ci < cin; ++ci) {
                          const std::size_t in_off = static_cast<std::size_t>(ci) * h * w;
                          for (int ky = 0; ky < k; ++ky) {
                            int ylo, yhi;
                            range(ky, h, ho, ylo, yhi);
                            for (int kx = 0; kx < k; ++kx) {
                              int xlo, xhi;
                              range(kx, w, wo, xlo, xhi);
                              const std::size_t widx = ((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx;
                              const T wk = wt[widx];
                              T wacc = T(0);
                              for (int oy = ylo; oy < yhi; ++oy) {
                                const std::ptrdiff_t base =
                                    static_cast<std::ptrdiff_t>(in_off) + static_cast<std::ptrdiff_t>(oy * stride - pad + ky) * w - pad + kx;
                                const T* grow = go + static_cast<std::size_t>(oy) * wo;
                                for (int ox = xlo; ox < xhi; ++ox) {
                                  const std::ptrdiff_t idx = base + static_cast<std::ptrdiff_t>(ox) * stride;
                                  if (gw) wacc += grow[ox] * xin[idx];
                                  if (gx) (*gx)[idx] += grow[ox] * wk;
                                }
                              }
                              if (gw) (*gw)[widx] += wacc;
                            }
                          }
                        }
                      }
                    });
}

// ---------------------------------------------------------------------------
// Resampling

/// Bilinear resize to (height, width), align_corners = false.
template <typename T>
BasicTensor<T> upsample_bilinear(const BasicTensor<T>& x, int height, int width) {
  detail::require_rank3(x.shape(), "upsample_bilinear");
  if (height < 1 || width < 1) throw std::invalid_argument("upsample_bilinear: size must be >= 1");
  const int c = x.channels(), h = x.height(), w = x.width();
  const detail::Taps ty = detail::bilinear_taps(h, height);
  const detail::Taps tx = detail::bilinear_taps(w, width);
  std::vector<T> out(static_cast<std::size_t>(c) * height * width);
  const auto xv = x.value();
  for (int ch = 0; ch < c; ++ch) {
    const T* in = xv.data() + static_cast<std::size_t>(ch) * h * w;
    T* o = out.data() + static_cast<std::size_t>(ch) * height * width;
    for (int y = 0; y < height; ++y) {
      const T* r0 = in + static_cast<std::size_t>(ty.lo[y]) * w;
      const T* r1 = in + static_cast<std::size_t>(ty.hi[y]) * w;
      const double fy = ty.frac[y];
      for (int xx = 0; xx < width; ++xx) {
        const double fx = tx.frac[xx];
        const double top = r0[tx.lo[xx]] + fx * (r0[tx.hi[xx]] - r0[tx.lo[xx]]);
        const double bot = r1[tx.lo[xx]] + fx * (r1[tx.hi[xx]] - r1[tx.lo[xx]]);
        o[static_cast<std::size_t>(y) * width + xx] = static_cast<T>(top + fy * (bot - top));
      }
    }
  }
  return make_op<T>("upsample_bilinear", {c, height, width}, std::move(out), {x}, [=](Node<T>& n) {
    auto* g = input_grad(n, 0);
    if (!g) return;
    for (int ch = 0; ch < c; ++ch) {
      T* gi = g->data() + static_cast<std::size_t>(ch) * h * w;
      const T* go = n.grad.data() + static_cast<std::size_t>(ch) * height * width;
      for (int y = 0; y < height; ++y) {
        const double fy = ty.frac[y];
        for (int xx = 0; xx < width; ++xx) {
          const double fx = tx.frac[xx];
          const double v = go[static_cast<std::size_t>(y) * width + xx];
          gi[static_cast<std::size_t>(ty.lo[y]) * w + tx.lo[xx]] += static_cast<T>(v * (1 - fy) * (1 - fx));
          gi[static_cast<std::size_t>(ty.lo[y]) * w + tx.hi[xx]] += static_cast<T>(v * (1 - fy) * fx);
          gi[static_cast<std::size_t>(ty.hi[y]) * w + tx.lo[xx]] += static_cast<T>(v * fy * (1 - fx));
          gi[static_cast<std::size_t>(ty.hi[y]) * w + tx.hi[xx]] += static_cast<T>(v * fy * fx);
        }
      }
    }
  });
}

template <typename T>
BasicTensor<T> upsample_bilinear_2x(const BasicTensor<T>& x) {
  return upsample_bilinear(x, 2 * x.height(), 2 * x.width());
}

/// 2x2 mean pooling; spatial sides must be even.
template <typename T>
BasicTensor<T> downsample_avg_2x(const BasicTensor<T>& x) {
  detail::require_rank3(x.shape(), "downsample_avg_2x");
  const int c = x.channels(), h = x.height(), w = x.width();
  if (h % 2 || w % 2) throw std::invalid_argument("downsample_avg_2x: sides must be even");
  const int ho = h / 2, wo = w / 2;
  std::vector<T> out(static_cast<std::size_t>(c) * ho * wo);
  const auto xv = x.value();
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx) {
        const std::size_t base = (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * xx;
        out[(static_cast<std::size_t>(ch) * ho + y) * wo + xx] =
            T(0.25) * (xv[base] + xv[base + 1] + xv[base + w] + xv[base + w + 1]);
      }
    }
  }
  return make_op<T>("downsample_avg_2x", {c, ho, wo}, std::move(out), {x}, [=](Node<T>& n) {
    auto* g = input_grad(n, 0);
    if (!g) return;
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < ho; ++y) {
        for (int xx = 0; xx < wo; ++xx) {
          const T v = T(0.25) * n.grad[(static_cast<std::size_t>(ch) * ho + y) * wo + xx];
          const std::size_t base = (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * xx;
          (*g)[base] += v;
          (*g)[base + 1] += v;
          (*g)[base + w] += v;
          (*g)[base + w + 1] += v;
        }
      }
    }
  });
}

/// Separable (1,4,6,4,1)/16 blur with replicate border.
template <typename T>
BasicTensor<T> binomial_blur5(const BasicTensor<T>& x) {
  detail::require_rank3(x.shape(), "binomial_blur5");
  static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int c = x.channels(), h = x.height(), w = x.width();
  auto pass = [=](const std::vector<T>& src, bool horizontal, bool transpose) {
    // transpose = adjoint (scatter) of the forward gather.
    std::vector<T> dst(src.size(), T(0));
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = static_cast<std::size_t>(ch) * h * w;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          for (int t = -2; t <= 2; ++t) {
            const int sy = horizontal ? y : std::clamp(y + t, 0, h - 1);
            const int sx = horizontal ? std::clamp(xx + t, 0, w - 1) : xx;
            const std::size_t out_i = off + static_cast<std::size_t>(y) * w + xx;
            const std::size_t in_i = off + static_cast<std::size_t>(sy) * w + sx;
            if (transpose) {
              dst[in_i] += static_cast<T>(k[t + 2] * src[out_i]);
            } else {
              dst[out_i] += static_cast<T>(k[t + 2] * src[in_i]);
            }
          }
        }
      }
    }
    return dst;
  };
  std::vector<T> in(x.value().begin(), x.value().end());
  std::vector<T> out = pass(pass(in, true, false), false, false);
  return make_op<T>("binomial_blur5", x.shape(), std::move(out), {x}, [pass](Node<T>& n) {
    auto* g = input_grad(n, 0);
    if (!g) return;
    const std::vector<T> back = pass(pass(n.grad, false, true), true, true);
    for (std::size_t i = 0; i < back.size(); ++i) (*g)[i] += back[i];
  });
}

/// Keeps even rows and columns; output side = ceil(side / 2).
template <typename T>
BasicTensor<T> subsample_2x(const BasicTensor<T>& x) {
  detail::require_rank3(x.shape(), "subsample_2x");
  const int c = x.channels(), h = x.height(), w = x.width();
  const int ho = (h + 1) / 2, wo = (w + 1) / 2;
  std::vector<T> out(static_cast<std::size_t>(c) * ho * wo);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx) {
        out[(static_cast<std::size_t>(ch) * ho + y) * wo + xx] = x.value()[(static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * xx];
      }
    }
  }
  return make_op<T>("subsample_2x", {c, ho, wo}, std::move(out), {x}, [=](Node<T>& n) {
    auto* g = input_grad(n, 0);
    if (!g) return;
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < ho; ++y) {
        for (int xx = 0; xx < wo; ++xx) {
          (*g)[(static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * xx] += n.grad[(static_cast<std::size_t>(ch) * ho + y) * wo + xx];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Offset warp

/// Se(p) = bilinear sample of Ma at p + offset(p).
///
/// offsets: (2, H, W), channel 0 = dx, channel 1 = dy, in pixels. Sample
/// coordinates are clamped to [0, W-1] x [0, H-1]; a clamped coordinate has
/// zero derivative with respect to its offset.
template <typename T>
BasicTensor<T> warp_with_offsets(const BasicTensor<T>& ma, const BasicTensor<T>& offsets) {
  detail::require_rank3(ma.shape(), "warp_with_offsets");
  detail::require_rank3(offsets.shape(), "warp_with_offsets");
  if (offsets.channels() != 2 || offsets.height() != ma.height() || offsets.width() != ma.width()) {
    throw std::invalid_argument("warp_with_offsets: offsets must be (2,H,W) matching " + shape_string(ma.shape()));
  }
  const int c = ma.channels(), h = ma.height(), w = ma.width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  struct Sample {
    int x0, x1, y0, y1;
    T fx, fy;
    bool free_x, free_y;
  };
  std::vector<Sample> samples(plane);
  const auto off = offsets.value();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      T px = static_cast<T>(x) + off[p];
      T py = static_cast<T>(y) + off[plane + p];
      Sample s{};
      s.free_x = px >= T(0) && px <= static_cast<T>(w - 1);
      s.free_y = py >= T(0) && py <= static_cast<T>(h - 1);
      px = std::clamp(px, T(0), static_cast<T>(w - 1));
      py = std::clamp(py, T(0), static_cast<T>(h - 1));
      s.x0 = static_cast<int>(std::floor(px));
      s.y0 = static_cast<int>(std::floor(py));
      s.x1 = std::min(s.x0 + 1, w - 1);
      s.y1 = std::min(s.y0 + 1, h - 1);
      s.fx = px - static_cast<T>(s.x0);
      s.fy = py - static_cast<T>(s.y0);
      samples[p] = s;
    }
  }

  std::vector<T> out(ma.numel());
  const auto mv = ma.value();
  for (int ch = 0; ch < c; ++ch) {
    const T* m = mv.data() + ch * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const Sample& s = samples[p];
      const T w00 = (T(1) - s.fy) * (T(1) - s.fx), w01 = (T(1) - s.fy) * s.fx;
      const T w10 = s.fy * (T(1) - s.fx), w11 = s.fy * s.fx;
      out[ch * plane + p] = w00 * m[s.y0 * w + s.x0] + w01 * m[s.y0 * w + s.x1] + w10 * m[s.y1 * w + s.x0] +
                            w11 * m[s.y1 * w + s.x1];
    }
  }

  return make_op<T>("warp_with_offsets", ma.shape(), std::move(out), {ma, offsets},
                    [c, w, plane, samples = std::move(samples)](Node<T>& n) {
                      const auto& mv = n.inputs[0]->value;
                      auto* gm = input_grad(n, 0);
                      auto* go = input_grad(n, 1);
                      for (int ch = 0; ch < c; ++ch) {
                        const T* m = mv.data() + ch * plane;
                        const T* g = n.grad.data() + ch * plane;
                        for (std::size_t p = 0; p < plane; ++p) {
                          const auto& s = samples[p];
                          const T v00 = m[s.y0 * w + s.x0], v01 = m[s.y0 * w + s.x1];
                          const T v10 = m[s.y1 * w + s.x0], v11 = m[s.y1 * w + s.x1];
                          if (gm) {
                            T* gmc = gm->data() + ch * plane;
                            gmc[s.y0 * w + s.x0] += g[p] * (T(1) - s.fy) * (T(1) - s.fx);
                            gmc[s.y0 * w + s.x1] += g[p] * (T(1) - s.fy) * s.fx;
                            gmc[s.y1 * w + s.x0] += g[p] * s.fy * (T(1) - s.fx);
                            gmc[s.y1 * w + s.x1] += g[p] * s.fy * s.fx;
                          }
                          if (go) {
                            if (s.free_x) (*go)[p] += g[p] * ((T(1) - s.fy) * (v01 - v00) + s.fy * (v11 - v10));
                            if (s.free_y) (*go)[plane + p] += g[p] * ((T(1) - s.fx) * (v10 - v00) + s.fx * (v11 - v01));
                          }
                        }
                      }
                    });
}

}  // namespace auxmat::ad
