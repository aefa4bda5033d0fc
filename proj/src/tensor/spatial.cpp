#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rcsnet/ops.hpp"

namespace rcsnet {

namespace {

struct Planes {
  std::size_t count, h, w;
};

Planes planes_of(const Shape& s, const char* op) {
  if (s.size() < 2) throw DimensionError(std::string(op) + " needs at least 2 axes, got " + shape_str(s));
  const std::size_t h = s[s.size() - 2];
  const std::size_t w = s[s.size() - 1];
  return {numel_of(s) / (h * w), h, w};
}

// Same-size box sum with zero padding; used both ways since the stencil is symmetric.
template <typename T>
void box_accumulate(const T* src, T* dst, const Planes& pl, std::size_t k, T weight) {
  using idx = std::ptrdiff_t;
  const idx r = idx(k / 2);
  for (std::size_t n = 0; n < pl.count; ++n) {
    const T* s = src + n * pl.h * pl.w;
    T* d = dst + n * pl.h * pl.w;
    for (idx i = 0; i < idx(pl.h); ++i) {
      for (idx j = 0; j < idx(pl.w); ++j) {
        T acc = 0;
        for (idx di = -r; di <= r; ++di) {
          const idx y = i + di;
          if (y < 0 || y >= idx(pl.h)) continue;
          for (idx dj = -r; dj <= r; ++dj) {
            const idx x = j + dj;
            if (x < 0 || x >= idx(pl.w)) continue;
            acc += s[y * idx(pl.w) + x];
          }
        }
        d[i * idx(pl.w) + j] += acc * weight;
      }
    }
  }
}

// Interpolation taps for one axis: out[i] = w0 * in[i0] + w1 * in[i1].
struct Taps {
  std::vector<std::size_t> i0, i1;
  std::vector<double> w0, w1;
};

Taps linear_taps(std::size_t in, std::size_t out) {
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w0.resize(out);
  t.w1.resize(out);
  const double ratio = double(in) / double(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (double(i) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, double(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    const double frac = src - double(lo);
    t.i0[i] = lo;
    t.i1[i] = hi;
    t.w0[i] = 1.0 - frac;
    t.w1[i] = frac;
  }
  return t;
}

}  // namespace

template <typename T>
BasicTensor<T> avg_pool2d(const BasicTensor<T>& input, std::size_t k) {
  if (k == 0 || k % 2 == 0) throw ParameterError("avg_pool2d kernel must be odd, got " + std::to_string(k));
  const Planes pl = planes_of(input.shape(), "avg_pool2d");
  std::vector<T> out(input.numel(), T(0));
  const T inv = T(1) / T(k * k);
  box_accumulate(input.data().data(), out.data(), pl, k, inv);
  auto in_impl = input.impl();
  return detail::make_result<T>("avg_pool2d", input.shape(), std::move(out), {in_impl},
                                [in_impl, pl, k, inv](detail::TensorImpl<T>& res) {
                                  box_accumulate(res.grad.data(), in_impl->ensure_grad().data(), pl, k, inv);
                                });
}

template <typename T>
BasicTensor<T> downsample_avg(const BasicTensor<T>& input, std::size_t factor) {
  if (factor == 0) throw ParameterError("resample factor must be >= 1");
  const Planes pl = planes_of(input.shape(), "downsample_avg");
  if (pl.h % factor || pl.w % factor) {
    throw DimensionError("spatial size " + shape_str(input.shape()) + " is not divisible by " +
                         std::to_string(factor));
  }
  const std::size_t oh = pl.h / factor, ow = pl.w / factor;
  Shape shape = input.shape();
  shape[shape.size() - 2] = oh;
  shape[shape.size() - 1] = ow;
  std::vector<T> out(pl.count * oh * ow, T(0));
  const T inv = T(1) / T(factor * factor);
  const T* x = input.data().data();
  for (std::size_t n = 0; n < pl.count; ++n)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        T acc = 0;
        for (std::size_t a = 0; a < factor; ++a)
          for (std::size_t b = 0; b < factor; ++b)
            acc += x[(n * pl.h + i * factor + a) * pl.w + j * factor + b];
        out[(n * oh + i) * ow + j] = acc * inv;
      }
  auto in_impl = input.impl();
  return detail::make_result<T>(
      "downsample_avg", std::move(shape), std::move(out), {in_impl},
      [in_impl, pl, factor, oh, ow, inv](detail::TensorImpl<T>& res) {
        T* dx = in_impl->ensure_grad().data();
        const T* g = res.grad.data();
        for (std::size_t n = 0; n < pl.count; ++n)
          for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
              const T v = g[(n * oh + i) * ow + j] * inv;
              for (std::size_t a = 0; a < factor; ++a)
                for (std::size_t b = 0; b < factor; ++b)
                  dx[(n * pl.h + i * factor + a) * pl.w + j * factor + b] += v;
            }
      });
}

template <typename T>
BasicTensor<T> upsample_linear(const BasicTensor<T>& input, std::size_t out_h, std::size_t out_w) {
  const Planes pl = planes_of(input.shape(), "upsample_linear");
  if (out_h == 0 || out_w == 0) throw DimensionError("upsample target must be non-empty");
  const Taps ty = linear_taps(pl.h, out_h);
  const Taps tx = linear_taps(pl.w, out_w);
  Shape shape = input.shape();
  shape[shape.size() - 2] = out_h;
  shape[shape.size() - 1] = out_w;
  std::vector<T> out(pl.count * out_h * out_w);
  const T* x = input.data().data();
  for (std::size_t n = 0; n < pl.count; ++n) {
    const T* s = x + n * pl.h * pl.w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const T* r0 = s + ty.i0[i] * pl.w;
      const T* r1 = s + ty.i1[i] * pl.w;
      const T wy0 = T(ty.w0[i]), wy1 = T(ty.w1[i]);
      for (std::size_t j = 0; j < out_w; ++j) {
        const T wx0 = T(tx.w0[j]), wx1 = T(tx.w1[j]);
        const T top = wx0 * r0[tx.i0[j]] + wx1 * r0[tx.i1[j]];
        const T bot = wx0 * r1[tx.i0[j]] + wx1 * r1[tx.i1[j]];
        out[(n * out_h + i) * out_w + j] = wy0 * top + wy1 * bot;
      }
    }
  }
  auto in_impl = input.impl();
  return detail::make_result<T>(
      "upsample_linear", std::move(shape), std::move(out), {in_impl},
      [in_impl, pl, ty, tx, out_h, out_w](detail::TensorImpl<T>& res) {
        T* dx = in_impl->ensure_grad().data();
        const T* g = res.grad.data();
        for (std::size_t n = 0; n < pl.count; ++n) {
          T* d = dx + n * pl.h * pl.w;
          for (std::size_t i = 0; i < out_h; ++i) {
            T* r0 = d + ty.i0[i] * pl.w;
            T* r1 = d + ty.i1[i] * pl.w;
            const T wy0 = T(ty.w0[i]), wy1 = T(ty.w1[i]);
            for (std::size_t j = 0; j < out_w; ++j) {
              const T gv = g[(n * out_h + i) * out_w + j];
              const T wx0 = T(tx.w0[j]), wx1 = T(tx.w1[j]);
              r0[tx.i0[j]] += gv * wy0 * wx0;
              r0[tx.i1[j]] += gv * wy0 * wx1;
              r1[tx.i0[j]] += gv * wy1 * wx0;
              r1[tx.i1[j]] += gv * wy1 * wx1;
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> resample2d(const BasicTensor<T>& input, std::size_t factor, ResampleMode mode) {
  if (mode == ResampleMode::DownAverage) return downsample_avg(input, factor);
  if (factor == 0) throw ParameterError("resample factor must be >= 1");
  const Planes pl = planes_of(input.shape(), "resample2d");
  return upsample_linear(input, pl.h * factor, pl.w * factor);
}

template <typename T>
BasicTensor<T> gap(const BasicTensor<T>& input) {
  const auto& s = input.shape();
  if (s.size() != 4) throw DimensionError("gap expects (B,C,H,W), got " + shape_str(s));
  const std::size_t bc = s[0] * s[1], hw = s[2] * s[3];
  if (hw == 0) throw DimensionError("gap over an empty spatial grid");
  std::vector<T> out(bc);
  const T* x = input.data().data();
  for (std::size_t i = 0; i < bc; ++i) {
    T acc = 0;
    for (std::size_t p = 0; p < hw; ++p) acc += x[i * hw + p];
    out[i] = acc / T(hw);
  }
  auto in_impl = input.impl();
  return detail::make_result<T>("gap", Shape{s[0], s[1]}, std::move(out), {in_impl},
                                [in_impl, bc, hw](detail::TensorImpl<T>& res) {
                                  T* dx = in_impl->ensure_grad().data();
                                  for (std::size_t i = 0; i < bc; ++i) {
                                    const T v = res.grad[i] / T(hw);
                                    for (std::size_t p = 0; p < hw; ++p) dx[i * hw + p] += v;
                                  }
                                });
}

#define RCSNET_INSTANTIATE(T)                                                              \
  template BasicTensor<T> avg_pool2d(const BasicTensor<T>&, std::size_t);                  \
  template BasicTensor<T> downsample_avg(const BasicTensor<T>&, std::size_t);              \
  template BasicTensor<T> upsample_linear(const BasicTensor<T>&, std::size_t, std::size_t); \
  template BasicTensor<T> resample2d(const BasicTensor<T>&, std::size_t, ResampleMode);    \
  template BasicTensor<T> gap(const BasicTensor<T>&);

RCSNET_INSTANTIATE(float)
RCSNET_INSTANTIATE(double)
#undef RCSNET_INSTANTIATE

}  // namespace rcsnet
