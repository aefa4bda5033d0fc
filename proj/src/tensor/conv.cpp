#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gemm.hpp"
#include "rcsnet/ops.hpp"

namespace rcsnet {

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding, std::size_t dilation) {
  if (stride == 0 || dilation == 0) throw ParameterError("stride and dilation must be >= 1");
  if (kernel == 0) throw DimensionError("kernel extent must be >= 1");
  const std::size_t span = dilation * (kernel - 1) + 1;
  if (in + 2 * padding < span) {
    throw DimensionError("kernel span " + std::to_string(span) + " exceeds padded input " +
                         std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - span) / stride + 1;
}

namespace {

// Convolution geometry over three spatial axes; 2-D convolutions use a unit
// leading axis, which leaves the memory layout unchanged.
struct Geometry {
  std::size_t batch = 0, cin = 0, cout = 0;
  std::array<std::size_t, 3> in{}, kernel{}, out{}, stride{}, pad{}, dil{};

  std::size_t in_volume() const { return in[0] * in[1] * in[2]; }
  std::size_t out_volume() const { return out[0] * out[1] * out[2]; }
  std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
  std::size_t patch() const { return cin * kernel_volume(); }
  bool pointwise() const {
    return kernel_volume() == 1 && stride == std::array<std::size_t, 3>{1, 1, 1} &&
           pad == std::array<std::size_t, 3>{0, 0, 0};
  }
};

// For unit stride, offsets j in [0, seg) with 0 <= first + j < extent.
inline std::pair<std::size_t, std::size_t> valid_span(std::ptrdiff_t first, std::size_t seg, std::size_t extent) {
  const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(-first, 0, std::ptrdiff_t(seg));
  const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(std::ptrdiff_t(extent) - first, lo, std::ptrdiff_t(seg));
  return {std::size_t(lo), std::size_t(hi)};
}

// Columns [p0, p0 + n) of the (patch x out_volume) patch matrix: row k holds
// input tap k for every output position in the block. Rows have stride n.
template <typename T>
void im2col(const T* x, const Geometry& g, std::size_t p0, std::size_t n, T* col) {
  using idx = std::ptrdiff_t;
  const std::size_t plane = g.out[1] * g.out[2];
  T* dst = col;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const T* xc = x + ci * g.in_volume();
    for (std::size_t a = 0; a < g.kernel[0]; ++a) {
      for (std::size_t b = 0; b < g.kernel[1]; ++b) {
        for (std::size_t c = 0; c < g.kernel[2]; ++c, dst += n) {
          std::size_t p = p0;
          while (p < p0 + n) {
            const std::size_t ot = p / plane, oh = (p % plane) / g.out[2], ow0 = p % g.out[2];
            const std::size_t seg = std::min(g.out[2] - ow0, p0 + n - p);
            T* out = dst + (p - p0);
            const idx it = idx(ot * g.stride[0] + a * g.dil[0]) - idx(g.pad[0]);
            const idx ih = idx(oh * g.stride[1] + b * g.dil[1]) - idx(g.pad[1]);
            if (it < 0 || it >= idx(g.in[0]) || ih < 0 || ih >= idx(g.in[1])) {
              std::fill(out, out + seg, T(0));
            } else {
              const T* xr = xc + (std::size_t(it) * g.in[1] + std::size_t(ih)) * g.in[2];
              const idx off = idx(c * g.dil[2]) - idx(g.pad[2]);
              if (g.stride[2] == 1) {
                const auto [lo, hi] = valid_span(idx(ow0) + off, seg, g.in[2]);
                std::fill(out, out + lo, T(0));
                std::copy(xr + idx(ow0) + off + idx(lo), xr + idx(ow0) + off + idx(hi), out + lo);
                std::fill(out + hi, out + seg, T(0));
              } else {
                for (std::size_t j = 0; j < seg; ++j) {
                  const idx iw = idx((ow0 + j) * g.stride[2]) + off;
                  out[j] = (iw >= 0 && iw < idx(g.in[2])) ? xr[iw] : T(0);
                }
              }
            }
            p += seg;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters the block back into dx with accumulation.
template <typename T>
void col2im(const T* col, const Geometry& g, std::size_t p0, std::size_t n, T* dx) {
  using idx = std::ptrdiff_t;
  const std::size_t plane = g.out[1] * g.out[2];
  const T* src = col;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    T* xc = dx + ci * g.in_volume();
    for (std::size_t a = 0; a < g.kernel[0]; ++a) {
      for (std::size_t b = 0; b < g.kernel[1]; ++b) {
        for (std::size_t c = 0; c < g.kernel[2]; ++c, src += n) {
          std::size_t p = p0;
          while (p < p0 + n) {
            const std::size_t ot = p / plane, oh = (p % plane) / g.out[2], ow0 = p % g.out[2];
            const std::size_t seg = std::min(g.out[2] - ow0, p0 + n - p);
            const idx it = idx(ot * g.stride[0] + a * g.dil[0]) - idx(g.pad[0]);
            const idx ih = idx(oh * g.stride[1] + b * g.dil[1]) - idx(g.pad[1]);
            if (it >= 0 && it < idx(g.in[0]) && ih >= 0 && ih < idx(g.in[1])) {
              const T* in = src + (p - p0);
              T* xr = xc + (std::size_t(it) * g.in[1] + std::size_t(ih)) * g.in[2];
              const idx off = idx(c * g.dil[2]) - idx(g.pad[2]);
              if (g.stride[2] == 1) {
                const auto [lo, hi] = valid_span(idx(ow0) + off, seg, g.in[2]);
                T* xs = xr + idx(ow0) + off;
                for (std::size_t j = lo; j < hi; ++j) xs[j] += in[j];
              } else {
                for (std::size_t j = 0; j < seg; ++j) {
                  const idx iw = idx((ow0 + j) * g.stride[2]) + off;
                  if (iw >= 0 && iw < idx(g.in[2])) xr[iw] += in[j];
                }
              }
            }
            p += seg;
          }
        }
      }
    }
  }
}

// Output positions per im2col block; keeps the block near 1 MiB.
template <typename T>
std::size_t block_cols(std::size_t patch) {
  return std::max<std::size_t>(64, (std::size_t(1) << 20) / (sizeof(T) * std::max<std::size_t>(patch, 1)));
}

template <typename T>
BasicTensor<T> conv_core(const char* op, const BasicTensor<T>& input, const BasicTensor<T>& weight,
                         const BasicTensor<T>& bias, const Geometry& g, Shape out_shape) {
  const std::size_t P = g.out_volume();
  const std::size_t K = g.patch();
  const std::size_t cols = std::min(P, block_cols<T>(K));
  const int iP = int(P), iK = int(K), iCout = int(g.cout), iCin = int(g.cin);
  const int iVin = int(g.in_volume());
  std::vector<T> out(g.batch * g.cout * P);
  const T* x = input.data().data();
  const T* w = weight.data().data();

  std::vector<T> col;
  if (!g.pointwise()) col.resize(cols * K);
  for (std::size_t b = 0; b < g.batch; ++b) {
    const T* xb = x + b * g.cin * g.in_volume();
    T* yb = out.data() + b * g.cout * P;
    if (g.pointwise()) {
      detail::gemm(false, false, iCout, iP, iCin, T(1), w, iCin, xb, iVin, T(0), yb, iP);
    } else {
      for (std::size_t p0 = 0; p0 < P; p0 += cols) {
        const std::size_t n = std::min(cols, P - p0);
        im2col(xb, g, p0, n, col.data());
        detail::gemm(false, false, iCout, int(n), iK, T(1), w, iK, col.data(), int(n), T(0), yb + p0, iP);
      }
    }
    if (bias.defined()) {
      auto bv = bias.data();
      for (std::size_t co = 0; co < g.cout; ++co) {
        T* ys = yb + co * P;
        for (std::size_t p = 0; p < P; ++p) ys[p] += bv[co];
      }
    }
  }

  auto in_impl = input.impl();
  auto w_impl = weight.impl();
  auto b_impl = bias.impl();
  return detail::make_result<T>(
      op, std::move(out_shape), std::move(out), {in_impl, w_impl, b_impl},
      [in_impl, w_impl, b_impl, g](detail::TensorImpl<T>& res) {
        const std::size_t P = g.out_volume();
        const std::size_t K = g.patch();
        const std::size_t cols = std::min(P, block_cols<T>(K));
        const int iP = int(P), iK = int(K), iCout = int(g.cout), iCin = int(g.cin);
        const int iVin = int(g.in_volume());
        const T* gout = res.grad.data();
        const T* x = in_impl->data.data();
        const T* w = w_impl->data.data();
        const bool need_x = in_impl->requires_grad;
        const bool need_w = w_impl->requires_grad;
        const bool need_b = b_impl && b_impl->requires_grad;
        T* dx = need_x ? in_impl->ensure_grad().data() : nullptr;
        T* dw = need_w ? w_impl->ensure_grad().data() : nullptr;
        T* db = need_b ? b_impl->ensure_grad().data() : nullptr;

        std::vector<T> col;
        if (!g.pointwise()) col.resize(cols * K);
        for (std::size_t b = 0; b < g.batch; ++b) {
          const T* gb = gout + b * g.cout * P;
          const T* xb = x + b * g.cin * g.in_volume();
          if (need_b) {
            for (std::size_t co = 0; co < g.cout; ++co) {
              T acc = 0;
              for (std::size_t p = 0; p < P; ++p) acc += gb[co * P + p];
              db[co] += acc;
            }
          }
          if (g.pointwise()) {
            if (need_w) detail::gemm(false, true, iCout, iCin, iP, T(1), gb, iP, xb, iVin, T(1), dw, iCin);
            if (need_x) {
              detail::gemm(true, false, iCin, iP, iCout, T(1), w, iCin, gb, iP, T(1),
                           dx + b * g.cin * g.in_volume(), iVin);
            }
            continue;
          }
          for (std::size_t p0 = 0; p0 < P; p0 += cols) {
            const std::size_t n = std::min(cols, P - p0);
            if (need_w) {
              im2col(xb, g, p0, n, col.data());
              detail::gemm(false, true, iCout, iK, int(n), T(1), gb + p0, iP, col.data(), int(n), T(1), dw, iK);
            }
            if (need_x) {
              detail::gemm(true, false, iK, int(n), iCout, T(1), w, iK, gb + p0, iP, T(0), col.data(), int(n));
              col2im(col.data(), g, p0, n, dx + b * g.cin * g.in_volume());
            }
          }
        }
      });
}

void check_bias(const Shape& bias, std::size_t cout) {
  if (bias.size() != 1 || bias[0] != cout) {
    throw DimensionError("bias shape " + shape_str(bias) + " does not match " + std::to_string(cout) +
                         " output channels");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, std::size_t stride, std::size_t padding,
                      std::size_t dilation) {
  const auto& xs = input.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 4) throw DimensionError("conv2d expects input (B,C,H,W), got " + shape_str(xs));
  if (ws.size() != 4) throw DimensionError("conv2d expects weight (Cout,Cin,kh,kw), got " + shape_str(ws));
  if (ws[1] != xs[1]) {
    throw DimensionError("conv2d channel mismatch: input " + shape_str(xs) + ", weight " + shape_str(ws));
  }
  if (bias.defined()) check_bias(bias.shape(), ws[0]);
  Geometry g;
  g.batch = xs[0];
  g.cin = xs[1];
  g.cout = ws[0];
  g.in = {1, xs[2], xs[3]};
  g.kernel = {1, ws[2], ws[3]};
  g.stride = {1, stride, stride};
  g.pad = {0, padding, padding};
  g.dil = {1, dilation, dilation};
  for (std::size_t a = 0; a < 3; ++a)
    g.out[a] = conv_output_size(g.in[a], g.kernel[a], g.stride[a], g.pad[a], g.dil[a]);
  return conv_core("conv2d", input, weight, bias, g, Shape{g.batch, g.cout, g.out[1], g.out[2]});
}

template <typename T>
BasicTensor<T> conv3d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv3dOptions& options) {
  const auto& xs = input.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 5) throw DimensionError("conv3d expects input (B,C,T,H,W), got " + shape_str(xs));
  if (ws.size() != 5) throw DimensionError("conv3d expects weight (Cout,Cin,kt,kh,kw), got " + shape_str(ws));
  if (ws[1] != xs[1]) {
    throw DimensionError("conv3d channel mismatch: input " + shape_str(xs) + ", weight " + shape_str(ws));
  }
  if (bias.defined()) check_bias(bias.shape(), ws[0]);
  Geometry g;
  g.batch = xs[0];
  g.cin = xs[1];
  g.cout = ws[0];
  g.in = {xs[2], xs[3], xs[4]};
  g.kernel = {ws[2], ws[3], ws[4]};
  g.stride = options.stride;
  g.pad = options.padding;
  g.dil = options.dilation;
  for (std::size_t a = 0; a < 3; ++a)
    g.out[a] = conv_output_size(g.in[a], g.kernel[a], g.stride[a], g.pad[a], g.dil[a]);
  return conv_core("conv3d", input, weight, bias, g,
                   Shape{g.batch, g.cout, g.out[0], g.out[1], g.out[2]});
}

template BasicTensor<float> conv2d(const BasicTensor<float>&, const BasicTensor<float>&,
                                   const BasicTensor<float>&, std::size_t, std::size_t, std::size_t);
template BasicTensor<double> conv2d(const BasicTensor<double>&, const BasicTensor<double>&,
                                    const BasicTensor<double>&, std::size_t, std::size_t, std::size_t);
template BasicTensor<float> conv3d(const BasicTensor<float>&, const BasicTensor<float>&,
                                   const BasicTensor<float>&, const Conv3dOptions&);
template BasicTensor<double> conv3d(const BasicTensor<double>&, const BasicTensor<double>&,
                                    const BasicTensor<double>&, const Conv3dOptions&);

}  // namespace rcsnet
