#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "rcsnet/tensor.hpp"

namespace rcsnet {

// Floor inside sqrt_eps and the orientation denominators of the topology prior.
inline constexpr double kSqrtEps = 1e-6;

struct Conv3dOptions {
  std::array<std::size_t, 3> stride{1, 1, 1};
  std::array<std::size_t, 3> padding{0, 0, 0};
  std::array<std::size_t, 3> dilation{1, 1, 1};
};

// Output extent of a strided, padded, dilated convolution along one axis.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding, std::size_t dilation);

// ---- convolution / pooling -------------------------------------------------

// input (B,Cin,H,W), weight (Cout,Cin,kh,kw), bias (Cout) or undefined.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, std::size_t stride = 1, std::size_t padding = 0,
                      std::size_t dilation = 1);

// input (B,Cin,T,H,W), weight (Cout,Cin,kt,kh,kw), bias (Cout) or undefined.
template <typename T>
BasicTensor<T> conv3d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv3dOptions& options);

// Same-size k x k mean with zero padding and the fixed divisor k*k. Operates
// on the trailing two axes; k must be odd.
template <typename T>
BasicTensor<T> avg_pool2d(const BasicTensor<T>& input, std::size_t k);

enum class ResampleMode { DownAverage, UpLinear };

// Block mean over factor x factor tiles of the trailing two axes.
template <typename T>
BasicTensor<T> downsample_avg(const BasicTensor<T>& input, std::size_t factor);

// Separable linear interpolation of the trailing two axes to (out_h, out_w).
// Sample centers are half-pixel aligned and border samples clamp, so both
// border rows/columns reproduce the source border exactly.
template <typename T>
BasicTensor<T> upsample_linear(const BasicTensor<T>& input, std::size_t out_h, std::size_t out_w);

template <typename T>
BasicTensor<T> resample2d(const BasicTensor<T>& input, std::size_t factor, ResampleMode mode);

// (B,C,H,W) -> (B,C)
template <typename T>
BasicTensor<T> gap(const BasicTensor<T>& input);

// input (B,n), weight (m,n), bias (m) or undefined -> (B,m)
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias);

// ---- pointwise -------------------------------------------------------------

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& x);
// sqrt(x + eps)
template <typename T>
BasicTensor<T> sqrt_eps(const BasicTensor<T>& x, double eps = kSqrtEps);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor);
template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, double value);

// Binary ops take the result shape from `a`. `b` either matches `a`, has the
// same rank with some axes of extent 1, or is a scalar (rank 0 or shape (1)).
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b);

enum class Unary { Sigmoid, Tanh, Relu, Square, Abs, SqrtEps };
enum class Binary { Add, Sub, Mul, Div };

template <typename T>
BasicTensor<T> elementwise(const BasicTensor<T>& x, Unary fn);
template <typename T>
BasicTensor<T> elementwise(const BasicTensor<T>& a, const BasicTensor<T>& b, Binary fn);

// ---- structural ------------------------------------------------------------

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& inputs, std::size_t axis);
template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& x, std::size_t axis, std::size_t start,
                     std::size_t length);
template <typename T>
BasicTensor<T> index_select(const BasicTensor<T>& x, std::size_t axis,
                            const std::vector<std::size_t>& indices);
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, const Shape& shape);
template <typename T>
BasicTensor<T> broadcast_to(const BasicTensor<T>& x, const Shape& shape);
// Inserts a new axis of extent inputs.size() at `axis`.
template <typename T>
BasicTensor<T> stack(const std::vector<BasicTensor<T>>& inputs, std::size_t axis);

// (B,4,H,W) x2 -> (B,8,H,W) with out[2i] = vol[i], out[2i+1] = spd[i].
template <typename T>
BasicTensor<T> interleave(const BasicTensor<T>& vol, const BasicTensor<T>& spd);
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> deinterleave(const BasicTensor<T>& x);

// ---- reductions ------------------------------------------------------------

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> mean_axis(const BasicTensor<T>& x, std::size_t axis);

// ---- recurrent cell --------------------------------------------------------

template <typename T>
struct GruCellParams {
  BasicTensor<T> w_z, u_z, b_z;
  BasicTensor<T> w_r, u_r, b_r;
  BasicTensor<T> w_n, u_n, b_n;
};

// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
// n = tanh(Wn x + r*(Un h) + bn), h' = (1 - z)*n + z*h
template <typename T>
BasicTensor<T> gru_cell_step(const BasicTensor<T>& x, const BasicTensor<T>& h,
                             const GruCellParams<T>& params);

}  // namespace rcsnet
