#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "gemm.hpp"
#include "rcsnet/ops.hpp"

namespace rcsnet {

namespace {

template <typename T>
using ImplPtr = std::shared_ptr<detail::TensorImpl<T>>;

// Maps every flat index of `target` onto the flat index of `operand` under
// the rank-preserving broadcast rule. Empty result means identical shapes.
std::shared_ptr<std::vector<std::size_t>> broadcast_map(const Shape& target, const Shape& operand,
                                                        const char* op) {
  if (operand == target) return nullptr;
  const std::size_t n = numel_of(target);
  if (numel_of(operand) == 1 && (operand.empty() || operand == Shape{1})) {
    return std::make_shared<std::vector<std::size_t>>(n, 0);
  }
  if (operand.size() != target.size()) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(operand) + " to " +
                         shape_str(target));
  }
  std::vector<std::size_t> stride(target.size(), 0);
  std::size_t acc = 1;
  for (std::size_t a = target.size(); a-- > 0;) {
    if (operand[a] != target[a] && operand[a] != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(operand) + " to " +
                           shape_str(target));
    }
    stride[a] = operand[a] == 1 ? 0 : acc;
    acc *= operand[a];
  }
  auto map = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> counter(target.size(), 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (*map)[i] = off;
    for (std::size_t a = target.size(); a-- > 0;) {
      ++counter[a];
      off += stride[a];
      if (counter[a] < target[a]) break;
      off -= stride[a] * counter[a];
      counter[a] = 0;
    }
  }
  return map;
}

template <typename T, typename Fwd, typename Bwd>
BasicTensor<T> unary(const char* op, const BasicTensor<T>& x, Fwd fwd, Bwd bwd) {
  auto xs = x.data();
  std::vector<T> out(xs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xs[i]);
  auto in = x.impl();
  return detail::make_result<T>(op, x.shape(), std::move(out), {in},
                                [in, bwd](detail::TensorImpl<T>& res) {
                                  auto& dx = in->ensure_grad();
                                  for (std::size_t i = 0; i < dx.size(); ++i)
                                    dx[i] += res.grad[i] * bwd(in->data[i], res.data[i]);
                                });
}

template <typename T>
BasicTensor<T> binary(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b, Binary kind) {
  auto map = broadcast_map(a.shape(), b.shape(), op);
  auto av = a.data();
  auto bv = b.data();
  std::vector<T> out(av.size());
  auto bidx = [&map](std::size_t i) { return map ? (*map)[i] : i; };
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = av[i], y = bv[bidx(i)];
    switch (kind) {
      case Binary::Add: out[i] = x + y; break;
      case Binary::Sub: out[i] = x - y; break;
      case Binary::Mul: out[i] = x * y; break;
      case Binary::Div: out[i] = x / y; break;
    }
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return detail::make_result<T>(
      op, a.shape(), std::move(out), {ai, bi}, [ai, bi, map, kind](detail::TensorImpl<T>& res) {
        auto bidx = [&map](std::size_t i) { return map ? (*map)[i] : i; };
        const std::size_t n = res.grad.size();
        const T* g = res.grad.data();
        if (ai->requires_grad) {
          auto& da = ai->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            switch (kind) {
              case Binary::Add:
              case Binary::Sub: da[i] += g[i]; break;
              case Binary::Mul: da[i] += g[i] * bi->data[bidx(i)]; break;
              case Binary::Div: da[i] += g[i] / bi->data[bidx(i)]; break;
            }
          }
        }
        if (bi->requires_grad) {
          auto& db = bi->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = bidx(i);
            switch (kind) {
              case Binary::Add: db[j] += g[i]; break;
              case Binary::Sub: db[j] -= g[i]; break;
              case Binary::Mul: db[j] += g[i] * ai->data[i]; break;
              case Binary::Div: {
                const T y = bi->data[j];
                db[j] -= g[i] * ai->data[i] / (y * y);
                break;
              }
            }
          }
        }
      });
}

std::size_t outer_of(const Shape& s, std::size_t axis) {
  std::size_t n = 1;
  for (std::size_t a = 0; a < axis; ++a) n *= s[a];
  return n;
}

std::size_t inner_of(const Shape& s, std::size_t axis) {
  std::size_t n = 1;
  for (std::size_t a = axis + 1; a < s.size(); ++a) n *= s[a];
  return n;
}

}  // namespace

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return unary<T>(
      "sigmoid", x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) {
  return unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& x) {
  return unary<T>(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
BasicTensor<T> sqrt_eps(const BasicTensor<T>& x, double eps) {
  const T e = T(eps);
  return unary<T>(
      "sqrt_eps", x, [e](T v) { return std::sqrt(v + e); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor) {
  const T f = T(factor);
  return unary<T>(
      "scale", x, [f](T v) { return v * f; }, [f](T, T) { return f; });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, double value) {
  const T c = T(value);
  return unary<T>(
      "add_scalar", x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary("add", a, b, Binary::Add);
}
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary("sub", a, b, Binary::Sub);
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary("mul", a, b, Binary::Mul);
}
template <typename T>
BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary("div", a, b, Binary::Div);
}

template <typename T>
BasicTensor<T> elementwise(const BasicTensor<T>& x, Unary fn) {
  switch (fn) {
    case Unary::Sigmoid: return sigmoid(x);
    case Unary::Tanh: return tanh(x);
    case Unary::Relu: return relu(x);
    case Unary::Square: return square(x);
    case Unary::Abs: return abs(x);
    case Unary::SqrtEps: return sqrt_eps(x);
  }
  throw ParameterError("unknown unary function");
}

template <typename T>
BasicTensor<T> elementwise(const BasicTensor<T>& a, const BasicTensor<T>& b, Binary fn) {
  switch (fn) {
    case Binary::Add: return add(a, b);
    case Binary::Sub: return sub(a, b);
    case Binary::Mul: return mul(a, b);
    case Binary::Div: return div(a, b);
  }
  throw ParameterError("unknown binary function");
}

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& inputs, std::size_t axis) {
  if (inputs.empty()) throw ParameterError("concat of an empty list");
  const Shape& first = inputs.front().shape();
  if (axis >= first.size()) throw DimensionError("concat axis out of range for " + shape_str(first));
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& t : inputs) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t a = 0; ok && a < s.size(); ++a) ok = a == axis || s[a] == first[a];
    if (!ok) throw DimensionError("concat shape mismatch: " + shape_str(first) + " vs " + shape_str(s));
    shape[axis] += s[axis];
  }
  const std::size_t outer = outer_of(first, axis), inner = inner_of(first, axis);
  const std::size_t out_row = shape[axis] * inner;
  std::vector<T> out(numel_of(shape));
  std::vector<ImplPtr<T>> impls;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& t : inputs) {
    const std::size_t row = t.shape()[axis] * inner;
    auto src = t.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src.data() + o * row, row, out.data() + o * out_row + off);
    impls.push_back(t.impl());
    offsets.push_back(off);
    off += row;
  }
  return detail::make_result<T>("concat", std::move(shape), std::move(out), impls,
                                [impls, offsets, outer, out_row](detail::TensorImpl<T>& res) {
                                  for (std::size_t k = 0; k < impls.size(); ++k) {
                                    if (!impls[k]->requires_grad) continue;
                                    auto& dx = impls[k]->ensure_grad();
                                    const std::size_t row = dx.size() / outer;
                                    for (std::size_t o = 0; o < outer; ++o)
                                      for (std::size_t i = 0; i < row; ++i)
                                        dx[o * row + i] += res.grad[o * out_row + offsets[k] + i];
                                  }
                                });
}

template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw DimensionError("slice axis out of range for " + shape_str(s));
  if (length == 0 || start + length > s[axis]) {
    throw DimensionError("slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                         ") out of range for " + shape_str(s));
  }
  Shape shape = s;
  shape[axis] = length;
  const std::size_t outer = outer_of(s, axis), inner = inner_of(s, axis);
  const std::size_t in_row = s[axis] * inner, out_row = length * inner;
  std::vector<T> out(outer * out_row);
  auto src = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(src.data() + o * in_row + start * inner, out_row, out.data() + o * out_row);
  auto in = x.impl();
  return detail::make_result<T>("slice", std::move(shape), std::move(out), {in},
                                [in, outer, in_row, out_row, start, inner](detail::TensorImpl<T>& res) {
                                  auto& dx = in->ensure_grad();
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t i = 0; i < out_row; ++i)
                                      dx[o * in_row + start * inner + i] += res.grad[o * out_row + i];
                                });
}

template <typename T>
BasicTensor<T> index_select(const BasicTensor<T>& x, std::size_t axis,
                            const std::vector<std::size_t>& indices) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw DimensionError("index_select axis out of range for " + shape_str(s));
  if (indices.empty()) throw ParameterError("index_select with no indices");
  for (std::size_t i : indices)
    if (i >= s[axis]) throw DimensionError("index_select index out of range for " + shape_str(s));
  Shape shape = s;
  shape[axis] = indices.size();
  const std::size_t outer = outer_of(s, axis), inner = inner_of(s, axis);
  std::vector<T> out(numel_of(shape));
  auto src = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < indices.size(); ++k)
      std::copy_n(src.data() + (o * s[axis] + indices[k]) * inner, inner,
                  out.data() + (o * indices.size() + k) * inner);
  auto in = x.impl();
  const std::size_t extent = s[axis];
  return detail::make_result<T>("index_select", std::move(shape), std::move(out), {in},
                                [in, indices, outer, inner, extent](detail::TensorImpl<T>& res) {
                                  auto& dx = in->ensure_grad();
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t k = 0; k < indices.size(); ++k)
                                      for (std::size_t i = 0; i < inner; ++i)
                                        dx[(o * extent + indices[k]) * inner + i] +=
                                            res.grad[(o * indices.size() + k) * inner + i];
                                });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, const Shape& shape) {
  if (numel_of(shape) != x.numel()) {
    throw DimensionError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  auto in = x.impl();
  std::vector<T> out(x.data().begin(), x.data().end());
  return detail::make_result<T>("reshape", shape, std::move(out), {in},
                                [in](detail::TensorImpl<T>& res) {
                                  auto& dx = in->ensure_grad();
                                  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += res.grad[i];
                                });
}

template <typename T>
BasicTensor<T> broadcast_to(const BasicTensor<T>& x, const Shape& shape) {
  auto map = broadcast_map(shape, x.shape(), "broadcast_to");
  if (!map) return reshape(x, shape);
  auto src = x.data();
  std::vector<T> out(map->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[(*map)[i]];
  auto in = x.impl();
  return detail::make_result<T>("broadcast_to", shape, std::move(out), {in},
                                [in, map](detail::TensorImpl<T>& res) {
                                  auto& dx = in->ensure_grad();
                                  for (std::size_t i = 0; i < map->size(); ++i) dx[(*map)[i]] += res.grad[i];
                                });
}

template <typename T>
BasicTensor<T> stack(const std::vector<BasicTensor<T>>& inputs, std::size_t axis) {
  if (inputs.empty()) throw ParameterError("stack of an empty list");
  std::vector<BasicTensor<T>> parts;
  parts.reserve(inputs.size());
  for (const auto& t : inputs) {
    Shape s = t.shape();
    if (axis > s.size()) throw DimensionError("stack axis out of range for " + shape_str(s));
    s.insert(s.begin() + std::ptrdiff_t(axis), 1);
    parts.push_back(reshape(t, s));
  }
  return concat(parts, axis);
}

template <typename T>
BasicTensor<T> interleave(const BasicTensor<T>& vol, const BasicTensor<T>& spd) {
  const Shape& vs = vol.shape();
  if (vs.size() != 4 || vs[1] != 4 || spd.shape() != vs) {
    throw DimensionError("interleave expects two (B,4,H,W) tensors, got " + shape_str(vs) + " and " +
                         shape_str(spd.shape()));
  }
  const std::size_t batch = vs[0], hw = vs[2] * vs[3];
  std::vector<T> out(batch * 8 * hw);
  auto v = vol.data();
  auto s = spd.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < 4; ++i) {
      std::copy_n(v.data() + (b * 4 + i) * hw, hw, out.data() + (b * 8 + 2 * i) * hw);
      std::copy_n(s.data() + (b * 4 + i) * hw, hw, out.data() + (b * 8 + 2 * i + 1) * hw);
    }
  auto vi = vol.impl();
  auto si = spd.impl();
  return detail::make_result<T>(
      "interleave", Shape{batch, 8, vs[2], vs[3]}, std::move(out), {vi, si},
      [vi, si, batch, hw](detail::TensorImpl<T>& res) {
        for (std::size_t part = 0; part < 2; ++part) {
          auto& impl = part == 0 ? vi : si;
          if (!impl->requires_grad) continue;
          auto& dx = impl->ensure_grad();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < 4; ++i)
              for (std::size_t p = 0; p < hw; ++p)
                dx[(b * 4 + i) * hw + p] += res.grad[(b * 8 + 2 * i + part) * hw + p];
        }
      });
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> deinterleave(const BasicTensor<T>& x) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != 8) throw DimensionError("deinterleave expects (B,8,H,W), got " + shape_str(s));
  return {index_select(x, 1, {0, 2, 4, 6}), index_select(x, 1, {1, 3, 5, 7})};
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  auto in = x.impl();
  return detail::make_result<T>("sum", Shape{}, std::vector<T>{acc}, {in},
                                [in](detail::TensorImpl<T>& res) {
                                  auto& dx = in->ensure_grad();
                                  for (auto& d : dx) d += res.grad[0];
                                });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  const std::size_t n = x.numel();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  T acc = 0;
  for (T v : x.data()) acc += v;
  auto in = x.impl();
  return detail::make_result<T>("mean", Shape{}, std::vector<T>{acc / T(n)}, {in},
                                [in, n](detail::TensorImpl<T>& res) {
                                  auto& dx = in->ensure_grad();
                                  const T g = res.grad[0] / T(n);
                                  for (auto& d : dx) d += g;
                                });
}

template <typename T>
BasicTensor<T> mean_axis(const BasicTensor<T>& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw DimensionError("mean_axis axis out of range for " + shape_str(s));
  const std::size_t outer = outer_of(s, axis), inner = inner_of(s, axis), extent = s[axis];
  Shape shape = s;
  shape.erase(shape.begin() + std::ptrdiff_t(axis));
  std::vector<T> out(outer * inner, T(0));
  auto src = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < extent; ++k)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += src[(o * extent + k) * inner + i];
  for (auto& v : out) v /= T(extent);
  auto in = x.impl();
  return detail::make_result<T>("mean_axis", std::move(shape), std::move(out), {in},
                                [in, outer, inner, extent](detail::TensorImpl<T>& res) {
                                  auto& dx = in->ensure_grad();
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t k = 0; k < extent; ++k)
                                      for (std::size_t i = 0; i < inner; ++i)
                                        dx[(o * extent + k) * inner + i] += res.grad[o * inner + i] / T(extent);
                                });
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1]) {
    throw DimensionError("linear: input " + shape_str(xs) + " incompatible with weight " + shape_str(ws));
  }
  if (bias.defined() && bias.shape() != Shape{ws[0]}) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(ws));
  }
  const int B = int(xs[0]), n = int(xs[1]), m = int(ws[0]);
  std::vector<T> out(std::size_t(B) * std::size_t(m));
  detail::gemm(false, true, B, m, n, T(1), input.data().data(), n, weight.data().data(), n, T(0),
               out.data(), m);
  if (bias.defined()) {
    auto bv = bias.data();
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < m; ++j) out[std::size_t(b * m + j)] += bv[std::size_t(j)];
  }
  auto xi = input.impl();
  auto wi = weight.impl();
  auto bi = bias.impl();
  return detail::make_result<T>(
      "linear", Shape{xs[0], ws[0]}, std::move(out), {xi, wi, bi},
      [xi, wi, bi, B, n, m](detail::TensorImpl<T>& res) {
        const T* g = res.grad.data();
        if (xi->requires_grad)
          detail::gemm(false, false, B, n, m, T(1), g, m, wi->data.data(), n, T(1),
                       xi->ensure_grad().data(), n);
        if (wi->requires_grad)
          detail::gemm(true, false, m, n, B, T(1), g, m, xi->data.data(), n, T(1),
                       wi->ensure_grad().data(), n);
        if (bi && bi->requires_grad) {
          auto& db = bi->ensure_grad();
          for (int b = 0; b < B; ++b)
            for (int j = 0; j < m; ++j) db[std::size_t(j)] += g[b * m + j];
        }
      });
}

template <typename T>
BasicTensor<T> gru_cell_step(const BasicTensor<T>& x, const BasicTensor<T>& h, const GruCellParams<T>& p) {
  if (x.dim() != 2 || h.dim() != 2 || x.size(0) != h.size(0)) {
    throw DimensionError("gru_cell_step: x " + shape_str(x.shape()) + " and h " + shape_str(h.shape()) +
                         " must be (B,n) and (B,m)");
  }
  const BasicTensor<T> none;
  auto z = sigmoid(add(linear(x, p.w_z, p.b_z), linear(h, p.u_z, none)));
  auto r = sigmoid(add(linear(x, p.w_r, p.b_r), linear(h, p.u_r, none)));
  auto n = tanh(add(linear(x, p.w_n, p.b_n), mul(r, linear(h, p.u_n, none))));
  if (n.shape() != h.shape()) {
    throw DimensionError("gru_cell_step: hidden size mismatch " + shape_str(n.shape()) + " vs " +
                         shape_str(h.shape()));
  }
  return add(n, mul(z, sub(h, n)));
}

#define RCSNET_INSTANTIATE(T)                                                                           \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                               \
  template BasicTensor<T> tanh(const BasicTensor<T>&);                                                  \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                  \
  template BasicTensor<T> square(const BasicTensor<T>&);                                                \
  template BasicTensor<T> abs(const BasicTensor<T>&);                                                   \
  template BasicTensor<T> sqrt_eps(const BasicTensor<T>&, double);                                      \
  template BasicTensor<T> scale(const BasicTensor<T>&, double);                                         \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, double);                                    \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                            \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                            \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                            \
  template BasicTensor<T> div(const BasicTensor<T>&, const BasicTensor<T>&);                            \
  template BasicTensor<T> elementwise(const BasicTensor<T>&, Unary);                                    \
  template BasicTensor<T> elementwise(const BasicTensor<T>&, const BasicTensor<T>&, Binary);            \
  template BasicTensor<T> concat(const std::vector<BasicTensor<T>>&, std::size_t);                      \
  template BasicTensor<T> slice(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t);          \
  template BasicTensor<T> index_select(const BasicTensor<T>&, std::size_t,                              \
                                       const std::vector<std::size_t>&);                                \
  template BasicTensor<T> reshape(const BasicTensor<T>&, const Shape&);                                 \
  template BasicTensor<T> broadcast_to(const BasicTensor<T>&, const Shape&);                            \
  template BasicTensor<T> stack(const std::vector<BasicTensor<T>>&, std::size_t);                       \
  template BasicTensor<T> interleave(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template std::pair<BasicTensor<T>, BasicTensor<T>> deinterleave(const BasicTensor<T>&);               \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                   \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                                  \
  template BasicTensor<T> mean_axis(const BasicTensor<T>&, std::size_t);                                \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> gru_cell_step(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                        const GruCellParams<T>&);

RCSNET_INSTANTIATE(float)
RCSNET_INSTANTIATE(double)
#undef RCSNET_INSTANTIATE

}  // namespace rcsnet
