#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rcsnet/ops.hpp"
#include "rcsnet/tensor.hpp"

namespace rcsnet {

template <typename T>
using NamedTensor = std::pair<std::string, BasicTensor<T>>;

template <typename T>
using ParamVisitor = std::function<void(const std::string&, BasicTensor<T>&)>;

// Seeded parameter factory. Values are drawn in double and rounded to the
// target precision, so a float and a double model built from the same seed
// agree to float rounding.
class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : rng_(seed) {}

  template <typename T>
  BasicTensor<T> uniform(const Shape& shape, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> v(numel_of(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng_));
    return BasicTensor<T>(shape, std::move(v), true);
  }

  template <typename T>
  BasicTensor<T> constant(const Shape& shape, double value) {
    return BasicTensor<T>(shape, std::vector<T>(numel_of(shape), static_cast<T>(value)), true);
  }

 private:
  std::mt19937_64 rng_;
};

template <typename T>
struct Conv2dLayer {
  BasicTensor<T> weight, bias;
  std::size_t padding = 0;

  // Uniform fan-in initialization, bound 1/sqrt(cin*k*k); "same" padding.
  static Conv2dLayer make(ParamInit& init, std::size_t cout, std::size_t cin, std::size_t k) {
    const double bound = 1.0 / std::sqrt(double(cin * k * k));
    Conv2dLayer l;
    l.weight = init.uniform<T>({cout, cin, k, k}, bound);
    l.bias = init.uniform<T>({cout}, bound);
    l.padding = k / 2;
    return l;
  }

  static Conv2dLayer zeros(std::size_t cout, std::size_t cin, std::size_t k) {
    Conv2dLayer l;
    l.weight = BasicTensor<T>::zeros({cout, cin, k, k}).set_requires_grad(true);
    l.bias = BasicTensor<T>::zeros({cout}).set_requires_grad(true);
    l.padding = k / 2;
    return l;
  }

  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return conv2d(x, weight, bias, 1, padding, 1); }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

template <typename T>
struct Conv3dLayer {
  BasicTensor<T> weight, bias;
  Conv3dOptions options;

  // kt x k x k kernel with temporal dilation; padding keeps (T,H,W).
  static Conv3dLayer make(ParamInit& init, std::size_t cout, std::size_t cin, std::size_t kt,
                          std::size_t k, std::size_t dilation_t = 1) {
    const double bound = 1.0 / std::sqrt(double(cin * kt * k * k));
    Conv3dLayer l;
    l.weight = init.uniform<T>({cout, cin, kt, k, k}, bound);
    l.bias = init.uniform<T>({cout}, bound);
    l.options.dilation = {dilation_t, 1, 1};
    l.options.padding = {dilation_t * (kt - 1) / 2, k / 2, k / 2};
    return l;
  }

  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return conv3d(x, weight, bias, options); }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

template <typename T>
struct LinearLayer {
  BasicTensor<T> weight, bias;  // bias may be undefined

  static LinearLayer make(ParamInit& init, std::size_t out, std::size_t in, bool with_bias) {
    const double bound = 1.0 / std::sqrt(double(in));
    LinearLayer l;
    l.weight = init.uniform<T>({out, in}, bound);
    if (with_bias) l.bias = init.uniform<T>({out}, bound);
    return l;
  }

  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return linear(x, weight, bias); }

  void visit(const std::string& prefix, const ParamVisitor<T>& f) {
    f(prefix + ".weight", weight);
    if (bias.defined()) f(prefix + ".bias", bias);
  }
};

}  // namespace rcsnet
