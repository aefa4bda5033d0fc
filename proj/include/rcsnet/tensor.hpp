#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcsnet {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

// Error taxonomy shared by every module. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DimensionError : public Error {
 public:
  using Error::Error;
};
class ParameterError : public Error {
 public:
  using Error::Error;
};
class NumericError : public Error {
 public:
  using Error::Error;
};
class ContractError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class ValidationError : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  using Error::Error;
};

// Thread-local switch for graph recording. Validation and inference run with
// recording disabled so no node (and no gradient buffer) is ever created.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

template <typename T>
struct TensorImpl;

// One recorded operation. `seq` is the global forward execution index, so
// sorting by it yields a topological order of the graph.
template <typename T>
struct Node {
  const char* op = "";
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  std::function<void(TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::shared_ptr<Node<T>> node;

  bool has_grad() const { return !grad.empty() && grad.size() == data.size(); }
  std::vector<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

std::uint64_t next_sequence();

}  // namespace detail

template <typename T>
class BasicTensor {
 public:
  using value_type = T;
  using Impl = detail::TensorImpl<T>;

  BasicTensor() = default;
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);
  explicit BasicTensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static BasicTensor zeros(const Shape& shape);
  static BasicTensor full(const Shape& shape, T value);
  static BasicTensor scalar(T value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> data() const;
  // Direct write access; meant for leaves (parameters, inputs). Writing into a
  // recorded intermediate invalidates its graph.
  std::span<T> mutable_data();
  T item() const;
  T at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  BasicTensor& set_requires_grad(bool value);
  bool is_leaf() const;
  const char* op_name() const;

  bool has_grad() const;
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  BasicTensor detach() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(numel());
    auto src = data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(src[i]);
    return BasicTensor<U>(shape(), std::move(out), requires_grad());
  }

  const std::shared_ptr<Impl>& impl() const { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

struct GraphRecord {
  std::uint64_t seq;
  const char* op;
};

// Nodes reachable from `root` through gradient-carrying inputs, in forward
// execution order.
template <typename T>
std::vector<GraphRecord> collect_graph(const BasicTensor<T>& root);

// Populates grad buffers of every requires_grad leaf reachable from `loss`.
// Leaf gradients accumulate across calls; intermediate buffers are rebuilt.
// Returns the nodes in the order their backward functions ran.
template <typename T>
std::vector<GraphRecord> backward(const BasicTensor<T>& loss);

template <typename T>
void zero_grads(std::span<BasicTensor<T>> tensors);

namespace detail {

// Builds an operation result, validates finiteness and records a node when
// gradient tracking applies.
template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                           std::vector<std::shared_ptr<TensorImpl<T>>> inputs,
                           std::function<void(TensorImpl<T>&)> backward_fn);

}  // namespace detail

}  // namespace rcsnet
