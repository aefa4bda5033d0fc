#include "rcsnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace rcsnet {

std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_sequence{0};
}  // namespace

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool enabled) { g_grad_enabled = enabled; }

NoGradGuard::NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
NoGradGuard::~NoGradGuard() { GradMode::set_enabled(previous_); }

namespace detail {

std::uint64_t next_sequence() { return g_sequence.fetch_add(1, std::memory_order_relaxed); }

template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                           std::vector<std::shared_ptr<TensorImpl<T>>> inputs,
                           std::function<void(TensorImpl<T>&)> backward_fn) {
  if (numel_of(shape) != data.size()) {
    throw DimensionError(std::string(op) + ": result size does not match shape " + shape_str(shape));
  }
  for (const T& v : data) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value in result");
  }
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (GradMode::enabled()) {
    bool track = std::any_of(inputs.begin(), inputs.end(),
                             [](const auto& in) { return in && in->requires_grad; });
    if (track) {
      auto node = std::make_shared<Node<T>>();
      node->op = op;
      node->seq = next_sequence();
      node->inputs = std::move(inputs);
      node->backward = std::move(backward_fn);
      impl->node = std::move(node);
      impl->requires_grad = true;
    }
  }
  return BasicTensor<T>(std::move(impl));
}

template BasicTensor<float> make_result(const char*, Shape, std::vector<float>,
                                        std::vector<std::shared_ptr<TensorImpl<float>>>,
                                        std::function<void(TensorImpl<float>&)>);
template BasicTensor<double> make_result(const char*, Shape, std::vector<double>,
                                         std::vector<std::shared_ptr<TensorImpl<double>>>,
                                         std::function<void(TensorImpl<double>&)>);

}  // namespace detail

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad) {
  if (numel_of(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(const Shape& shape) {
  return BasicTensor(shape, std::vector<T>(numel_of(shape), T(0)));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(const Shape& shape, T value) {
  return BasicTensor(shape, std::vector<T>(numel_of(shape), value));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value) {
  return BasicTensor(Shape{}, std::vector<T>{value});
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->shape;
}

template <typename T>
std::size_t BasicTensor<T>::size(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw DimensionError("axis out of range for shape " + shape_str(s));
  return s[axis];
}

template <typename T>
std::size_t BasicTensor<T>::numel() const {
  return impl_ ? impl_->data.size() : 0;
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_data() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ContractError("item() on a tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

template <typename T>
T BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw DimensionError("index rank does not match " + shape_str(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw DimensionError("index out of range for " + shape_str(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool value) {
  if (!impl_) throw ContractError("use of an undefined tensor");
  if (impl_->node) throw ContractError("requires_grad can only be changed on leaf tensors");
  impl_->requires_grad = value;
  return *this;
}

template <typename T>
bool BasicTensor<T>::is_leaf() const {
  return impl_ && !impl_->node;
}

template <typename T>
const char* BasicTensor<T>::op_name() const {
  return impl_ && impl_->node ? impl_->node->op : "leaf";
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
  return impl_ && impl_->has_grad();
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient buffer");
  return impl_->grad;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
  if (!has_grad()) throw ContractError("tensor has no gradient buffer");
  return impl_->grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  if (impl_ && impl_->has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(shape(), impl_->data, false);
}

template class BasicTensor<float>;
template class BasicTensor<double>;

namespace {

template <typename T>
std::vector<detail::TensorImpl<T>*> reachable(const BasicTensor<T>& root) {
  std::vector<detail::TensorImpl<T>*> found;
  std::unordered_set<const detail::TensorImpl<T>*> seen;
  std::vector<detail::TensorImpl<T>*> stack;
  if (root.impl() && root.impl()->node) stack.push_back(root.impl().get());
  while (!stack.empty()) {
    auto* cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    found.push_back(cur);
    for (const auto& in : cur->node->inputs) {
      if (in && in->requires_grad && in->node && !seen.count(in.get())) stack.push_back(in.get());
    }
  }
  std::sort(found.begin(), found.end(),
            [](const auto* a, const auto* b) { return a->node->seq < b->node->seq; });
  return found;
}

}  // namespace

template <typename T>
std::vector<GraphRecord> collect_graph(const BasicTensor<T>& root) {
  std::vector<GraphRecord> out;
  for (auto* impl : reachable(root)) out.push_back({impl->node->seq, impl->node->op});
  return out;
}

template <typename T>
std::vector<GraphRecord> backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  std::vector<GraphRecord> visited;
  auto* root = loss.impl().get();
  if (!root->requires_grad) return visited;
  if (!root->node) {
    root->ensure_grad()[0] += T(1);
    return visited;
  }
  auto order = reachable(loss);
  for (auto* impl : order) impl->grad.assign(impl->data.size(), T(0));
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* impl = *it;
    impl->node->backward(*impl);
    visited.push_back({impl->node->seq, impl->node->op});
  }
  return visited;
}

template <typename T>
void zero_grads(std::span<BasicTensor<T>> tensors) {
  for (auto& t : tensors) t.zero_grad();
}

template std::vector<GraphRecord> collect_graph(const BasicTensor<float>&);
template std::vector<GraphRecord> collect_graph(const BasicTensor<double>&);
template std::vector<GraphRecord> backward(const BasicTensor<float>&);
template std::vector<GraphRecord> backward(const BasicTensor<double>&);
template void zero_grads(std::span<BasicTensor<float>>);
template void zero_grads(std::span<BasicTensor<double>>);

}  // namespace rcsnet
