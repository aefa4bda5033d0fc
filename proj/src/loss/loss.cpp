#include "rcsnet/loss.hpp"

#include <string>

#include "rcsnet/log.hpp"
#include "rcsnet/ops.hpp"

namespace rcsnet {

void LossWeights::validate() const {
  if (lambda_s < 0 || lambda_t < 0 || lambda_e < 0 || tau < 0) {
    throw ConfigError("loss weights and tau must be non-negative");
  }
  if (gamma < 1) throw ConfigError("road weight gamma must be >= 1");
}

namespace {

template <typename T>
void check_pair(const BasicTensor<T>& yhat, const BasicTensor<T>& y, const char* what) {
  if (yhat.dim() != 5) {
    throw DimensionError(std::string(what) + " expects (B,T_out,C,H,W), got " + shape_str(yhat.shape()));
  }
  if (yhat.shape() != y.shape()) {
    throw DimensionError(std::string(what) + ": prediction " + shape_str(yhat.shape()) + " vs target " +
                         shape_str(y.shape()));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> pred_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y) {
  check_pair(yhat, y, "pred_loss");
  return mean(square(sub(yhat, y)));
}

template <typename T>
BasicTensor<T> road_weight_map(const RoadMap& road, double gamma, double tau) {
  const std::size_t h = road.height(), w = road.width();
  std::vector<T> v(h * w);
  const auto r = road.grid.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(r[i] > tau ? gamma : 1.0);
  return BasicTensor<T>({1, 1, 1, h, w}, std::move(v));
}

template <typename T>
BasicTensor<T> struct_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y, const RoadMap& road,
                           const LossWeights& w) {
  check_pair(yhat, y, "struct_loss");
  if (yhat.size(3) != road.height() || yhat.size(4) != road.width()) {
    throw DimensionError("struct_loss: road " + shape_str(road.grid.shape()) + " does not match " +
                         shape_str(yhat.shape()));
  }
  return mean(mul(square(sub(yhat, y)), road_weight_map<T>(road, w.gamma, w.tau)));
}

template <typename T>
BasicTensor<T> temp_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y) {
  check_pair(yhat, y, "temp_loss");
  const std::size_t t = yhat.size(1);
  if (t < 2) {
    log::info("temp_loss: T_out < 2, temporal term is 0");
    return BasicTensor<T>::scalar(T(0));
  }
  // (dYhat - dY) == d(Yhat - Y)
  const auto d = sub(yhat, y);
  return mean(square(sub(slice(d, 1, 1, t - 1), slice(d, 1, 0, t - 1))));
}

template <typename T>
BasicTensor<T> edge_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y) {
  check_pair(yhat, y, "edge_loss");
  const std::size_t h = yhat.size(3), w = yhat.size(4);
  if (h < 2 || w < 2) throw DimensionError("edge_loss requires H, W >= 2, got " + shape_str(yhat.shape()));
  const auto d = sub(yhat, y);
  const auto gx = sub(slice(d, 4, 1, w - 1), slice(d, 4, 0, w - 1));
  const auto gy = sub(slice(d, 3, 1, h - 1), slice(d, 3, 0, h - 1));
  return add(mean(abs(gx)), mean(abs(gy)));
}

template <typename T>
LossBreakdown<T> total_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y, const RoadMap& road,
                            const LossWeights& w) {
  w.validate();
  const auto lp = pred_loss(yhat, y);
  const auto ls = struct_loss(yhat, y, road, w);
  const auto lt = temp_loss(yhat, y);
  const auto le = edge_loss(yhat, y);
  LossBreakdown<T> out;
  out.total = add(add(add(lp, scale(ls, w.lambda_s)), scale(lt, w.lambda_t)), scale(le, w.lambda_e));
  out.pred = lp.item();
  out.structure = ls.item();
  out.temp = lt.item();
  out.edge = le.item();
  return out;
}

#define RCSNET_INSTANTIATE(T)                                                                           \
  template BasicTensor<T> pred_loss(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> road_weight_map<T>(const RoadMap&, double, double);                          \
  template BasicTensor<T> struct_loss(const BasicTensor<T>&, const BasicTensor<T>&, const RoadMap&,     \
                                      const LossWeights&);                                              \
  template BasicTensor<T> temp_loss(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> edge_loss(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template LossBreakdown<T> total_loss(const BasicTensor<T>&, const BasicTensor<T>&, const RoadMap&,    \
                                       const LossWeights&);

RCSNET_INSTANTIATE(float)
RCSNET_INSTANTIATE(double)
#undef RCSNET_INSTANTIATE

}  // namespace rcsnet
