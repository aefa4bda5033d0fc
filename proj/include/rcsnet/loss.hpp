#pragma once

#include "rcsnet/tensor.hpp"
#include "rcsnet/topology.hpp"

namespace rcsnet {

inline constexpr double kDefaultTau = 0.05;

struct LossWeights {
  double lambda_s = 0.5;
  double lambda_t = 0.2;
  double lambda_e = 0.1;
  double gamma = 5.0;  // weight on road cells
  double tau = kDefaultTau;

  // Throws ConfigError unless all >= 0 and gamma >= 1.
  void validate() const;
};

template <typename T>
struct LossBreakdown {
  BasicTensor<T> total;  // differentiable scalar
  double pred = 0, structure = 0, temp = 0, edge = 0;

  double total_value() const { return total.defined() ? double(total.item()) : 0.0; }
};

// All inputs are (B,T_out,C,H,W).
template <typename T>
BasicTensor<T> pred_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y);

// Spatial weight map (1,1,1,H,W): gamma where road > tau, else 1.
template <typename T>
BasicTensor<T> road_weight_map(const RoadMap& road, double gamma, double tau);

template <typename T>
BasicTensor<T> struct_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y, const RoadMap& road,
                           const LossWeights& w);

// Returns 0 (with an info notice) when T_out < 2.
template <typename T>
BasicTensor<T> temp_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y);

// Forward differences along W and H, each reduced by its mean.
template <typename T>
BasicTensor<T> edge_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y);

template <typename T>
LossBreakdown<T> total_loss(const BasicTensor<T>& yhat, const BasicTensor<T>& y, const RoadMap& road,
                            const LossWeights& w);

}  // namespace rcsnet
