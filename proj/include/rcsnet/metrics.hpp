#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rcsnet/tensor.hpp"
#include "rcsnet/topology.hpp"

namespace rcsnet {

inline constexpr double kThetaAct = 1e-3;
inline constexpr std::size_t kSsimWindow = 7;
inline constexpr std::size_t kMinutesPerFrame = 5;

struct ErrorStats {
  double mae = 0, mse = 0, rmse = 0;
};

// One pass over equal-shaped tensors; rmse = sqrt(mse).
ErrorStats error_stats(const Tensor& yhat, const Tensor& y);
double mae(const Tensor& yhat, const Tensor& y);
double mse(const Tensor& yhat, const Tensor& y);
double rmse(const Tensor& yhat, const Tensor& y);

// Frame index ceil(minutes / minutes_per_frame) - 1.
std::size_t horizon_frame(std::size_t minutes, std::size_t minutes_per_frame);

struct HorizonMetrics {
  std::size_t minutes = 0;
  std::size_t frames = 0;  // frames aggregated, index + 1
  ErrorStats error;
};

// Inputs (T,C,H,W) or (B,T,C,H,W). Cumulative over frames 1..index+1.
std::vector<HorizonMetrics> horizon_slice(const Tensor& yhat, const Tensor& y, std::size_t minutes_per_frame,
                                          const std::vector<std::size_t>& horizons);

// (C,H,W) -> (H,W) channel mean.
Tensor channel_mean(const Tensor& frame);

// Cells whose channel mean exceeds theta_act; frame is (C,H,W).
std::size_t nonzero_cells(const Tensor& frame, double theta_act = kThetaAct);

struct RoadStructure {
  double road_mae = 0;
  double offroad_rate = 0;
  double coverage_recall = 0;
  // Raw counts, so reports can reduce by summation.
  double road_abs_sum = 0;
  std::size_t road_elements = 0;
  std::size_t active_pred = 0, active_pred_offroad = 0;
  std::size_t active_gt_road = 0, active_both_road = 0;
};

// Denormalized (T,C,H,W) or (B,T,C,H,W) inputs, road (1,H,W).
RoadStructure road_structure_metrics(const Tensor& yhat, const Tensor& y, const RoadMap& road, double tau,
                                     double theta_act = kThetaAct);

// Single-channel (H,W) maps, H, W >= 7. Uniform 7x7 windows over valid
// positions, population moments, C1 = (0.01 L)^2, C2 = (0.03 L)^2 with
// L = max(max truth, 1e-6).
double ssim(const Tensor& pred, const Tensor& truth);

// x (C,T_in,H,W) -> (T_out,C,H,W), the temporal mean repeated.
Tensor historical_average(const Tensor& x, std::size_t t_out);

struct MetricReport {
  std::string model;
  std::string split;
  std::size_t samples = 0;
  ErrorStats error;
  std::vector<HorizonMetrics> horizons;
  double road_mae = 0;
  double offroad_activation_rate = 0;
  double road_coverage_recall = 0;
  std::vector<double> ssim_per_frame;
  std::vector<std::size_t> nonzero_cells_pred, nonzero_cells_gt;

  std::string to_json() const;
  std::string horizon_csv() const;
};

// Sums per-sample error and count accumulators into a MetricReport.
class MetricAccumulator {
 public:
  MetricAccumulator(std::size_t t_out, double tau, double theta_act, std::size_t minutes_per_frame,
                    std::vector<std::size_t> horizons);

  // Denormalized, cropped (T_out,C,H,W) forecast and target of one sample.
  void add(const Tensor& yhat, const Tensor& y, const RoadMap& road);

  MetricReport report(const std::string& model, const std::string& split) const;
  std::size_t samples() const { return samples_; }

 private:
  std::size_t t_out_;
  double tau_, theta_;
  std::size_t minutes_per_frame_;
  std::vector<std::size_t> horizons_;
  std::size_t samples_ = 0;
  std::vector<double> abs_sum_, sq_sum_;
  std::vector<std::size_t> count_;
  RoadStructure road_;
  std::vector<double> ssim_sum_;
  std::vector<std::size_t> nz_pred_, nz_gt_;
};

// Default horizons {5, 15, 30, 45, 60} minutes, kept only when they fit in t_out frames.
std::vector<std::size_t> default_horizons(std::size_t t_out, std::size_t minutes_per_frame = kMinutesPerFrame);

}  // namespace rcsnet
