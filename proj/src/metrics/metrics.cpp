#include "rcsnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace rcsnet {

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " differ");
  }
}

// Views a (T,C,H,W) or (B,T,C,H,W) tensor as a list of (C,H,W) frames.
struct FrameView {
  std::size_t batch = 1, t = 0, c = 0, h = 0, w = 0;

  explicit FrameView(const Shape& s, const char* what) {
    if (s.size() == 4) {
      t = s[0], c = s[1], h = s[2], w = s[3];
    } else if (s.size() == 5) {
      batch = s[0], t = s[1], c = s[2], h = s[3], w = s[4];
    } else {
      throw DimensionError(std::string(what) + " expects (T,C,H,W) or (B,T,C,H,W), got " + shape_str(s));
    }
  }
  std::size_t frame_size() const { return c * h * w; }
};

ErrorStats finish(double abs_sum, double sq_sum, std::size_t n) {
  ErrorStats e;
  if (n == 0) return e;
  e.mae = abs_sum / double(n);
  e.mse = sq_sum / double(n);
  e.rmse = std::sqrt(e.mse);
  return e;
}

}  // namespace

ErrorStats error_stats(const Tensor& yhat, const Tensor& y) {
  check_same(yhat, y, "error_stats");
  auto a = yhat.data();
  auto b = y.data();
  double abs_sum = 0, sq_sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  return finish(abs_sum, sq_sum, a.size());
}

double mae(const Tensor& yhat, const Tensor& y) { return error_stats(yhat, y).mae; }
double mse(const Tensor& yhat, const Tensor& y) { return error_stats(yhat, y).mse; }
double rmse(const Tensor& yhat, const Tensor& y) { return error_stats(yhat, y).rmse; }

std::size_t horizon_frame(std::size_t minutes, std::size_t minutes_per_frame) {
  if (minutes_per_frame == 0) throw ParameterError("minutes per frame must be >= 1");
  if (minutes == 0) throw ParameterError("horizon must be >= 1 minute");
  return (minutes + minutes_per_frame - 1) / minutes_per_frame - 1;
}

std::vector<HorizonMetrics> horizon_slice(const Tensor& yhat, const Tensor& y, std::size_t minutes_per_frame,
                                          const std::vector<std::size_t>& horizons) {
  check_same(yhat, y, "horizon_slice");
  const FrameView v(yhat.shape(), "horizon_slice");
  std::vector<double> abs_sum(v.t, 0.0), sq_sum(v.t, 0.0);
  auto a = yhat.data();
  auto b = y.data();
  const std::size_t fs = v.frame_size();
  for (std::size_t bi = 0; bi < v.batch; ++bi)
    for (std::size_t t = 0; t < v.t; ++t) {
      const std::size_t base = (bi * v.t + t) * fs;
      for (std::size_t i = 0; i < fs; ++i) {
        const double d = double(a[base + i]) - double(b[base + i]);
        abs_sum[t] += std::abs(d);
        sq_sum[t] += d * d;
      }
    }
  std::vector<HorizonMetrics> out;
  for (std::size_t minutes : horizons) {
    const std::size_t idx = horizon_frame(minutes, minutes_per_frame);
    if (idx >= v.t) {
      throw ParameterError("horizon t+" + std::to_string(minutes) + " needs frame " + std::to_string(idx + 1) +
                           " but only " + std::to_string(v.t) + " are predicted");
    }
    double sa = 0, ss = 0;
    for (std::size_t t = 0; t <= idx; ++t) {
      sa += abs_sum[t];
      ss += sq_sum[t];
    }
    out.push_back({minutes, idx + 1, finish(sa, ss, v.batch * (idx + 1) * fs)});
  }
  return out;
}

Tensor channel_mean(const Tensor& frame) {
  if (frame.dim() != 3) throw DimensionError("channel_mean expects (C,H,W), got " + shape_str(frame.shape()));
  const std::size_t c = frame.size(0), hw = frame.size(1) * frame.size(2);
  auto d = frame.data();
  std::vector<float> out(hw);
  for (std::size_t p = 0; p < hw; ++p) {
    double acc = 0;
    for (std::size_t k = 0; k < c; ++k) acc += d[k * hw + p];
    out[p] = float(acc / double(c));
  }
  return Tensor({frame.size(1), frame.size(2)}, std::move(out));
}

namespace {

// Channel means of one (C,H,W) frame stored at `base`, in double.
void frame_means(std::span<const float> d, std::size_t base, std::size_t c, std::size_t hw, std::vector<double>& out) {
  out.assign(hw, 0.0);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t p = 0; p < hw; ++p) out[p] += d[base + k * hw + p];
  for (auto& v : out) v /= double(c);
}

}  // namespace

std::size_t nonzero_cells(const Tensor& frame, double theta_act) {
  if (frame.dim() != 3) throw DimensionError("nonzero_cells expects (C,H,W), got " + shape_str(frame.shape()));
  std::vector<double> m;
  const std::size_t hw = frame.size(1) * frame.size(2);
  frame_means(frame.data(), 0, frame.size(0), hw, m);
  return std::size_t(std::count_if(m.begin(), m.end(), [theta_act](double v) { return v > theta_act; }));
}

RoadStructure road_structure_metrics(const Tensor& yhat, const Tensor& y, const RoadMap& road, double tau,
                                     double theta_act) {
  check_same(yhat, y, "road_structure_metrics");
  const FrameView v(yhat.shape(), "road_structure_metrics");
  if (v.h != road.height() || v.w != road.width()) {
    throw DimensionError("road map " + shape_str(road.grid.shape()) + " does not match " + shape_str(yhat.shape()));
  }
  const std::size_t hw = v.h * v.w, fs = v.frame_size();
  auto r = road.grid.data();
  auto a = yhat.data();
  auto b = y.data();
  RoadStructure out;
  std::vector<double> ma, mb;
  for (std::size_t f = 0; f < v.batch * v.t; ++f) {
    const std::size_t base = f * fs;
    frame_means(a, base, v.c, hw, ma);
    frame_means(b, base, v.c, hw, mb);
    for (std::size_t p = 0; p < hw; ++p) {
      const bool on_road = r[p] > tau;
      const bool pred_active = ma[p] > theta_act;
      const bool gt_active = mb[p] > theta_act;
      if (on_road) {
        for (std::size_t k = 0; k < v.c; ++k) {
          out.road_abs_sum += std::abs(double(a[base + k * hw + p]) - double(b[base + k * hw + p]));
        }
        out.road_elements += v.c;
      }
      if (pred_active) {
        ++out.active_pred;
        if (!on_road) ++out.active_pred_offroad;
      }
      if (gt_active && on_road) {
        ++out.active_gt_road;
        if (pred_active) ++out.active_both_road;
      }
    }
  }
  out.road_mae = out.road_elements ? out.road_abs_sum / double(out.road_elements) : 0.0;
  out.offroad_rate = double(out.active_pred_offroad) / double(std::max<std::size_t>(1, out.active_pred));
  out.coverage_recall = double(out.active_both_road) / double(std::max<std::size_t>(1, out.active_gt_road));
  return out;
}

double ssim(const Tensor& a, const Tensor& b) {
  check_same(a, b, "ssim");
  if (a.dim() != 2) throw DimensionError("ssim expects single-channel (H,W) maps, got " + shape_str(a.shape()));
  const std::size_t h = a.size(0), w = a.size(1), k = kSsimWindow;
  if (h < k || w < k) throw DimensionError("ssim needs maps of at least 7x7, got " + shape_str(a.shape()));
  auto x = a.data();
  auto y = b.data();
  double peak = 1e-6;
  for (std::size_t i = 0; i < y.size(); ++i) peak = std::max(peak, double(y[i]));
  const double c1 = (0.01 * peak) * (0.01 * peak), c2 = (0.03 * peak) * (0.03 * peak);
  const double n = double(k * k);
  double total = 0;
  std::size_t windows = 0;
  for (std::size_t i = 0; i + k <= h; ++i) {
    for (std::size_t j = 0; j + k <= w; ++j) {
      double sx = 0, sy = 0;
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v) {
          sx += x[(i + u) * w + j + v];
          sy += y[(i + u) * w + j + v];
        }
      const double mx = sx / n, my = sy / n;
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v) {
          const double dx = x[(i + u) * w + j + v] - mx, dy = y[(i + u) * w + j + v] - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      vx /= n;
      vy /= n;
      cxy /= n;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / double(windows);
}

Tensor historical_average(const Tensor& x, std::size_t t_out) {
  if (x.dim() != 4) throw DimensionError("historical_average expects (C,T_in,H,W), got " + shape_str(x.shape()));
  const std::size_t c = x.size(0), t_in = x.size(1), hw = x.size(2) * x.size(3);
  if (t_in < 1) throw ParameterError("historical_average needs T_in >= 1");
  if (t_out < 1) throw ParameterError("historical_average needs T_out >= 1");
  auto d = x.data();
  std::vector<float> frame(c * hw);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t p = 0; p < hw; ++p) {
      double acc = 0;
      for (std::size_t t = 0; t < t_in; ++t) acc += d[(k * t_in + t) * hw + p];
      frame[k * hw + p] = float(acc / double(t_in));
    }
  std::vector<float> out;
  out.reserve(t_out * frame.size());
  for (std::size_t t = 0; t < t_out; ++t) out.insert(out.end(), frame.begin(), frame.end());
  return Tensor({t_out, c, x.size(2), x.size(3)}, std::move(out));
}

std::vector<std::size_t> default_horizons(std::size_t t_out, std::size_t minutes_per_frame) {
  std::vector<std::size_t> out;
  for (std::size_t m : {5, 15, 30, 45, 60}) {
    if (horizon_frame(m, minutes_per_frame) < t_out) out.push_back(m);
  }
  return out;
}

MetricAccumulator::MetricAccumulator(std::size_t t_out, double tau, double theta_act, std::size_t minutes_per_frame,
                                     std::vector<std::size_t> horizons)
    : t_out_(t_out),
      tau_(tau),
      theta_(theta_act),
      minutes_per_frame_(minutes_per_frame),
      horizons_(std::move(horizons)),
      abs_sum_(t_out, 0.0),
      sq_sum_(t_out, 0.0),
      count_(t_out, 0),
      ssim_sum_(t_out, 0.0),
      nz_pred_(t_out, 0),
      nz_gt_(t_out, 0) {
  for (std::size_t m : horizons_) {
    if (horizon_frame(m, minutes_per_frame_) >= t_out_) {
      throw ParameterError("horizon t+" + std::to_string(m) + " exceeds the " + std::to_string(t_out_) +
                           "-frame forecast");
    }
  }
}

void MetricAccumulator::add(const Tensor& yhat, const Tensor& y, const RoadMap& road) {
  check_same(yhat, y, "MetricAccumulator::add");
  if (yhat.dim() != 4 || yhat.size(0) != t_out_) {
    throw DimensionError("MetricAccumulator expects (T_out,C,H,W) with T_out = " + std::to_string(t_out_) + ", got " +
                         shape_str(yhat.shape()));
  }
  const std::size_t c = yhat.size(1), h = yhat.size(2), w = yhat.size(3), fs = c * h * w;
  auto a = yhat.data();
  auto b = y.data();
  for (std::size_t t = 0; t < t_out_; ++t) {
    for (std::size_t i = 0; i < fs; ++i) {
      const double d = double(a[t * fs + i]) - double(b[t * fs + i]);
      abs_sum_[t] += std::abs(d);
      sq_sum_[t] += d * d;
    }
    count_[t] += fs;
    const Tensor fa({c, h, w}, std::vector<float>(a.begin() + std::ptrdiff_t(t * fs), a.begin() + std::ptrdiff_t((t + 1) * fs)));
    const Tensor fb({c, h, w}, std::vector<float>(b.begin() + std::ptrdiff_t(t * fs), b.begin() + std::ptrdiff_t((t + 1) * fs)));
    ssim_sum_[t] += ssim(channel_mean(fa), channel_mean(fb));
    nz_pred_[t] += nonzero_cells(fa, theta_);
    nz_gt_[t] += nonzero_cells(fb, theta_);
  }
  const RoadStructure rs = road_structure_metrics(yhat, y, road, tau_, theta_);
  road_.road_abs_sum += rs.road_abs_sum;
  road_.road_elements += rs.road_elements;
  road_.active_pred += rs.active_pred;
  road_.active_pred_offroad += rs.active_pred_offroad;
  road_.active_gt_road += rs.active_gt_road;
  road_.active_both_road += rs.active_both_road;
  ++samples_;
}

MetricReport MetricAccumulator::report(const std::string& model, const std::string& split) const {
  MetricReport r;
  r.model = model;
  r.split = split;
  r.samples = samples_;
  double sa = 0, ss = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < t_out_; ++t) {
    sa += abs_sum_[t];
    ss += sq_sum_[t];
    n += count_[t];
  }
  r.error = finish(sa, ss, n);
  for (std::size_t m : horizons_) {
    const std::size_t idx = horizon_frame(m, minutes_per_frame_);
    double ha = 0, hs = 0;
    std::size_t hn = 0;
    for (std::size_t t = 0; t <= idx; ++t) {
      ha += abs_sum_[t];
      hs += sq_sum_[t];
      hn += count_[t];
    }
    r.horizons.push_back({m, idx + 1, finish(ha, hs, hn)});
  }
  r.road_mae = road_.road_elements ? road_.road_abs_sum / double(road_.road_elements) : 0.0;
  r.offroad_activation_rate = double(road_.active_pred_offroad) / double(std::max<std::size_t>(1, road_.active_pred));
  r.road_coverage_recall = double(road_.active_both_road) / double(std::max<std::size_t>(1, road_.active_gt_road));
  for (std::size_t t = 0; t < t_out_; ++t) r.ssim_per_frame.push_back(samples_ ? ssim_sum_[t] / double(samples_) : 0.0);
  r.nonzero_cells_pred = nz_pred_;
  r.nonzero_cells_gt = nz_gt_;
  return r;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["split"] = split;
  j["samples"] = samples;
  j["mae"] = error.mae;
  j["mse"] = error.mse;
  j["rmse"] = error.rmse;
  auto hz = nlohmann::ordered_json::array();
  for (const auto& h : horizons) {
    hz.push_back({{"minutes", h.minutes}, {"frames", h.frames}, {"mae", h.error.mae}, {"mse", h.error.mse},
                  {"rmse", h.error.rmse}});
  }
  j["horizons"] = hz;
  j["road_mae"] = road_mae;
  j["offroad_activation_rate"] = offroad_activation_rate;
  j["road_coverage_recall"] = road_coverage_recall;
  j["ssim_per_frame"] = ssim_per_frame;
  j["nonzero_cells_pred"] = nonzero_cells_pred;
  j["nonzero_cells_gt"] = nonzero_cells_gt;
  return j.dump(2) + "\n";
}

std::string MetricReport::horizon_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "horizon_minutes,frames,mae,mse,rmse\n";
  for (const auto& h : horizons) {
    os << h.minutes << ',' << h.frames << ',' << h.error.mae << ',' << h.error.mse << ',' << h.error.rmse << '\n';
  }
  return os.str();
}

}  // namespace rcsnet
