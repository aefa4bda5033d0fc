// Acceptance suite. Each criterion prints exactly one PASS/FAIL line.
// Usage: rcsnet_acceptance [c1 ... c11]; no arguments runs all of them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "rcsnet/cli.hpp"
#include "rcsnet/config.hpp"
#include "rcsnet/container.hpp"
#include "rcsnet/data.hpp"
#include "rcsnet/decoder.hpp"
#include "rcsnet/fusion.hpp"
#include "rcsnet/log.hpp"
#include "rcsnet/loss.hpp"
#include "rcsnet/metrics.hpp"
#include "rcsnet/model.hpp"
#include "rcsnet/ops.hpp"
#include "rcsnet/synth.hpp"
#include "rcsnet/temporal_encoder.hpp"
#include "rcsnet/topology.hpp"
#include "rcsnet/trainer.hpp"

using namespace rcsnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rcsnet_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RoadMap random_road(std::mt19937_64& rng, std::size_t h, std::size_t w, bool binary) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<float> v(h * w);
  for (auto& x : v) x = binary ? (u(rng) < 0.35 ? 1.0f : 0.0f) : float(u(rng));
  return make_road_map(Tensor({1, h, w}, std::move(v)));
}

// ---- 1: gradient fidelity ---------------------------------------------------------

Outcome c1_gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg;
  cfg.t_in = 4;
  cfg.t_out = 4;
  cfg.base_channels = 4;
  cfg.hidden = 8;
  cfg.road_branch_channels = 4;
  cfg.branches = {BranchSpec{"short", 1, 1}, BranchSpec{"mid", 3, 1}, BranchSpec{"long", 3, 1}};
  auto model = Model<double>::create(cfg, 7);
  std::mt19937_64 rng(2024);
  // Move the zero-initialized last fusion layer off zero so every fusion
  // parameter carries gradient.
  {
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (auto* t : {&model.params().fusion.fuse2.weight, &model.params().fusion.fuse2.bias}) {
      for (auto& v : t->mutable_data()) v = u(rng);
    }
  }
  const std::size_t h = 8, w = 8, batch = 2;
  const RoadMap road = random_road(rng, h, w, true);
  const auto x = oracle::random_tensor<double>(rng, {batch, 8, 4, h, w});
  const auto y = oracle::random_tensor<double>(rng, {batch, 4, 8, h, w});
  const LossWeights weights;
  auto loss_value = [&] {
    NoGradGuard g;
    return total_loss(model.forward(x, road), y, road, weights).total.item();
  };
  const auto params = model.parameters();
  {
    const auto out = total_loss(model.forward(x, road), y, road, weights);
    backward(out.total);
  }
  // Element pool per module.
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> pool;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string module = params[i].first.substr(0, params[i].first.find('.'));
    for (std::size_t j = 0; j < params[i].second.numel(); ++j) pool[module].push_back({i, j});
  }
  // Parameters whose analytic gradient is below 1e-8 are skipped (exactly
  // invariant directions such as a bias ahead of a normalization).
  const std::size_t per_module = 60;
  const double step = 1e-3;
  auto central = [&](BasicTensor<double>& t, std::size_t j, double h) {
    auto data = t.mutable_data();
    const double orig = data[j];
    data[j] = orig + h;
    const double lp = loss_value();
    data[j] = orig - h;
    const double lm = loss_value();
    data[j] = orig;
    return (lp - lm) / (2 * h);
  };
  auto rel_err = [](double a, double n) { return std::abs(a - n) / std::max(std::abs(a), std::abs(n)); };
  double worst = 0;
  std::string worst_name;
  std::size_t checked = 0, failed = 0, skipped = 0, fine_ok = 0;
  for (auto& [module, elems] : pool) {
    std::shuffle(elems.begin(), elems.end(), rng);
    std::size_t taken = 0;
    for (std::size_t s = 0; s < elems.size() && taken < per_module; ++s) {
      auto [pi, ej] = elems[s];
      auto tensor = params[pi].second;
      const double analytic = tensor.has_grad() ? tensor.grad()[ej] : 0.0;
      if (std::abs(analytic) < 1e-8) {
        ++skipped;
        continue;
      }
      ++taken;
      ++checked;
      const double rel = rel_err(analytic, central(tensor, ej, step));
      if (rel > worst) {
        worst = rel;
        worst_name = params[pi].first + "[" + std::to_string(ej) + "]";
      }
      if (rel > 1e-3) {
        ++failed;
        // Diagnostic only: the same parameter at a finer step.
        if (rel_err(analytic, central(tensor, ej, 1e-6)) <= 1e-3) ++fine_ok;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o;
  o.pass = failed == 0 && checked >= 200 && pool.size() == 4 && secs <= 120;
  o.detail = std::to_string(checked) + " params over " + std::to_string(pool.size()) + " modules (" +
             std::to_string(skipped) + " skipped, |grad| < 1e-8), " + std::to_string(failed) +
             " above 1e-3 at step 1e-3, max rel err " + fmt("%.3e", worst) + " at " + worst_name;
  if (failed) o.detail += "; " + std::to_string(fine_ok) + "/" + std::to_string(failed) + " of those agree at step 1e-6";
  o.detail += ", " + fmt("%.1f", secs) + " s";
  return o;
}

// ---- 2: kernel oracles --------------------------------------------------------------

Outcome c2_kernel_oracles() {
  std::mt19937_64 rng(11);
  const std::size_t cases = 50;
  std::map<std::string, double> worst;
  auto note = [&](const std::string& k, double e) { worst[k] = std::max(worst[k], e); };
  for (std::size_t c = 0; c < cases; ++c) {
    // conv2d
    {
      const std::size_t b = oracle::uniform_int(rng, 1, 2), cin = oracle::uniform_int(rng, 1, 4),
                        cout = oracle::uniform_int(rng, 1, 4), k = oracle::uniform_int(rng, 1, 3) * 2 - 1,
                        stride = oracle::uniform_int(rng, 1, 2), dil = oracle::uniform_int(rng, 1, 2),
                        pad = oracle::uniform_int(rng, 0, 2);
      const std::size_t hh = oracle::uniform_int(rng, dil * (k - 1) + 1, 9), ww = oracle::uniform_int(rng, dil * (k - 1) + 1, 9);
      const auto x = oracle::random_tensor<float>(rng, {b, cin, hh, ww});
      const auto wt = oracle::random_tensor<float>(rng, {cout, cin, k, k});
      const auto bias = oracle::random_tensor<float>(rng, {cout});
      Shape os;
      const auto bv = oracle::values(bias);
      const auto ref = oracle::conv2d(oracle::values(x), x.shape(), oracle::values(wt), wt.shape(), &bv, stride, pad, dil, os);
      const auto out = conv2d(x, wt, bias, stride, pad, dil);
      note("conv2d", out.shape() == os ? oracle::max_abs_diff(out, ref) : INFINITY);
    }
    // conv3d with temporal dilation
    {
      const std::size_t b = oracle::uniform_int(rng, 1, 2), cin = oracle::uniform_int(rng, 1, 3),
                        cout = oracle::uniform_int(rng, 1, 3), kt = oracle::uniform_int(rng, 1, 2) * 2 - 1,
                        k = oracle::uniform_int(rng, 1, 2) * 2 - 1, dt = oracle::uniform_int(rng, 1, 3);
      Conv3dOptions opt;
      opt.dilation = {dt, oracle::uniform_int(rng, 1, 2), 1};
      opt.padding = {dt * (kt - 1) / 2, oracle::uniform_int(rng, 0, 1), k / 2};
      opt.stride = {1, oracle::uniform_int(rng, 1, 2), 1};
      const std::size_t t = oracle::uniform_int(rng, std::max<std::size_t>(dt * (kt - 1) + 1, 2), 7);
      const std::size_t hh = oracle::uniform_int(rng, opt.dilation[1] * (k - 1) + 1, 7), ww = oracle::uniform_int(rng, k, 7);
      const auto x = oracle::random_tensor<float>(rng, {b, cin, t, hh, ww});
      const auto wt = oracle::random_tensor<float>(rng, {cout, cin, kt, k, k});
      const auto bias = oracle::random_tensor<float>(rng, {cout});
      Shape os;
      const auto bv = oracle::values(bias);
      const auto ref = oracle::conv3d(oracle::values(x), x.shape(), oracle::values(wt), wt.shape(), &bv, opt.stride,
                                      opt.padding, opt.dilation, os);
      const auto out = conv3d(x, wt, bias, opt);
      note("conv3d", out.shape() == os ? oracle::max_abs_diff(out, ref) : INFINITY);
    }
    // avg_pool2d
    {
      const std::size_t n = oracle::uniform_int(rng, 1, 3), hh = oracle::uniform_int(rng, 3, 10),
                        ww = oracle::uniform_int(rng, 3, 10), k = oracle::uniform_int(rng, 0, 3) * 2 + 1;
      const auto x = oracle::random_tensor<float>(rng, {n, hh, ww});
      note("avg_pool2d", oracle::max_abs_diff(avg_pool2d(x, k), oracle::avg_pool2d(oracle::values(x), n, hh, ww, k)));
    }
    // resample2d in both directions
    {
      const std::size_t n = oracle::uniform_int(rng, 1, 3), f = oracle::uniform_int(rng, 1, 2) * 2;
      const std::size_t hh = f * oracle::uniform_int(rng, 1, 4), ww = f * oracle::uniform_int(rng, 1, 4);
      const auto x = oracle::random_tensor<float>(rng, {n, hh, ww});
      note("resample2d", oracle::max_abs_diff(resample2d(x, f, ResampleMode::DownAverage),
                                              oracle::downsample(oracle::values(x), n, hh, ww, f)));
      note("resample2d", oracle::max_abs_diff(resample2d(x, f, ResampleMode::UpLinear),
                                              oracle::upsample(oracle::values(x), n, hh, ww, hh * f, ww * f)));
    }
    // gap
    {
      const std::size_t b = oracle::uniform_int(rng, 1, 3), ch = oracle::uniform_int(rng, 1, 5),
                        hh = oracle::uniform_int(rng, 1, 9), ww = oracle::uniform_int(rng, 1, 9);
      const auto x = oracle::random_tensor<float>(rng, {b, ch, hh, ww});
      note("gap", oracle::max_abs_diff(gap(x), oracle::gap(oracle::values(x), b * ch, hh * ww)));
    }
    // linear
    {
      const std::size_t b = oracle::uniform_int(rng, 1, 4), n = oracle::uniform_int(rng, 1, 12),
                        m = oracle::uniform_int(rng, 1, 12);
      const auto x = oracle::random_tensor<float>(rng, {b, n});
      const auto wt = oracle::random_tensor<float>(rng, {m, n});
      const bool with_bias = c % 2 == 0;
      const auto bias = with_bias ? oracle::random_tensor<float>(rng, {m}) : Tensor();
      const auto bv = with_bias ? oracle::values(bias) : oracle::Vec{};
      note("linear", oracle::max_abs_diff(linear(x, wt, bias),
                                          oracle::linear(oracle::values(x), b, n, oracle::values(wt), m, with_bias ? &bv : nullptr)));
    }
    // GRU step
    {
      const std::size_t b = oracle::uniform_int(rng, 1, 3), n = oracle::uniform_int(rng, 1, 6),
                        m = oracle::uniform_int(rng, 1, 6);
      GruCellParams<float> p;
      oracle::GruRef r;
      auto mk = [&](const Shape& s, oracle::Vec& ref) {
        auto t = oracle::random_tensor<float>(rng, s);
        ref = oracle::values(t);
        return t;
      };
      p.w_z = mk({m, n}, r.wz), p.u_z = mk({m, m}, r.uz), p.b_z = mk({m}, r.bz);
      p.w_r = mk({m, n}, r.wr), p.u_r = mk({m, m}, r.ur), p.b_r = mk({m}, r.br);
      p.w_n = mk({m, n}, r.wn), p.u_n = mk({m, m}, r.un), p.b_n = mk({m}, r.bn);
      const auto x = oracle::random_tensor<float>(rng, {b, n});
      const auto hs = oracle::random_tensor<float>(rng, {b, m});
      note("gru_step", oracle::max_abs_diff(gru_cell_step(x, hs, p),
                                            oracle::gru_step(oracle::values(x), oracle::values(hs), b, n, m, r)));
    }
  }
  Outcome o;
  o.pass = worst.size() == 7;
  std::ostringstream os;
  os << cases << " cases each;";
  for (const auto& [k, v] : worst) {
    os << " " << k << " " << fmt("%.2e", v);
    if (!(v <= 1e-5)) o.pass = false;
  }
  o.detail = os.str();
  return o;
}

// ---- 3: topology oracle -------------------------------------------------------------

Outcome c3_topology_oracle() {
  std::mt19937_64 rng(33);
  double worst = 0, max_norm = 0;
  bool shape_ok = kPriorChannels == 7;
  for (std::size_t c = 0; c < 20; ++c) {
    const RoadMap road = random_road(rng, 16, 16, c % 2 == 0);
    const TopologyPrior p = extract_prior(road);
    shape_ok = shape_ok && p.channels.shape() == Shape{7, 16, 16};
    worst = std::max(worst, oracle::max_abs_diff(p.channels, oracle::topology_prior(oracle::values(road.grid), 16, 16, kDefaultPoolK)));
    auto d = p.channels.data();
    for (std::size_t i = 0; i < 256; ++i) {
      const double ox = d[3 * 256 + i], oy = d[4 * 256 + i];
      max_norm = std::max(max_norm, ox * ox + oy * oy);
    }
  }
  Outcome o;
  o.pass = shape_ok && worst <= 1e-5 && max_norm < 1.0;
  o.detail = "20 maps, max abs err " + fmt("%.2e", worst) + ", max ori_x^2+ori_y^2 " + fmt("%.10f", max_norm) +
             ", C_p = " + std::to_string(kPriorChannels);
  return o;
}

// ---- 4: loss identities ----------------------------------------------------------

Outcome c4_loss_identities() {
  std::mt19937_64 rng(44);
  std::vector<std::string> broken;
  const Shape s{2, 4, 8, 8, 8};
  for (std::size_t trial = 0; trial < 10; ++trial) {
    const RoadMap road = random_road(rng, 8, 8, trial % 2 == 0);
    const auto yhat = oracle::random_tensor<double>(rng, s);
    const auto y = oracle::random_tensor<double>(rng, s);
    LossWeights w;
    const auto lb = total_loss(yhat, y, road, w);
    const double expect = lb.pred + 0.5 * lb.structure + 0.2 * lb.temp + 0.1 * lb.edge;
    if (std::abs(lb.total_value() - expect) > 1e-6 * std::abs(expect)) broken.push_back("total composition");

    LossWeights w1 = w;
    w1.gamma = 1.0;
    const double p = pred_loss(yhat, y).item();
    if (std::abs(struct_loss(yhat, y, road, w1).item() - p) > 1e-12 * p) broken.push_back("struct==pred at gamma 1");
    const RoadMap zero = make_road_map(Tensor::zeros({1, 8, 8}));
    if (std::abs(struct_loss(yhat, y, zero, w).item() - p) > 1e-12 * p) broken.push_back("struct==pred on zero road");

    double prev = -1;
    for (double g : {1.0, 1.5, 2.0, 5.0, 10.0}) {
      LossWeights wg = w;
      wg.gamma = g;
      const double v = struct_loss(yhat, y, road, wg).item();
      if (!(v > prev)) broken.push_back("struct monotone in gamma");
      prev = v;
    }

    const double offset = std::uniform_real_distribution<double>(-2, 2)(rng);
    const auto shifted = add_scalar(y, offset);
    for (const auto* pred : {&y, &shifted}) {
      const double t = temp_loss(*pred, y).item(), e = edge_loss(*pred, y).item();
      if (std::abs(t) > 1e-12 || std::abs(e) > 1e-12) broken.push_back("temp/edge vanish");
    }
  }
  Outcome o;
  o.pass = broken.empty();
  o.detail = broken.empty() ? "10 random trials: composition, gamma=1 and zero-road equalities, gamma monotonicity, "
                              "temp/edge zero at Y and Y+c"
                            : "violated: " + broken.front() + " (" + std::to_string(broken.size()) + " total)";
  return o;
}

// ---- 5: fusion residual identity ------------------------------------------------

Outcome c5_fusion_residual() {
  std::mt19937_64 rng(55);
  bool ok = true;
  for (std::size_t trial = 0; trial < 5; ++trial) {
    ParamInit init(100 + trial);
    const std::size_t ct = 8, cr = 4;
    const auto params = FusionParams<float>::make(init, ct, cr);
    const auto ft = oracle::random_tensor<float>(rng, {2, ct, 8, 8});
    const auto fr = oracle::random_tensor<float>(rng, {cr, 8, 8});
    const auto out = fuse(ft, fr, params);
    ok = ok && out.shape() == ft.shape() &&
         std::memcmp(out.data().data(), ft.data().data(), ft.numel() * sizeof(float)) == 0;
  }
  return {ok, ok ? "5 fresh parameter sets: output bit-identical to F_temp" : "output differs from F_temp"};
}

// ---- 6: decoder contracts ----------------------------------------------------------

Outcome c6_decoder_contracts() {
  std::mt19937_64 rng(66);
  std::vector<std::string> broken;
  // Shape.
  {
    ParamInit init(1);
    const auto p = DecoderParams<float>::make(init, 6, 5);
    const auto out = decode(oracle::random_tensor<float>(rng, {3, 6, 8, 4}), p, 7);
    if (out.shape() != Shape({3, 7, 8, 8, 4})) broken.push_back("shape " + shape_str(out.shape()));
  }
  // Bias-only head: channel 2i carries volume bias i, 2i+1 speed bias i.
  {
    ParamInit init(2);
    auto p = DecoderParams<float>::make(init, 4, 3);
    p.visit("decoder", [](const std::string&, Tensor& t) {
      for (auto& v : t.mutable_data()) v = 0;
    });
    for (std::size_t i = 0; i < 4; ++i) {
      p.volume_head.bias.mutable_data()[i] = float(i + 1);
      p.speed_head.bias.mutable_data()[i] = float(10 * (i + 1));
    }
    const auto out = decode(oracle::random_tensor<float>(rng, {2, 4, 5, 5}), p, 3);
    auto d = out.data();
    const std::size_t hw = 25;
    for (std::size_t f = 0; f < 2 * 3; ++f)
      for (std::size_t ch = 0; ch < 8; ++ch) {
        const float expect = ch % 2 == 0 ? float(ch / 2 + 1) : float(10 * (ch / 2 + 1));
        for (std::size_t q = 0; q < hw; ++q)
          if (d[(f * 8 + ch) * hw + q] != expect) {
            broken.push_back("interleave order");
            goto done;
          }
      }
  done:;
  }
  // Scalar configuration: C_f = 1, hidden = 1, hand-rolled recurrence.
  double worst = 0;
  {
    ParamInit init(3);
    const auto p = DecoderParams<double>::make(init, 1, 1);
    const std::size_t h = 4, w = 5, t_out = 5;
    const auto f = oracle::random_tensor<double>(rng, {1, 1, h, w});
    const auto out = decode(f, p, t_out);
    auto val = [](const Tensor64& t) { return t.data()[0]; };
    auto conv = [&](const oracle::Vec& x, const Conv2dLayer<double>& l) {
      Shape os;
      const auto bv = oracle::values(l.bias);
      return oracle::conv2d(x, {1, 1, h, w}, oracle::values(l.weight), l.weight.shape(), &bv, 1, l.padding, 1, os);
    };
    auto relu_v = [](oracle::Vec v) {
      for (auto& x : v) x = std::max(0.0, x);
      return v;
    };
    auto mean_v = [](const oracle::Vec& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / double(v.size());
    };
    const oracle::Vec ctx = conv(relu_v(conv(oracle::values(f), p.context1)), p.context2);
    double z = mean_v(ctx);
    double hs = std::tanh(val(p.init_hidden.weight) * z);
    const auto& g = p.gru;
    oracle::Vec ref;
    for (std::size_t k = 0; k < t_out; ++k) {
      const double zg = oracle::sigmoid(val(g.w_z) * z + val(g.u_z) * hs + val(g.b_z));
      const double rg = oracle::sigmoid(val(g.w_r) * z + val(g.u_r) * hs + val(g.b_r));
      const double n = std::tanh(val(g.w_n) * z + rg * (val(g.u_n) * hs) + val(g.b_n));
      hs = (1 - zg) * n + zg * hs;
      oracle::Vec sk = ctx;
      for (auto& v : sk) v += val(p.embed.weight) * hs;
      const oracle::Vec q = relu_v(conv(sk, p.step));
      auto vw = p.volume_head.weight.data(), vb = p.volume_head.bias.data();
      auto sw = p.speed_head.weight.data(), sb = p.speed_head.bias.data();
      for (std::size_t d = 0; d < 4; ++d) {
        for (double qv : q) ref.push_back(vw[d] * qv + vb[d]);
        for (double qv : q) ref.push_back(sw[d] * qv + sb[d]);
      }
      z = mean_v(sk);
    }
    worst = oracle::max_abs_diff(out, ref);
    if (!(worst <= 1e-5)) broken.push_back("scalar recurrence");
  }
  Outcome o;
  o.pass = broken.empty();
  o.detail = (broken.empty() ? std::string("shape, bias-only interleave, ") : "violated: " + broken.front() + "; ") +
             "scalar recurrence max abs err " + fmt("%.2e", worst);
  return o;
}

// ---- 7: receptive field law ---------------------------------------------------------

Outcome c7_receptive_field() {
  const auto specs = default_branch_specs();
  std::vector<std::size_t> r;
  for (const auto& s : specs) r.push_back(receptive_field(s));
  bool ok = r == std::vector<std::size_t>{3, 5, 9};
  for (const auto& s : specs) ok = ok && receptive_field(s) == 1 + (s.k - 1) * s.d;
  bool rejected = false;
  try {
    validate_branches(specs, 8);
  } catch (const ConfigError&) {
    rejected = true;
  }
  bool accepted = true;
  try {
    validate_branches(specs, 9);
  } catch (const ConfigError&) {
    accepted = false;
  }
  return {ok && rejected && accepted, "R = " + std::to_string(r[0]) + "/" + std::to_string(r[1]) + "/" +
                                          std::to_string(r[2]) + ", T_in=8 rejected: " + (rejected ? "yes" : "no") +
                                          ", T_in=9 accepted: " + (accepted ? "yes" : "no")};
}

// ---- 8: metric oracles -------------------------------------------------------------

Outcome c8_metric_oracles() {
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  bool counts_ok = true, rmse_ok = true;
  auto sparse = [&](const Shape& s) {
    std::vector<float> v(numel_of(s));
    for (auto& x : v) x = u(rng) < 0.5 ? float(u(rng) * 0.003) : float(u(rng));
    return Tensor(s, std::move(v));
  };
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const std::size_t t = 4, c = 8, h = 9, w = 10, hw = h * w;
    const Tensor a = sparse({t, c, h, w}), b = sparse({t, c, h, w});
    const auto av = oracle::values(a), bv = oracle::values(b);
    const RoadMap road = random_road(rng, h, w, trial % 2 == 0);
    const auto rv = oracle::values(road.grid);

    const ErrorStats e = error_stats(a, b);
    const oracle::Errors re = oracle::errors(av, bv);
    worst = std::max({worst, std::abs(e.mae - re.mae), std::abs(e.mse - re.mse), std::abs(e.rmse - re.rmse)});
    rmse_ok = rmse_ok && std::abs(e.rmse * e.rmse - e.mse) <= 1e-12 * std::max(1.0, e.mse);

    // SSIM over the channel-mean map of each frame.
    for (std::size_t f = 0; f < t; ++f) {
      oracle::Vec ma(hw, 0.0), mb(hw, 0.0);
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t p = 0; p < hw; ++p) {
          ma[p] += av[(f * c + k) * hw + p] / double(c);
          mb[p] += bv[(f * c + k) * hw + p] / double(c);
        }
      const Tensor fa({c, h, w}, std::vector<float>(a.data().begin() + std::ptrdiff_t(f * c * hw), a.data().begin() + std::ptrdiff_t((f + 1) * c * hw)));
      const Tensor fb({c, h, w}, std::vector<float>(b.data().begin() + std::ptrdiff_t(f * c * hw), b.data().begin() + std::ptrdiff_t((f + 1) * c * hw)));
      const auto cma = oracle::values(channel_mean(fa)), cmb = oracle::values(channel_mean(fb));
      worst = std::max(worst, std::abs(ssim(channel_mean(fa), channel_mean(fb)) - oracle::ssim(cma, cmb, h, w)));
      std::size_t nz = 0;
      for (double v : ma) nz += v > kThetaAct;
      counts_ok = counts_ok && nonzero_cells(fa) == nz;
    }

    // Road structure metrics by enumeration.
    double road_abs = 0;
    std::size_t road_n = 0, act = 0, act_off = 0, gt_road = 0, both = 0;
    for (std::size_t f = 0; f < t; ++f)
      for (std::size_t p = 0; p < hw; ++p) {
        double ma = 0, mb = 0;
        for (std::size_t k = 0; k < c; ++k) {
          ma += av[(f * c + k) * hw + p];
          mb += bv[(f * c + k) * hw + p];
        }
        ma /= double(c), mb /= double(c);
        const bool on = rv[p] > kDefaultTau;
        if (on)
          for (std::size_t k = 0; k < c; ++k) road_abs += std::abs(av[(f * c + k) * hw + p] - bv[(f * c + k) * hw + p]), ++road_n;
        if (ma > kThetaAct) {
          ++act;
          if (!on) ++act_off;
        }
        if (mb > kThetaAct && on) {
          ++gt_road;
          if (ma > kThetaAct) ++both;
        }
      }
    const RoadStructure rs = road_structure_metrics(a, b, road, kDefaultTau);
    worst = std::max({worst, std::abs(rs.road_mae - road_abs / double(road_n)),
                      std::abs(rs.offroad_rate - double(act_off) / double(std::max<std::size_t>(act, 1))),
                      std::abs(rs.coverage_recall - double(both) / double(std::max<std::size_t>(gt_road, 1)))});

    // Horizon slices: cumulative frames 1..ceil(m/5).
    const auto hz = horizon_slice(a, b, 5, {5, 10, 15, 20});
    for (const auto& hm : hz) {
      const std::size_t frames = (hm.minutes + 4) / 5;
      const oracle::Vec sa(av.begin(), av.begin() + std::ptrdiff_t(frames * c * hw));
      const oracle::Vec sb(bv.begin(), bv.begin() + std::ptrdiff_t(frames * c * hw));
      const auto he = oracle::errors(sa, sb);
      counts_ok = counts_ok && hm.frames == frames;
      worst = std::max({worst, std::abs(hm.error.mae - he.mae), std::abs(hm.error.mse - he.mse)});
    }

    // Historical average of a (C,T_in,H,W) input.
    const std::size_t t_in = 5;
    const Tensor x = sparse({c, t_in, h, w});
    const auto xv = oracle::values(x);
    const Tensor ha = historical_average(x, 3);
    oracle::Vec ref;
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t p = 0; p < hw; ++p) {
          double s = 0;
          for (std::size_t q = 0; q < t_in; ++q) s += xv[(k * t_in + q) * hw + p];
          ref.push_back(s / double(t_in));
        }
    worst = std::max(worst, oracle::max_abs_diff(ha, ref));
  }
  Outcome o;
  o.pass = worst <= 1e-6 && counts_ok && rmse_ok;
  o.detail = "20 trials, max abs err " + fmt("%.2e", worst) + ", counts " + (counts_ok ? "exact" : "MISMATCH") +
             ", rmse^2==mse " + (rmse_ok ? "yes" : "no");
  return o;
}

// ---- 9: training dynamics ---------------------------------------------------------

// Four windows of one synthetic 32x32, T=48 movie.
struct TinySet {
  Dataset data;
  NormStats stats;
};

TinySet four_sample_set(const fs::path& dir) {
  const SynthCity city = synth_city(42, 32, 32, 48);
  fs::create_directories(dir / "synth");
  write_tensor(dir / "synth" / "road.gtc", city.road, {"H", "W"});
  write_tensor(dir / "synth" / "movie_000.gtc", city.movie, {"T", "H", "W", "C"});
  const std::vector<MovieFile> files{{dir / "synth" / "movie_000.gtc", "synth"}};
  TinySet s;
  s.stats = fit_norm_stats(Dataset::load_raw(files));
  DatasetOptions opts;
  opts.t_in = 12;
  opts.t_out = 12;
  opts.stride = 8;
  s.data = Dataset(files, dir, s.stats, opts);
  return s;
}

Outcome c9_training_dynamics() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = scratch_dir("c9");
  const TinySet set = four_sample_set(dir);
  TrainConfig cfg;
  cfg.batch = 4;
  cfg.epochs = 300;
  cfg.stride = 8;
  cfg.seed = 42;
  const Dataset empty;
  TrainHooks hooks;
  hooks.workers = 1;
  const TrainResult a = train(cfg, set.data, empty, hooks);
  const TrainResult b = train(cfg, set.data, empty, hooks);
  bool identical = a.steps.size() == b.steps.size();
  for (std::size_t i = 0; identical && i < a.steps.size(); ++i) {
    const auto &x = a.steps[i], &y = b.steps[i];
    identical = std::memcmp(&x.total, &y.total, sizeof(double)) == 0 &&
                std::memcmp(&x.pred, &y.pred, sizeof(double)) == 0 &&
                std::memcmp(&x.grad_norm, &y.grad_norm, sizeof(double)) == 0;
  }
  const double first = a.steps.front().total, last = a.steps.back().total;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o;
  o.pass = set.data.size() == 4 && a.steps.size() == 300 && last <= 0.1 * first && identical;
  o.detail = std::to_string(set.data.size()) + " samples, " + std::to_string(a.steps.size()) + " steps, loss " +
             fmt("%.5f", first) + " -> " + fmt("%.5f", last) + " (" + fmt("%.1f%%", 100 * last / first) +
             "), rerun " + (identical ? "bit-identical" : "DIFFERS") + ", " + fmt("%.0f", secs) + " s";
  return o;
}

// ---- 10: road-conditioning signal -------------------------------------------------

Outcome c10_road_conditioning() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = scratch_dir("c10");
  // 40 movies x 5 windows = 200 samples.
  const std::size_t movies = 40, frames = 48, hw = 32;
  SynthProfile profile;
  for (std::size_t k = 0; k < movies; ++k) {
    profile.t_offset = k * frames;
    const SynthCity city = synth_city(42, hw, hw, frames, profile);
    fs::create_directories(dir / "synth");
    char name[32];
    std::snprintf(name, sizeof name, "movie_%03zu.gtc", k);
    write_tensor(dir / "synth" / name, city.movie, {"T", "H", "W", "C"});
    if (k == 0) write_tensor(dir / "synth" / "road.gtc", city.road, {"H", "W"});
  }
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch = 8;
  cfg.seed = 42;
  cfg.model.base_channels = 16;
  cfg.model.hidden = 64;
  const SplitPlan plan = split_files(discover_movies(dir), cfg.seed);
  const NormStats stats = fit_norm_stats(Dataset::load_raw(plan.train()));
  DatasetOptions opts;
  opts.stride = cfg.stride;
  const Dataset train_set(plan.train(), dir, stats, opts), val_set(plan.val(), dir, stats, opts);
  const std::size_t total = train_set.size() + val_set.size() + Dataset(plan.test(), dir, stats, opts).size();

  auto evaluate = [&](const std::function<Tensor(std::size_t)>& predict) {
    MetricAccumulator acc(cfg.model.t_out, cfg.loss.tau, kThetaAct, kMinutesPerFrame, {});
    for (std::size_t i = 0; i < val_set.size(); ++i) {
      const auto& city = val_set.city(val_set.refs()[i].city);
      acc.add(predict(i), val_set.raw_target(i),
              make_road_map(crop_spatial(city.road.grid, city.height, city.width)));
    }
    return acc.report("", "val");
  };
  auto model_report = [&](bool zero_prior) {
    TrainConfig c = cfg;
    c.model.zero_prior = zero_prior;
    TrainHooks hooks;
    hooks.workers = 1;
    const TrainResult r = train(c, train_set, val_set, hooks);
    const auto model = model_from_checkpoint(r.best);
    NoGradGuard g;
    return evaluate([&](std::size_t i) {
      const Sample s = val_set.sample(i);
      const auto& city = val_set.city(s.city);
      const Tensor x = reshape(s.x, {1, s.x.size(0), s.x.size(1), s.x.size(2), s.x.size(3)});
      const Tensor yhat = crop_spatial(invert_norm_forecast(model.forward(x, city.road), stats), city.height, city.width);
      return reshape(yhat, {yhat.size(1), yhat.size(2), yhat.size(3), yhat.size(4)});
    });
  };
  const MetricReport full = model_report(false);
  const MetricReport ablated = model_report(true);
  const MetricReport ha = evaluate([&](std::size_t i) { return historical_average(val_set.raw_input(i), cfg.model.t_out); });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const bool mae_ok = full.road_mae < ha.road_mae && full.road_mae < ablated.road_mae;
  const bool off_ok = full.offroad_activation_rate < ha.offroad_activation_rate &&
                      full.offroad_activation_rate < ablated.offroad_activation_rate;
  Outcome o;
  o.pass = total == 200 && mae_ok && off_ok && secs <= 1800;
  std::ostringstream os;
  os << total << " samples (" << val_set.size() << " val); road-MAE full " << fmt("%.5f", full.road_mae) << " / HA "
     << fmt("%.5f", ha.road_mae) << " / zero-prior " << fmt("%.5f", ablated.road_mae) << (mae_ok ? " ok" : " NOT lower")
     << "; off-road rate full " << fmt("%.4f", full.offroad_activation_rate) << " / HA "
     << fmt("%.4f", ha.offroad_activation_rate) << " / zero-prior " << fmt("%.4f", ablated.offroad_activation_rate)
     << (off_ok ? " ok" : " NOT lower") << "; " << fmt("%.0f", secs) << " s";
  o.detail = os.str();
  return o;
}

// ---- 11: end-to-end reproducibility -------------------------------------------------

std::string file_bytes(const fs::path& p) { return fs::exists(p) ? read_text(p) : std::string("<missing>"); }

Outcome c11_reproducibility() {
  const fs::path dir = scratch_dir("c11");
  RunConfig cfg;
  cfg.data_dir = (dir / "data").string();
  cfg.output_dir = (dir / "run").string();
  cfg.synth.hw = 16;
  cfg.synth.t = 36;
  cfg.synth.movies = 8;
  cfg.train.epochs = 2;
  cfg.train.batch = 4;
  cfg.train.model.base_channels = 4;
  cfg.train.model.hidden = 16;
  const fs::path config_file = dir / "config.json";
  write_text(config_file, to_json(cfg).dump(2));

  const std::vector<std::string> artifacts{"eval_test.json", "eval_test_horizons.csv", "predict_test/forecast.gtc",
                                           "predict_test/error_heatmap.gtc", "train_log.jsonl", "checkpoint/manifest.json"};
  auto run = [&](std::vector<std::string>& out) {
    log::reset_warning_count();
    for (const char* cmd : {"synth", "train", "eval", "predict"}) {
      // CLI progress would interleave with the verdict lines.
      std::ostringstream sink;
      auto* saved = std::cout.rdbuf(sink.rdbuf());
      const int code = run_cli({cmd, "--config", config_file.string()});
      std::cout.rdbuf(saved);
      if (code != 0) return std::string(cmd) + " exited " + std::to_string(code);
    }
    out.clear();
    for (const auto& a : artifacts) out.push_back(file_bytes(fs::path(cfg.output_dir) / a));
    return std::string();
  };
  std::vector<std::string> first, second;
  std::string err = run(first);
  if (err.empty()) {
    fs::remove_all(dir / "data");
    fs::remove_all(dir / "run");
    err = run(second);
  }
  if (!err.empty()) return {false, err};
  std::vector<std::string> differing;
  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    if (first[i] == "<missing>") differing.push_back(artifacts[i] + " missing");
    else if (first[i] != second[i]) differing.push_back(artifacts[i]);
  }
  Outcome o;
  o.pass = differing.empty();
  o.detail = differing.empty() ? "synth/train/eval/predict from " + config_file.filename().string() + "; " +
                                     std::to_string(artifacts.size()) + " artifacts byte-identical on rerun"
                               : "differs: " + differing.front();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::pair<std::string, std::function<Outcome()>>>> all{
      {"c1", {"gradient fidelity", c1_gradient_fidelity}},
      {"c2", {"kernel oracles", c2_kernel_oracles}},
      {"c3", {"topology oracle", c3_topology_oracle}},
      {"c4", {"loss identities", c4_loss_identities}},
      {"c5", {"fusion residual identity", c5_fusion_residual}},
      {"c6", {"decoder contracts", c6_decoder_contracts}},
      {"c7", {"receptive-field law", c7_receptive_field}},
      {"c8", {"metric oracles", c8_metric_oracles}},
      {"c9", {"training dynamics", c9_training_dynamics}},
      {"c10", {"road-conditioning signal", c10_road_conditioning}},
      {"c11", {"end-to-end reproducibility", c11_reproducibility}},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  log::set_sink([](log::Level, const std::string&) {});
  int failures = 0;
  for (const auto& [id, entry] : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) continue;
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << entry.first << ": " << o.detail << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
