#include "rcsnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace rcsnet {

std::vector<std::string> traffic_channel_names() {
  std::vector<std::string> out;
  for (const char* h : kHeadingNames) {
    out.push_back(std::string("volume_") + h);
    out.push_back(std::string("speed_") + h);
  }
  return out;
}

double Corridor::demand(std::size_t dir, double t) const {
  return amplitude[dir] * 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * t / period + phase[dir]));
}

namespace {

// Distinct line positions in [1, n-2], at least `gap` apart where possible.
std::vector<std::size_t> pick_lines(std::mt19937_64& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) candidates.push_back(i);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const std::size_t gap = std::max<std::size_t>(2, n / (2 * std::max<std::size_t>(count, 1) + 1));
  std::vector<std::size_t> out;
  for (std::size_t c : candidates) {
    if (out.size() == count) break;
    const bool spaced = std::all_of(out.begin(), out.end(), [&](std::size_t o) { return (c > o ? c - o : o - c) >= gap; });
    if (spaced) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void randomize(Corridor& c, std::mt19937_64& rng, const SynthProfile& p) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  c.period = in(p.period_min, p.period_max);
  c.wavelength = in(p.wavelength_min, p.wavelength_max);
  c.pulse_speed = in(p.pulse_speed_min, p.pulse_speed_max);
  for (std::size_t d = 0; d < 2; ++d) {
    c.amplitude[d] = in(p.demand_min, p.demand_max);
    c.phase[d] = in(0.0, 2.0 * std::numbers::pi);
    c.pulse_phase[d] = in(0.0, 2.0 * std::numbers::pi);
  }
}

// Travelling pulse along the corridor, diffused and normalized to unit mass.
std::vector<double> pulse_shape(const Corridor& c, std::size_t dir, double t, const SynthProfile& p) {
  const std::size_t n = c.cells.size();
  const double sign = dir == 0 ? 1.0 : -1.0;
  std::vector<double> u(n), next(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double arg = 2.0 * std::numbers::pi * (sign * double(s) - c.pulse_speed * t) / c.wavelength + c.pulse_phase[dir];
    const double v = std::max(0.0, std::cos(arg));
    u[s] = v * v;
  }
  // Reflecting ends keep the mass unchanged.
  for (std::size_t k = 0; k < p.diffusion_steps && n > 1; ++k) {
    for (std::size_t s = 0; s < n; ++s) {
      const double left = u[s == 0 ? 0 : s - 1];
      const double right = u[s + 1 == n ? s : s + 1];
      next[s] = u[s] + p.diffusion_rate * (left - 2.0 * u[s] + right);
    }
    u.swap(next);
  }
  double mass = 0;
  for (double v : u) mass += v;
  if (mass <= 0) {
    std::fill(u.begin(), u.end(), 1.0 / double(n));
  } else {
    for (auto& v : u) v /= mass;
  }
  return u;
}

}  // namespace

std::vector<Corridor> synth_layout(std::uint64_t seed, std::size_t h, std::size_t w, const SynthProfile& p) {
  if (h < 8 || w < 8 || h % 4 != 0 || w % 4 != 0) {
    throw ParameterError("synthetic city needs H, W >= 8 and multiples of 4, got " + std::to_string(h) + "x" +
                         std::to_string(w));
  }
  if (p.period_min <= 0 || p.period_max < p.period_min || p.wavelength_min <= 0 ||
      p.wavelength_max < p.wavelength_min || p.v_max <= 0 || p.s_max < 0 || p.demand_min < 0 ||
      p.demand_max < p.demand_min || p.diffusion_rate < 0 || p.diffusion_rate > 0.5) {
    throw ParameterError("invalid synthetic profile");
  }
  std::mt19937_64 rng(seed);
  std::vector<Corridor> out;
  for (std::size_t r : pick_lines(rng, h, p.horizontal)) {
    Corridor c;
    for (std::size_t j = 0; j < w; ++j) c.cells.emplace_back(r, j);
    c.heading = {0, 2};  // eastbound NE, westbound SW
    out.push_back(std::move(c));
  }
  for (std::size_t col : pick_lines(rng, w, p.vertical)) {
    Corridor c;
    for (std::size_t i = 0; i < h; ++i) c.cells.emplace_back(i, col);
    c.heading = {1, 3};  // southbound SE, northbound NW
    out.push_back(std::move(c));
  }
  for (std::size_t k = 0; k < p.diagonals; ++k) {
    const bool anti = k % 2 == 1;
    const std::ptrdiff_t span = std::ptrdiff_t(std::min(h, w) / 2);
    std::uniform_int_distribution<std::ptrdiff_t> pick(-span, span);
    const std::ptrdiff_t off = pick(rng);
    Corridor c;
    for (std::size_t i = 0; i < h; ++i) {
      const std::ptrdiff_t j = anti ? std::ptrdiff_t(w) - 1 - std::ptrdiff_t(i) + off : std::ptrdiff_t(i) + off;
      if (j >= 0 && j < std::ptrdiff_t(w)) c.cells.emplace_back(i, std::size_t(j));
    }
    c.heading = anti ? std::array<std::size_t, 2>{2, 0} : std::array<std::size_t, 2>{1, 3};
    if (c.cells.size() >= 4) out.push_back(std::move(c));
  }
  for (auto& c : out) randomize(c, rng, p);
  return out;
}

SynthCity synth_city(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t t, const SynthProfile& p) {
  if (t < 24) throw ParameterError("synthetic movie needs T >= 24, got " + std::to_string(t));
  SynthCity city;
  city.corridors = synth_layout(seed, h, w, p);
  std::vector<float> road(h * w, 0.0f);
  for (const auto& c : city.corridors)
    for (auto [i, j] : c.cells) road[i * w + j] = 1.0f;

  std::vector<double> volume(4 * h * w);
  std::vector<float> movie(t * h * w * 8, 0.0f);
  for (std::size_t f = 0; f < t; ++f) {
    const double time = double(f + p.t_offset);
    std::fill(volume.begin(), volume.end(), 0.0);
    for (const auto& c : city.corridors) {
      const double len = double(c.cells.size());
      for (std::size_t dir = 0; dir < 2; ++dir) {
        const double mass = c.demand(dir, time) * len;
        const auto shape = pulse_shape(c, dir, time, p);
        const std::size_t hd = c.heading[dir];
        for (std::size_t s = 0; s < c.cells.size(); ++s) {
          const auto [i, j] = c.cells[s];
          volume[(hd * h + i) * w + j] += mass * shape[s];
        }
      }
    }
    float* frame = movie.data() + f * h * w * 8;
    for (std::size_t q = 0; q < h * w; ++q) {
      if (road[q] == 0.0f) continue;
      for (std::size_t d = 0; d < 4; ++d) {
        const double v = volume[d * h * w + q];
        frame[q * 8 + 2 * d] = float(v);
        frame[q * 8 + 2 * d + 1] = float(p.s_max * (1.0 - std::min(1.0, v / p.v_max)));
      }
    }
  }
  city.movie = Tensor({t, h, w, 8}, std::move(movie));
  city.road = Tensor({h, w}, std::move(road));
  return city;
}

std::vector<double> synth_volume_totals(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t t,
                                        const SynthProfile& p) {
  const auto corridors = synth_layout(seed, h, w, p);
  std::vector<double> out(t, 0.0);
  for (std::size_t f = 0; f < t; ++f) {
    const double time = double(f + p.t_offset);
    for (const auto& c : corridors)
      for (std::size_t dir = 0; dir < 2; ++dir) out[f] += c.demand(dir, time) * double(c.cells.size());
  }
  return out;
}

}  // namespace rcsnet
