#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rcsnet/tensor.hpp"

namespace rcsnet {

// Heading channels: direction d occupies channels 2d (volume) and 2d+1 (speed).
inline constexpr std::array<const char*, 4> kHeadingNames{"NE", "SE", "SW", "NW"};

std::vector<std::string> traffic_channel_names();

struct SynthProfile {
  std::size_t horizontal = 2;
  std::size_t vertical = 2;
  std::size_t diagonals = 1;
  double v_max = 2.0;  // volume at which speed reaches 0
  double s_max = 1.0;
  double demand_min = 0.15, demand_max = 0.45;  // mean volume per corridor cell at peak
  double period_min = 16, period_max = 40;      // frames
  double wavelength_min = 6, wavelength_max = 14;  // cells
  double pulse_speed_min = 0.4, pulse_speed_max = 1.2;  // cells per frame
  std::size_t diffusion_steps = 2;
  double diffusion_rate = 0.2;
  // First generated frame; lets several movies continue one timeline.
  std::size_t t_offset = 0;
};

struct Corridor {
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // (row, col) in travel order
  std::array<std::size_t, 2> heading{};  // forward, backward
  std::array<double, 2> amplitude{}, phase{}, pulse_phase{};
  double period = 0, wavelength = 0, pulse_speed = 0;

  // A (1 + sin(2 pi t / P + phi)) / 2, always >= 0.
  double demand(std::size_t dir, double t) const;
};

// Layout depends only on (seed, h, w, profile).
std::vector<Corridor> synth_layout(std::uint64_t seed, std::size_t h, std::size_t w, const SynthProfile& profile);

struct SynthCity {
  Tensor movie;  // (T,H,W,8) raw
  Tensor road;   // (H,W) in {0,1}
  std::vector<Corridor> corridors;
};

// Procedural city: corridors carry travelling demand pulses smoothed along
// the road. Each corridor direction distributes demand * length units of
// volume over its cells every frame. Speed is s_max (1 - min(1, v / v_max))
// on road cells, and every channel is 0 off road.
SynthCity synth_city(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t t, const SynthProfile& profile = {});

// Total volume per frame computed from the corridor parameters alone.
std::vector<double> synth_volume_totals(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t t,
                                        const SynthProfile& profile = {});

}  // namespace rcsnet
