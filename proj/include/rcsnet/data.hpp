#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rcsnet/container.hpp"
#include "rcsnet/tensor.hpp"
#include "rcsnet/topology.hpp"

namespace rcsnet {

inline constexpr double kStdFloor = 1e-6;

// Start indices s = 0, stride, ... with s + t_in + t_out <= t. Empty when the
// movie is too short.
std::vector<std::size_t> window_indices(std::size_t t, std::size_t t_in, std::size_t t_out, std::size_t stride);

// Movies are raw (T,H,W,8). Population std per channel, floored at kStdFloor.
NormStats fit_norm_stats(const std::vector<Tensor>& movies);

// Channel axis given explicitly; every other axis is broadcast.
Tensor apply_norm(const Tensor& x, const NormStats& stats, std::size_t channel_axis);
Tensor invert_norm(const Tensor& x, const NormStats& stats, std::size_t channel_axis);

// Differentiable inverse for model outputs (B,T,C,H,W).
template <typename T>
BasicTensor<T> invert_norm_forecast(const BasicTensor<T>& y, const NormStats& stats);

// Accepts (H,W) or channel-last (H,W,C); multi-channel maps are averaged over
// C first. Min-max scaled to [0,1]; a constant map yields zeros.
RoadMap normalize_road(const Tensor& raw);

struct MovieFile {
  std::filesystem::path path;
  std::string city;
};

struct CitySplit {
  std::string city;
  std::vector<MovieFile> train, val, test;
};

struct SplitPlan {
  std::vector<CitySplit> cities;  // sorted by city id

  std::vector<MovieFile> train() const;
  std::vector<MovieFile> val() const;
  std::vector<MovieFile> test() const;
};

// Per city: seeded shuffle, then floor(0.70 n) / floor(0.15 n) / remainder.
// Requires >= 3 files per city; warns when a split comes out empty.
SplitPlan split_files(const std::vector<MovieFile>& files, std::uint64_t seed);

// Zero-pads the trailing two axes up to multiples of `multiple`.
Tensor pad_spatial(const Tensor& x, std::size_t multiple);
// Crops the trailing two axes to (h, w).
template <typename T>
BasicTensor<T> crop_spatial(const BasicTensor<T>& x, std::size_t h, std::size_t w);

enum class Split { Train, Val, Test };
const char* split_name(Split s);
Split parse_split(const std::string& name);

// Dataset directory layout: <root>/<city>/road.gtc and <root>/<city>/movie_*.gtc.
std::vector<MovieFile> discover_movies(const std::filesystem::path& root);
std::filesystem::path road_path(const std::filesystem::path& root, const std::string& city);

struct Sample {
  Tensor x;  // (C,T_in,H,W) normalized, padded
  Tensor y;  // (T_out,C,H,W) normalized, padded
  std::size_t city = 0;
  std::size_t file = 0;
  std::size_t start = 0;
};

struct Batch {
  Tensor x;  // (B,C,T_in,H,W)
  Tensor y;  // (B,T_out,C,H,W)
  std::size_t city = 0;
  std::vector<std::size_t> members;  // sample indices
  std::size_t id = 0;
};

struct DatasetOptions {
  std::size_t t_in = 12;
  std::size_t t_out = 12;
  std::size_t stride = 6;
  std::size_t pad_multiple = 4;
  // When set, this road map is used for every city instead of <city>/road.gtc.
  std::filesystem::path road_override;
};

// Movies of one split. Samples are padded and normalized on demand and are ordered by
// (file index, window index).
class Dataset {
 public:
  struct City {
    std::string name;
    RoadMap road;  // padded
    std::size_t height = 0, width = 0;  // original extent
  };
  struct SampleRef {
    std::size_t city = 0, file = 0, start = 0;
  };

  Dataset() = default;
  Dataset(const std::vector<MovieFile>& files, const std::filesystem::path& root, const NormStats& stats,
          const DatasetOptions& options);

  // Loads raw movies of the given files; used to fit statistics on train.
  static std::vector<Tensor> load_raw(const std::vector<MovieFile>& files);

  std::size_t size() const { return refs_.size(); }
  bool empty() const { return refs_.empty(); }
  const std::vector<SampleRef>& refs() const { return refs_; }
  const std::vector<City>& cities() const { return cities_; }
  const City& city(std::size_t i) const { return cities_.at(i); }
  const NormStats& stats() const { return stats_; }
  const DatasetOptions& options() const { return options_; }
  const Tensor& movie(std::size_t file) const { return movies_.at(file); }
  const MovieFile& file(std::size_t i) const { return files_.at(i); }

  Sample sample(std::size_t index) const;
  Batch batch(const std::vector<std::size_t>& indices, std::size_t id = 0) const;

  // Raw (unnormalized, unpadded) frames of a sample: input (C,T_in,H,W) and
  // target (T_out,C,H,W).
  Tensor raw_input(std::size_t index) const;
  Tensor raw_target(std::size_t index) const;

  // Same-city batches; the last batch of a city may be short. Without a
  // seed, batches follow sample order. With one, samples are shuffled within
  // each city and the batch order is shuffled as well.
  std::vector<std::vector<std::size_t>> batches(std::size_t batch_size,
                                                std::optional<std::uint64_t> shuffle_seed = std::nullopt) const;

 private:
  std::vector<MovieFile> files_;
  std::vector<Tensor> movies_;  // raw (T,H,W,8), original extent
  std::vector<std::size_t> file_city_;
  std::vector<City> cities_;
  std::vector<SampleRef> refs_;
  NormStats stats_;
  DatasetOptions options_;
};

}  // namespace rcsnet
