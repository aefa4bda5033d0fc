#include "rcsnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "rcsnet/log.hpp"
#include "rcsnet/ops.hpp"

namespace rcsnet {

namespace fs = std::filesystem;

std::vector<std::size_t> window_indices(std::size_t t, std::size_t t_in, std::size_t t_out, std::size_t stride) {
  if (stride == 0) throw ParameterError("window stride must be >= 1");
  if (t_in == 0 || t_out == 0) throw ParameterError("T_in and T_out must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s + t_in + t_out <= t; s += stride) out.push_back(s);
  return out;
}

NormStats fit_norm_stats(const std::vector<Tensor>& movies) {
  std::array<double, 8> sum{}, sq{};
  std::size_t count = 0;
  for (const auto& m : movies) {
    if (m.dim() != 4 || m.size(3) != 8) throw DimensionError("movie must be (T,H,W,8), got " + shape_str(m.shape()));
    auto d = m.data();
    for (std::size_t i = 0; i < d.size(); i += 8) {
      for (std::size_t c = 0; c < 8; ++c) sum[c] += d[i + c];
    }
    count += d.size() / 8;
  }
  if (count == 0) throw ValidationError("normalization statistics need at least one training frame");
  NormStats s;
  for (std::size_t c = 0; c < 8; ++c) s.mean[c] = sum[c] / double(count);
  // Second pass around the mean keeps the variance well conditioned.
  for (const auto& m : movies) {
    auto d = m.data();
    for (std::size_t i = 0; i < d.size(); i += 8) {
      for (std::size_t c = 0; c < 8; ++c) {
        const double e = d[i + c] - s.mean[c];
        sq[c] += e * e;
      }
    }
  }
  for (std::size_t c = 0; c < 8; ++c) s.std[c] = std::max(std::sqrt(sq[c] / double(count)), kStdFloor);
  return s;
}

namespace {

Tensor map_channels(const Tensor& x, std::size_t channel_axis, const NormStats& stats, bool forward) {
  const Shape& sh = x.shape();
  if (channel_axis >= sh.size() || sh[channel_axis] != 8) {
    throw DimensionError("normalization expects 8 channels on axis " + std::to_string(channel_axis) + ", got " +
                         shape_str(sh));
  }
  std::size_t inner = 1;
  for (std::size_t a = channel_axis + 1; a < sh.size(); ++a) inner *= sh[a];
  auto src = x.data();
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::size_t c = (i / inner) % 8;
    out[i] = forward ? float((src[i] - stats.mean[c]) / stats.std[c]) : float(src[i] * stats.std[c] + stats.mean[c]);
  }
  return Tensor(sh, std::move(out));
}

}  // namespace

Tensor apply_norm(const Tensor& x, const NormStats& stats, std::size_t channel_axis) {
  return map_channels(x, channel_axis, stats, true);
}

Tensor invert_norm(const Tensor& x, const NormStats& stats, std::size_t channel_axis) {
  return map_channels(x, channel_axis, stats, false);
}

template <typename T>
BasicTensor<T> invert_norm_forecast(const BasicTensor<T>& y, const NormStats& stats) {
  if (y.dim() != 5 || y.size(2) != 8) throw DimensionError("forecast must be (B,T,8,H,W), got " + shape_str(y.shape()));
  std::vector<T> sd(8), mu(8);
  for (std::size_t c = 0; c < 8; ++c) {
    sd[c] = T(stats.std[c]);
    mu[c] = T(stats.mean[c]);
  }
  const Shape col{1, 1, 8, 1, 1};
  return add(mul(y, BasicTensor<T>(col, sd)), BasicTensor<T>(col, mu));
}

template BasicTensor<float> invert_norm_forecast(const BasicTensor<float>&, const NormStats&);
template BasicTensor<double> invert_norm_forecast(const BasicTensor<double>&, const NormStats&);

RoadMap normalize_road(const Tensor& raw) {
  if (!raw.defined() || raw.numel() == 0) throw ValidationError("road map is empty");
  std::size_t h = 0, w = 0, c = 1;
  if (raw.dim() == 2) {
    h = raw.size(0);
    w = raw.size(1);
  } else if (raw.dim() == 3) {
    h = raw.size(0);
    w = raw.size(1);
    c = raw.size(2);
  } else {
    throw DimensionError("road map must be (H,W) or (H,W,C), got " + shape_str(raw.shape()));
  }
  auto src = raw.data();
  std::vector<float> v(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    double acc = 0;
    for (std::size_t k = 0; k < c; ++k) acc += src[i * c + k];
    v[i] = float(acc / double(c));
  }
  for (float x : v) {
    if (!std::isfinite(x)) throw ValidationError("road map contains non-finite values");
  }
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mn = *lo, mx = *hi;
  if (mx > mn) {
    for (auto& x : v) x = float((x - mn) / (mx - mn));
  } else {
    std::fill(v.begin(), v.end(), 0.0f);
  }
  return make_road_map(Tensor({1, h, w}, std::move(v)));
}

std::vector<MovieFile> SplitPlan::train() const {
  std::vector<MovieFile> out;
  for (const auto& c : cities) out.insert(out.end(), c.train.begin(), c.train.end());
  return out;
}

std::vector<MovieFile> SplitPlan::val() const {
  std::vector<MovieFile> out;
  for (const auto& c : cities) out.insert(out.end(), c.val.begin(), c.val.end());
  return out;
}

std::vector<MovieFile> SplitPlan::test() const {
  std::vector<MovieFile> out;
  for (const auto& c : cities) out.insert(out.end(), c.test.begin(), c.test.end());
  return out;
}

SplitPlan split_files(const std::vector<MovieFile>& files, std::uint64_t seed) {
  std::map<std::string, std::vector<MovieFile>> by_city;
  for (const auto& f : files) by_city[f.city].push_back(f);
  SplitPlan plan;
  for (auto& [city, list] : by_city) {
    const std::size_t n = list.size();
    if (n < 3) {
      throw ValidationError("city " + city + " has " + std::to_string(n) + " movie files; at least 3 are required");
    }
    std::sort(list.begin(), list.end(), [](const MovieFile& a, const MovieFile& b) { return a.path < b.path; });
    std::mt19937_64 rng(seed);
    std::shuffle(list.begin(), list.end(), rng);
    const std::size_t n_train = (n * 70) / 100;
    const std::size_t n_val = (n * 15) / 100;
    CitySplit cs;
    cs.city = city;
    cs.train.assign(list.begin(), list.begin() + std::ptrdiff_t(n_train));
    cs.val.assign(list.begin() + std::ptrdiff_t(n_train), list.begin() + std::ptrdiff_t(n_train + n_val));
    cs.test.assign(list.begin() + std::ptrdiff_t(n_train + n_val), list.end());
    if (cs.val.empty()) log::warn("city " + city + ": validation split is empty (" + std::to_string(n) + " files)");
    if (cs.test.empty()) log::warn("city " + city + ": test split is empty (" + std::to_string(n) + " files)");
    plan.cities.push_back(std::move(cs));
  }
  return plan;
}

Tensor pad_spatial(const Tensor& x, std::size_t multiple) {
  if (multiple == 0) throw ParameterError("pad multiple must be >= 1");
  if (x.dim() < 2) throw DimensionError("pad_spatial needs rank >= 2, got " + shape_str(x.shape()));
  const Shape& sh = x.shape();
  const std::size_t h = sh[sh.size() - 2], w = sh[sh.size() - 1];
  const std::size_t ph = (h + multiple - 1) / multiple * multiple, pw = (w + multiple - 1) / multiple * multiple;
  if (ph == h && pw == w) return x;
  Shape out_shape = sh;
  out_shape[sh.size() - 2] = ph;
  out_shape[sh.size() - 1] = pw;
  const std::size_t outer = x.numel() / (h * w);
  std::vector<float> out(outer * ph * pw, 0.0f);
  auto src = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(src.data() + (o * h + i) * w, w, out.data() + (o * ph + i) * pw);
  return Tensor(std::move(out_shape), std::move(out));
}

template <typename T>
BasicTensor<T> crop_spatial(const BasicTensor<T>& x, std::size_t h, std::size_t w) {
  if (x.dim() < 2) throw DimensionError("crop_spatial needs rank >= 2, got " + shape_str(x.shape()));
  const std::size_t r = x.dim();
  if (h > x.size(r - 2) || w > x.size(r - 1)) {
    throw DimensionError("crop to " + std::to_string(h) + "x" + std::to_string(w) + " exceeds " + shape_str(x.shape()));
  }
  if (h == x.size(r - 2) && w == x.size(r - 1)) return x;
  return slice(slice(x, r - 2, 0, h), r - 1, 0, w);
}

template BasicTensor<float> crop_spatial(const BasicTensor<float>&, std::size_t, std::size_t);
template BasicTensor<double> crop_spatial(const BasicTensor<double>&, std::size_t, std::size_t);

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::vector<MovieFile> discover_movies(const fs::path& root) {
  if (!fs::is_directory(root)) throw ValidationError("data directory not found: " + root.string());
  std::vector<MovieFile> out;
  for (const auto& city_dir : fs::directory_iterator(root)) {
    if (!city_dir.is_directory()) continue;
    const std::string city = city_dir.path().filename().string();
    for (const auto& entry : fs::directory_iterator(city_dir.path())) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && name.starts_with("movie_") && entry.path().extension() == ".gtc") {
        out.push_back({entry.path(), city});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const MovieFile& a, const MovieFile& b) {
    return a.city != b.city ? a.city < b.city : a.path < b.path;
  });
  if (out.empty()) throw ValidationError("no movie_*.gtc files under " + root.string());
  return out;
}

fs::path road_path(const fs::path& root, const std::string& city) { return root / city / "road.gtc"; }

std::vector<Tensor> Dataset::load_raw(const std::vector<MovieFile>& files) {
  std::vector<Tensor> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    Tensor m = read_tensor(f.path);
    if (m.dim() != 4 || m.size(3) != 8) {
      throw ValidationError(f.path.string() + ": movie must be (T,H,W,8), got " + shape_str(m.shape()));
    }
    out.push_back(std::move(m));
  }
  return out;
}

Dataset::Dataset(const std::vector<MovieFile>& files, const fs::path& root, const NormStats& stats,
                 const DatasetOptions& options)
    : files_(files), stats_(stats), options_(options) {
  if (options.pad_multiple == 0) throw ParameterError("pad multiple must be >= 1");
  std::map<std::string, std::size_t> city_index;
  movies_ = load_raw(files);
  for (std::size_t fi = 0; fi < files.size(); ++fi) {
    const auto& f = files[fi];
    const Tensor& m = movies_[fi];
    auto it = city_index.find(f.city);
    if (it == city_index.end()) {
      City c;
      c.name = f.city;
      c.height = m.size(1);
      c.width = m.size(2);
      const fs::path rp = options.road_override.empty() ? road_path(root, f.city) : options.road_override;
      const RoadMap raw_road = normalize_road(read_tensor(rp));
      if (raw_road.height() != c.height || raw_road.width() != c.width) {
        throw ValidationError("road map of " + f.city + " is " + shape_str(raw_road.grid.shape()) +
                              ", movies are " + shape_str(m.shape()));
      }
      c.road = make_road_map(pad_spatial(raw_road.grid, options.pad_multiple));
      it = city_index.emplace(f.city, cities_.size()).first;
      cities_.push_back(std::move(c));
    }
    const City& c = cities_[it->second];
    if (m.size(1) != c.height || m.size(2) != c.width) {
      throw ValidationError(f.path.string() + ": spatial size " + shape_str(m.shape()) + " differs from city " +
                            f.city);
    }
    file_city_.push_back(it->second);
    const auto starts = window_indices(m.size(0), options.t_in, options.t_out, options.stride);
    if (starts.empty()) {
      log::warn(f.path.string() + ": " + std::to_string(m.size(0)) + " frames is shorter than T_in + T_out = " +
                std::to_string(options.t_in + options.t_out) + ", file skipped");
    }
    for (std::size_t s : starts) refs_.push_back({it->second, fi, s});
  }
}

Tensor Dataset::raw_input(std::size_t index) const {
  const SampleRef& r = refs_.at(index);
  const Tensor& m = movies_[r.file];
  const std::size_t hw = m.size(1) * m.size(2), ti = options_.t_in;
  auto src = m.data();
  std::vector<float> x(8 * ti * hw);
  for (std::size_t t = 0; t < ti; ++t) {
    const float* frame = src.data() + (r.start + t) * hw * 8;
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t c = 0; c < 8; ++c) x[(c * ti + t) * hw + p] = frame[p * 8 + c];
  }
  return Tensor({8, ti, m.size(1), m.size(2)}, std::move(x));
}

Tensor Dataset::raw_target(std::size_t index) const {
  const SampleRef& r = refs_.at(index);
  const Tensor& m = movies_[r.file];
  const std::size_t hw = m.size(1) * m.size(2), to = options_.t_out;
  auto src = m.data();
  std::vector<float> y(to * 8 * hw);
  for (std::size_t t = 0; t < to; ++t) {
    const float* frame = src.data() + (r.start + options_.t_in + t) * hw * 8;
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t c = 0; c < 8; ++c) y[(t * 8 + c) * hw + p] = frame[p * 8 + c];
  }
  return Tensor({to, 8, m.size(1), m.size(2)}, std::move(y));
}

Sample Dataset::sample(std::size_t index) const {
  const SampleRef& r = refs_.at(index);
  Sample s;
  s.x = apply_norm(pad_spatial(raw_input(index), options_.pad_multiple), stats_, 0);
  s.y = apply_norm(pad_spatial(raw_target(index), options_.pad_multiple), stats_, 1);
  s.city = r.city;
  s.file = r.file;
  s.start = r.start;
  return s;
}

Batch Dataset::batch(const std::vector<std::size_t>& indices, std::size_t id) const {
  if (indices.empty()) throw ContractError("empty batch");
  std::vector<Tensor> xs, ys;
  Batch b;
  b.city = refs_.at(indices.front()).city;
  for (std::size_t i : indices) {
    if (refs_.at(i).city != b.city) throw ContractError("batch mixes cities");
    Sample s = sample(i);
    xs.push_back(s.x);
    ys.push_back(s.y);
  }
  NoGradGuard guard;
  b.x = stack(xs, 0);
  b.y = stack(ys, 0);
  b.members = indices;
  b.id = id;
  return b;
}

std::vector<std::vector<std::size_t>> Dataset::batches(std::size_t batch_size,
                                                       std::optional<std::uint64_t> shuffle_seed) const {
  if (batch_size == 0) throw ParameterError("batch size must be >= 1");
  std::vector<std::vector<std::size_t>> per_city(cities_.size());
  for (std::size_t i = 0; i < refs_.size(); ++i) per_city[refs_[i].city].push_back(i);
  std::mt19937_64 rng(shuffle_seed.value_or(0));
  std::vector<std::vector<std::size_t>> out;
  for (auto& list : per_city) {
    if (shuffle_seed) std::shuffle(list.begin(), list.end(), rng);
    for (std::size_t i = 0; i < list.size(); i += batch_size) {
      out.emplace_back(list.begin() + std::ptrdiff_t(i),
                       list.begin() + std::ptrdiff_t(std::min(list.size(), i + batch_size)));
    }
  }
  if (shuffle_seed) std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace rcsnet
