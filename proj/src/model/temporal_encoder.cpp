#include "rcsnet/temporal_encoder.hpp"

#include <string>
#include <vector>

#include "rcsnet/ops.hpp"

namespace rcsnet {

std::size_t receptive_field(const BranchSpec& spec) {
  if (spec.k == 0 || spec.k % 2 == 0) {
    throw ConfigError("branch '" + spec.name + "': temporal kernel must be odd and >= 1");
  }
  if (spec.d == 0) throw ConfigError("branch '" + spec.name + "': dilation must be >= 1");
  return 1 + (spec.k - 1) * spec.d;
}

std::array<BranchSpec, 3> default_branch_specs() {
  return {BranchSpec{"short", 3, 1}, BranchSpec{"mid", 3, 2}, BranchSpec{"long", 3, 4}};
}

void validate_branches(const std::array<BranchSpec, 3>& specs, std::size_t t_in) {
  for (const auto& s : specs) {
    const std::size_t r = receptive_field(s);
    if (r > t_in) {
      throw ConfigError("branch '" + s.name + "' receptive field " + std::to_string(r) +
                        " exceeds T_in = " + std::to_string(t_in));
    }
  }
}

template <typename T>
TemporalEncoderParams<T> TemporalEncoderParams<T>::make(ParamInit& init, std::size_t channels,
                                                        std::size_t base,
                                                        const std::array<BranchSpec, 3>& specs) {
  TemporalEncoderParams p;
  p.specs = specs;
  p.stem = Conv3dLayer<T>::make(init, base, channels, 3, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    receptive_field(specs[i]);
    p.branches[i] = Conv3dLayer<T>::make(init, base, base, specs[i].k, 3, specs[i].d);
  }
  p.fuse = Conv3dLayer<T>::make(init, 2 * base, 3 * base, 1, 1);
  return p;
}

template <typename T>
void TemporalEncoderParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  stem.visit(prefix + ".stem", f);
  for (std::size_t i = 0; i < 3; ++i) branches[i].visit(prefix + ".branch_" + specs[i].name, f);
  fuse.visit(prefix + ".fuse", f);
}

template <typename T>
BasicTensor<T> encode_traffic(const BasicTensor<T>& x, const TemporalEncoderParams<T>& params) {
  if (x.dim() != 5) throw DimensionError("encode_traffic expects (B,C,T,H,W), got " + shape_str(x.shape()));
  validate_branches(params.specs, x.size(2));
  const auto stem = relu(params.stem(x));
  std::vector<BasicTensor<T>> parts;
  for (const auto& b : params.branches) parts.push_back(relu(b(stem)));
  const auto fused = relu(params.fuse(concat(parts, 1)));
  return mean_axis(fused, 2);
}

template struct TemporalEncoderParams<float>;
template struct TemporalEncoderParams<double>;
template BasicTensor<float> encode_traffic(const BasicTensor<float>&, const TemporalEncoderParams<float>&);
template BasicTensor<double> encode_traffic(const BasicTensor<double>&, const TemporalEncoderParams<double>&);

}  // namespace rcsnet
