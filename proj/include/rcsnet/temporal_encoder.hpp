#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "rcsnet/layers.hpp"
#include "rcsnet/tensor.hpp"

namespace rcsnet {

struct BranchSpec {
  std::string name;
  std::size_t k = 3;  // temporal kernel size, odd
  std::size_t d = 1;  // temporal dilation
};

// Number of input frames one branch observes: 1 + (k - 1) * d.
std::size_t receptive_field(const BranchSpec& spec);

// short (3,1) -> 3, mid (3,2) -> 5, long (3,4) -> 9
std::array<BranchSpec, 3> default_branch_specs();

// Throws ConfigError when any branch is malformed or sees more than t_in frames.
void validate_branches(const std::array<BranchSpec, 3>& specs, std::size_t t_in);

template <typename T>
struct TemporalEncoderParams {
  Conv3dLayer<T> stem;                 // C -> base, 3x3x3
  std::array<Conv3dLayer<T>, 3> branches;  // base -> base, k_i x 3 x 3, temporal dilation d_i
  Conv3dLayer<T> fuse;                 // 3*base -> C_t, 1x1x1
  std::array<BranchSpec, 3> specs;

  static TemporalEncoderParams make(ParamInit& init, std::size_t channels, std::size_t base,
                                    const std::array<BranchSpec, 3>& specs);
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
  std::size_t out_channels() const { return fuse.weight.size(0); }
};

// X (B,C,T_in,H,W) -> (B,C_t,H,W). Stem and branches are ReLU-activated
// same-size convolutions; the fused map is ReLU-activated and averaged over T.
template <typename T>
BasicTensor<T> encode_traffic(const BasicTensor<T>& x, const TemporalEncoderParams<T>& params);

}  // namespace rcsnet
