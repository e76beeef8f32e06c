#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsc/params.hpp"
#include "lsc/tape.hpp"

namespace lsc::numcore {

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)). The init stream is
// derived from (seed, name) so a tensor's initial values do not depend on what
// else lives in the ParamSet or on registration order.
Tensor glorot(int64_t fan_in, int64_t fan_out, uint64_t seed, const std::string& name);

// Affine stack: dims = {in, hidden..., out}. Hidden layers are followed by
// relu; the output layer is linear unless relu_output is set. Parameters are
// named "<prefix>.w<i>" / "<prefix>.b<i>".
struct Mlp {
  std::string prefix;
  std::vector<int64_t> dims;
  bool relu_output = false;
  // Narrow relu layers (the 3-wide message functions) start with a small
  // positive bias so no channel is born dead; everything else keeps zero.
  double bias_init = 0.0;

  void init(ParamSet& ps, uint64_t seed) const;
  int apply(Tape& t, const ParamSet& ps, int x) const;
  int64_t out_dim() const { return dims.back(); }
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Bias-corrected update from accumulated gradients; zeroes them afterwards.
  void step(ParamSet& ps);

  struct Moments {
    Tensor m, v;
    int64_t t = 0;
  };
  std::map<std::string, Moments> state;
};

}  // namespace lsc::numcore
