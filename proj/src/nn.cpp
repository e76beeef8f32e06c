#include "lsc/nn.hpp"

#include <cmath>

#include "lsc/common.hpp"
#include "lsc/rng.hpp"

namespace lsc::numcore {

Tensor glorot(int64_t fan_in, int64_t fan_out, uint64_t seed, const std::string& name) {
  Rng rng(derive_seed(seed, {fnv1a64(name)}));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros({fan_in, fan_out});
  for (double& v : t.data) v = rng.uniform(-a, a);
  return t;
}

void Mlp::init(ParamSet& ps, uint64_t seed) const {
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::string w = prefix + ".w" + std::to_string(i);
    const std::string b = prefix + ".b" + std::to_string(i);
    ps.add(w, glorot(dims[i], dims[i + 1], seed, w));
    ps.add(b, Tensor::full({dims[i + 1]}, bias_init));
  }
}

int Mlp::apply(Tape& t, const ParamSet& ps, int x) const {
  int cur = x;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    const int w = t.param(ps, prefix + ".w" + std::to_string(i));
    const int b = t.param(ps, prefix + ".b" + std::to_string(i));
    cur = t.affine(cur, w, b);
    const bool last = i + 2 == dims.size();
    if (!last || relu_output) cur = t.relu(cur);
  }
  return cur;
}

void soft_update(ParamSet& target, const ParamSet& online, double tau) {
  if (target.entries.size() != online.entries.size())
    throw NumericError("soft_update: entry count mismatch");
  auto ti = target.entries.begin();
  auto oi = online.entries.begin();
  for (; ti != target.entries.end(); ++ti, ++oi) {
    if (ti->first != oi->first) throw NumericError("soft_update: name mismatch " + ti->first);
    Tensor& tv = ti->second.value;
    const Tensor& ov = oi->second.value;
    if (!tv.same_shape(ov)) throw NumericError("soft_update: shape mismatch " + ti->first);
    for (size_t i = 0; i < tv.data.size(); ++i)
      tv.data[i] = tau * ov.data[i] + (1.0 - tau) * tv.data[i];
  }
}

void Adam::step(ParamSet& ps) {
  for (auto& [name, e] : ps.entries) {
    Moments& mo = state[name];
    if (mo.t == 0) {
      mo.m = Tensor::zeros(e.value.shape);
      mo.v = Tensor::zeros(e.value.shape);
    }
    mo.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(mo.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(mo.t));
    for (size_t i = 0; i < e.value.data.size(); ++i) {
      const double g = e.grad.data[i];
      mo.m.data[i] = beta1 * mo.m.data[i] + (1.0 - beta1) * g;
      mo.v.data[i] = beta2 * mo.v.data[i] + (1.0 - beta2) * g * g;
      const double mhat = mo.m.data[i] / bc1;
      const double vhat = mo.v.data[i] / bc2;
      e.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    e.grad.fill(0.0);
    if (!e.value.all_finite()) throw NumericError("adam: non-finite parameter " + name);
  }
}

}  // namespace lsc::numcore
