#pragma once

#include <map>
#include <string>

#include "lsc/tensor.hpp"

namespace lsc::numcore {

// Named parameter tensors with paired gradient storage. std::map keeps
// iteration order deterministic for the optimizer and checkpoint writer.
struct ParamSet {
  struct Entry {
    Tensor value;
    Tensor grad;
  };

  std::map<std::string, Entry> entries;

  void add(const std::string& name, Tensor init) {
    if (entries.count(name)) throw NumericError("paramset: duplicate entry " + name);
    Entry e;
    e.grad = Tensor::zeros(init.shape);
    e.value = std::move(init);
    entries.emplace(name, std::move(e));
  }

  bool has(const std::string& name) const { return entries.count(name) != 0; }

  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& grad(const std::string& name) { return at(name).grad; }

  Entry& at(const std::string& name) {
    auto it = entries.find(name);
    if (it == entries.end()) throw NumericError("paramset: no entry " + name);
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw NumericError("paramset: no entry " + name);
    return it->second;
  }

  void zero_grads() {
    for (auto& [name, e] : entries) e.grad.fill(0.0);
  }

  ParamSet clone() const {
    ParamSet out;
    for (const auto& [name, e] : entries) out.add(name, e.value);
    return out;
  }
};

// target <- tau * online + (1 - tau) * target, elementwise over matching names.
void soft_update(ParamSet& target, const ParamSet& online, double tau);

}  // namespace lsc::numcore
