#pragma once

#include <map>
#include <string>

#include "lsc/params.hpp"

namespace lsc::numcore {

// Binary container of named tensors. Layout, all little-endian:
//   magic "LSCKPT01", u32 version = 1, u64 entry count,
//   per entry (sorted by name): u32 name length, name bytes,
//   u32 rank, u64 dims..., f64 raw values.
// Round-trips are bit-exact.
void save_checkpoint(const ParamSet& ps, const std::string& path);
ParamSet load_checkpoint(const std::string& path);

// Several ParamSets in one file, entry names prefixed "<group>/".
void save_groups(const std::map<std::string, const ParamSet*>& groups, const std::string& path);
std::map<std::string, ParamSet> load_groups(const std::string& path);

}  // namespace lsc::numcore
