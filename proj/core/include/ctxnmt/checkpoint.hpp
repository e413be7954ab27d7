#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ctxnmt/tensor.hpp"

namespace ctxnmt {

/// Named-tensor container, one file, entry order preserved.
///
/// Byte layout (all integers little-endian):
///   magic    8 bytes   "CTXNMT1\n"
///   count    u64       number of entries
/// then per entry:
///   name_len u32       byte length of the UTF-8 name
///   name     name_len bytes
///   rank     u32
///   dims     rank x u64
///   values   product(dims) x f64, IEEE-754, row-major
///
/// Round-trips bitwise: load(save(x)) reproduces names, shapes, and value
/// bits exactly.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries);
void save_checkpoint(const std::string& path, const NamedTensors& entries);

/// Throws std::runtime_error with a format diagnostic (bad magic, truncated
/// entry, absurd sizes) naming the file.
NamedTensors load_checkpoint(const std::string& path);

}  // namespace ctxnmt
