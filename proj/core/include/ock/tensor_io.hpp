#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace ock {

// Binary tensor container used for corpus blobs and checkpoint entries.
//
// Layout (all integers little-endian):
//   magic   "OCKT"  (4 bytes)
//   version u32
//   rank    u32
//   dims    u32[rank]
//   payload f32[prod(dims)], row-major
inline constexpr uint32_t kTensorFormatVersion = 1;
inline constexpr int kMaxTensorRank = 8;

// Serializes `t` (cast to contiguous f32 on CPU). Throws std::runtime_error
// on I/O failure or unsupported rank.
void write_tensor(std::ostream& out, const torch::Tensor& t);
void write_tensor_file(const std::string& path, const torch::Tensor& t);

// Reads one tensor. `context` is prepended to error messages so callers can
// name the offending blob (e.g. a clip id). Throws on bad magic, version
// mismatch, or truncation.
torch::Tensor read_tensor(std::istream& in, const std::string& context);
torch::Tensor read_tensor_file(const std::string& path);

}  // namespace ock
