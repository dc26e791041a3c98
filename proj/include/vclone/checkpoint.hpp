#pragma once

#include "vclone/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vclone {

/// Row-major float32 tensor. Rank 0 holds a single value.
struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;

  static Tensor scalar(std::string name, double value);
  static Tensor from_vector(std::string name, const Vector& v);
  static Tensor from_matrix(std::string name, const Matrix& m);

  double to_scalar() const;
  Vector to_vector() const;
  Matrix to_matrix() const;
};

/// Layout: "VCKP1", u32 version, u32-prefixed kind, u32 tensor count, then per
/// tensor u32-prefixed name, u32 rank, rank x u32 dims, float32 data; finally a
/// CRC32 of every preceding byte. All integers and floats little-endian.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;
  std::vector<Tensor> tensors;

  /// Throws duplicate_name when the name is taken.
  void add(Tensor t);
  bool contains(std::string_view name) const;
  /// Throws invalid_argument naming the missing tensor.
  const Tensor& at(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Also checks the kind tag.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_kind);

std::uint32_t crc32(std::string_view bytes);

}  // namespace vclone
