#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace vclone {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using ComplexMatrix = MatrixX<std::complex<double>>;

/// Every random draw in the library comes from one of these, seeded explicitly.
using Rng = std::mt19937_64;

enum class ErrorCode {
  io,
  not_a_wav,
  unsupported_encoding,
  multichannel,
  out_of_range,
  invalid_argument,
  shape_mismatch,
  not_cola,
  degenerate_embedding,
  corpus_too_small,
  bad_magic,
  bad_crc,
  duplicate_name,
  wrong_kind,
  unknown_key,
  malformed_config,
  unknown_speaker,
  sample_rate_mismatch,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vclone
