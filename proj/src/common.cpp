#include "vclone/common.hpp"

namespace vclone {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::not_a_wav: return "not-a-wav";
    case ErrorCode::unsupported_encoding: return "unsupported encoding";
    case ErrorCode::multichannel: return "multichannel unsupported";
    case ErrorCode::out_of_range: return "out of range";
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::shape_mismatch: return "shape mismatch";
    case ErrorCode::not_cola: return "not cola";
    case ErrorCode::degenerate_embedding: return "degenerate embedding";
    case ErrorCode::corpus_too_small: return "corpus too small";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::bad_crc: return "bad crc";
    case ErrorCode::duplicate_name: return "duplicate name";
    case ErrorCode::wrong_kind: return "wrong kind";
    case ErrorCode::unknown_key: return "unknown key";
    case ErrorCode::malformed_config: return "malformed config";
    case ErrorCode::unknown_speaker: return "unknown speaker";
    case ErrorCode::sample_rate_mismatch: return "sample rate mismatch";
  }
  return "unknown";
}

}  // namespace vclone
