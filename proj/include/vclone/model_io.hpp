#pragma once

#include "vclone/checkpoint.hpp"
#include "vclone/encoder.hpp"
#include "vclone/synthesizer.hpp"
#include "vclone/vocoder.hpp"

namespace vclone {

inline constexpr std::string_view kEncoderKind = "encoder";
inline constexpr std::string_view kSynthesizerKind = "synthesizer";
inline constexpr std::string_view kVocoderKind = "vocoder";
inline constexpr std::string_view kDvectorKind = "dvector";

/// Matrices become rank-2 tensors, vectors rank 1, scalars rank 0.
Checkpoint params_to_checkpoint(std::string_view kind, const ParamList& params);
/// Copies every listed parameter from the checkpoint; shapes must match.
void params_from_checkpoint(const Checkpoint& ckpt, const ParamList& params);

Checkpoint to_checkpoint(const EncoderModel& m);
EncoderModel encoder_from_checkpoint(const Checkpoint& ckpt);

Checkpoint to_checkpoint(const SynthParams& p);
SynthParams synthesizer_from_checkpoint(const Checkpoint& ckpt);

Checkpoint to_checkpoint(const VocoderParams& p);
VocoderParams vocoder_from_checkpoint(const Checkpoint& ckpt);

Checkpoint to_checkpoint(const Dvector& d);
Dvector dvector_from_checkpoint(const Checkpoint& ckpt);

}  // namespace vclone
