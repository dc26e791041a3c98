#pragma once

#include "vclone/dsp.hpp"
#include "vclone/nn.hpp"

#include <cstdint>
#include <vector>

namespace vclone {

enum class UpsampleMode { repeat, linear };

struct VocoderConfig {
  Index mel_channels = 80;
  Index conditioning = 32;
  Index hidden = 128;
  int layers = 1;
  int hop = 160;
  UpsampleMode upsample = UpsampleMode::repeat;
};

/// Mel frames are projected to C dims and expanded to one vector per sample.
/// Layer 0 reads [prev sample | cond], layer l > 0 reads [h_{l-1} | cond].
/// The head is tanh(w . h_top + b).
struct VocoderParams {
  Matrix cond_weight;  // C x K
  Vector cond_bias;
  std::vector<GruLayer> gru;
  Vector output_weight;  // H
  double output_bias = 0.0;
  int hop = 160;
  UpsampleMode upsample = UpsampleMode::repeat;

  Index mel_channels() const { return cond_weight.cols(); }
  Index conditioning() const { return cond_weight.rows(); }
  Index hidden() const { return output_weight.size(); }
  VocoderConfig config() const;

  static VocoderParams zeros(const VocoderConfig& cfg);
  /// Uniform +-1/sqrt(H) everywhere except the output head, which starts at zero.
  static VocoderParams random(const VocoderConfig& cfg, Rng& rng);
  ParamList params();
};

/// L x C with L = hop * T.
struct ConditioningTrack {
  Matrix values;

  Index size() const { return values.rows(); }
};

ConditioningTrack upsample_conditioning(const MelSpectrogram& m, const Matrix& weight,
                                        const Vector& bias, int hop, UpsampleMode mode);
inline ConditioningTrack upsample_conditioning(const VocoderParams& p, const MelSpectrogram& m) {
  return upsample_conditioning(m, p.cond_weight, p.cond_bias, p.hop, p.upsample);
}

/// One hidden vector per layer.
using VocoderState = std::vector<Vector>;
VocoderState initial_state(const VocoderParams& p);

/// One recurrent update; returns the prediction for the next sample, in (-1, 1).
double wavernn_step(const VocoderParams& p, double prev_sample, const Vector& cond,
                    VocoderState& state);

double vocoder_loss(const Vector& pred, const Vector& target);

/// Predictions with the true previous sample as input at every step.
Vector teacher_forced_predict(const VocoderParams& p, const ConditioningTrack& cond,
                              const Vector& target);

struct VocoderPair {
  MelSpectrogram mel;  // unit range
  Waveform audio;
};

/// Target trimmed to hop * T samples; throws when the audio is shorter.
Vector aligned_target(const VocoderPair& pair, int hop);

struct VocoderChunkGradients {
  double loss = 0.0;
  VocoderParams grads;
  VocoderState final_state;
};

/// Truncated BPTT over target[start, start + length) starting from `state`,
/// which is treated as a constant.
VocoderChunkGradients vocoder_chunk_gradients(const VocoderParams& p, const MelSpectrogram& mel,
                                              const Vector& target, Index start, Index length,
                                              const VocoderState& state);

struct VocoderTrainConfig {
  VocoderConfig model;
  int steps = 600;
  int chunk = 400;
  SgdConfig sgd{0.05, 1.0, 0.9};
  std::uint64_t seed = 1;
};

struct VocoderLogEntry {
  int step = 0;
  double loss = 0.0;
};

struct VocoderTrainResult {
  VocoderParams params;
  std::vector<VocoderLogEntry> log;
};

/// Each step is one chunk update. Chunks walk each clip in order carrying the
/// hidden state; clips are visited in a seeded shuffled order.
VocoderTrainResult train_vocoder(const std::vector<VocoderPair>& pairs,
                                 const VocoderTrainConfig& cfg);

/// Free-running generation: each prediction becomes the next input.
Waveform generate(const VocoderParams& p, const ConditioningTrack& cond, double seed_sample = 0.0,
                  int sample_rate_hz = 16000);

struct GriffinLimResult {
  Waveform audio;
  /// Spectral-consistency error after each iteration.
  std::vector<double> errors;
};

/// Frame-by-frame phase guess: each frame takes the phase of the overlap-add of
/// the frames before it, the first frame starts at zero phase.
ComplexMatrix sequential_phase_init(const Matrix& magnitude, const FrameParams& p);

/// `magnitude` is T x bins. Starts from sequential_phase_init.
GriffinLimResult griffin_lim(const Matrix& magnitude, const FrameParams& p, int iters = 60,
                             int sample_rate_hz = 16000);

/// Norm of |stft(x)| - magnitude over the full two-sided spectrum.
double spectral_consistency_error(const Waveform& x, const Matrix& magnitude, const FrameParams& p);

}  // namespace vclone
