#pragma once

#include "vclone/dsp.hpp"

namespace vclone {

/// Per-bin statistics of STFT magnitudes over a noise-only clip.
struct NoiseProfile {
  Vector mean;
  Vector stddev;

  Index bins() const { return mean.size(); }
};

struct GateParams {
  double threshold_k = 1.5;
  double mask_floor = 0.1;
  int time_smoothing = 2;  // half-width in frames
  int freq_smoothing = 0;  // half-width in bins; wider spreads narrowband peaks

  void validate() const;
};

NoiseProfile estimate_noise_profile(const Waveform& noise_clip, const FrameParams& p);

/// T x bins mask in [mask_floor, 1].
Matrix spectral_gate_mask(const ComplexSpectrogram& spec, const NoiseProfile& prof,
                          const GateParams& g);

/// Box average with windows truncated at the edges.
Matrix box_smooth(const Matrix& m, int time_half_width, int freq_half_width);

/// Gated resynthesis. The signal is zero-padded so every input sample sees full
/// overlap, then cropped back to the input length.
Waveform denoise(const Waveform& w, const Waveform& noise_clip, const FrameParams& p,
                 const GateParams& g);
Waveform denoise(const Waveform& w, const NoiseProfile& prof, const FrameParams& p,
                 const GateParams& g);

}  // namespace vclone
