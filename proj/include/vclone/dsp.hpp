#pragma once

#include "vclone/common.hpp"

#include <cmath>
#include <filesystem>

namespace vclone {

/// Mono audio in [-1, 1].
struct Waveform {
  Vector samples;
  int sample_rate_hz = 16000;

  Index size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
  /// Throws out_of_range / invalid_argument when the invariants do not hold.
  void validate() const;
};

enum class WindowKind { hann, rectangular };

struct FrameParams {
  int window_length = 400;
  int hop = 160;
  int fft_size = 512;
  WindowKind window = WindowKind::hann;

  int bins() const { return fft_size / 2 + 1; }
  void validate() const;
  bool operator==(const FrameParams&) const = default;
};

/// T x (fft_size/2 + 1), one row per frame.
struct ComplexSpectrogram {
  ComplexMatrix frames;
  FrameParams params;
  int sample_rate_hz = 16000;

  Index num_frames() const { return frames.rows(); }
};

struct MelFilterbank {
  Matrix weights;  // K x bins
  double low_hz = 0.0;
  double high_hz = 8000.0;
  int sample_rate_hz = 16000;
  int fft_size = 512;

  Index channels() const { return weights.rows(); }
};

/// Log-compressed mel energies in dB, T x K.
struct MelSpectrogram {
  Matrix frames;
  FrameParams params;

  Index num_frames() const { return frames.rows(); }
  Index channels() const { return frames.cols(); }
};

enum class FeatureMode { log_mel, mfcc };

struct FeatureSequence {
  Matrix frames;  // T x D
  FeatureMode mode = FeatureMode::log_mel;

  Index num_frames() const { return frames.rows(); }
  Index width() const { return frames.cols(); }
};

// ---------------------------------------------------------------------------
// WAV I/O: RIFF, PCM signed 16-bit little-endian, mono.

Waveform load_wav(const std::filesystem::path& path);
void write_wav(const Waveform& w, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Framing and Fourier analysis.

Vector make_window(WindowKind kind, int length);

/// floor((len - window)/hop) + 1 when len >= window, else 0.
Index frame_count(Index signal_length, const FrameParams& p);

/// One windowed frame per row.
Matrix frame_signal(const Eigen::Ref<const Vector>& x, const FrameParams& p);
inline Matrix frame_signal(const Waveform& w, const FrameParams& p) {
  return frame_signal(w.samples, p);
}

ComplexSpectrogram stft(const Waveform& w, const FrameParams& p);

/// True when the squared window overlap-adds to a constant at this hop.
bool satisfies_cola(const FrameParams& p);

/// Least-squares overlap-add inverse, normalized by the summed squared window.
/// Output length is (T - 1) * hop + window_length.
Waveform istft(const ComplexSpectrogram& s);

// ---------------------------------------------------------------------------
// Mel analysis.

template <typename Scalar>
Scalar hz_to_mel(Scalar hz) {
  using std::log10;
  return Scalar(2595) * log10(Scalar(1) + hz / Scalar(700));
}

template <typename Scalar>
Scalar mel_to_hz(Scalar mel) {
  using std::pow;
  return Scalar(700) * (pow(Scalar(10), mel / Scalar(2595)) - Scalar(1));
}

MelFilterbank build_mel_filterbank(int fft_size, int sample_rate_hz, int channels,
                                   double low_hz, double high_hz);

inline constexpr double kPowerFloor = 1e-10;
inline constexpr double kDefaultFloorDb = -100.0;

MelSpectrogram mel_spectrogram(const Waveform& w, const FrameParams& p,
                               const MelFilterbank& fb,
                               double floor_db = kDefaultFloorDb);

/// Orthonormal DCT-II basis, rows are output coefficients: n_coeffs x size.
template <typename Scalar>
MatrixX<Scalar> dct_matrix(Index n_coeffs, Index size) {
  MatrixX<Scalar> d(n_coeffs, size);
  const Scalar pi = Scalar(3.14159265358979323846);
  for (Index k = 0; k < n_coeffs; ++k) {
    const Scalar scale = k == 0 ? std::sqrt(Scalar(1) / Scalar(size))
                                : std::sqrt(Scalar(2) / Scalar(size));
    for (Index n = 0; n < size; ++n) {
      d(k, n) = scale * std::cos(pi * Scalar(k) * (Scalar(2 * n + 1)) /
                                 Scalar(2 * size));
    }
  }
  return d;
}

FeatureSequence mfcc(const MelSpectrogram& m, int n_coeffs = 13);

/// Recovers the log-mel frames from a full-width MFCC sequence.
Matrix inverse_mfcc(const FeatureSequence& c);

/// Maps dB entries onto [0, ~1]: (db - floor_db) / -floor_db. The synthesizer
/// and vocoder exchange mels in this range.
MelSpectrogram to_unit_range(const MelSpectrogram& m, double floor_db = kDefaultFloorDb);
MelSpectrogram from_unit_range(const MelSpectrogram& m, double floor_db = kDefaultFloorDb);

/// Everything needed to turn a waveform into a feature sequence.
struct FeatureConfig {
  FrameParams frame;
  int channels = 40;
  double low_hz = 0.0;
  double high_hz = 8000.0;
  double floor_db = kDefaultFloorDb;
  FeatureMode mode = FeatureMode::log_mel;
  int n_mfcc = 13;
};

FeatureSequence extract_features(const Waveform& w, const FeatureConfig& cfg);

/// Unit-range mel frames at the configured resolution.
MelSpectrogram extract_unit_mel(const Waveform& w, const FeatureConfig& cfg);

}  // namespace vclone
