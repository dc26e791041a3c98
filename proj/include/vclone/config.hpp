#pragma once

#include "vclone/corpus.hpp"
#include "vclone/denoise.hpp"
#include "vclone/dsp.hpp"
#include "vclone/encoder.hpp"
#include "vclone/metrics.hpp"
#include "vclone/synthesizer.hpp"
#include "vclone/vocoder.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vclone {

/// Flat `key = value` settings. Every field is a key of the same name.
struct Config {
  // audio
  int sample_rate_hz = 16000;
  int window_length = 400;
  int hop_samples = 160;
  int fft_size = 512;
  std::string window_kind = "hann";

  // features
  int encoder_mels = 40;
  int synth_mels = 80;
  int synth_fft_size = 1024;
  double mel_low_hz = 0.0;
  double mel_high_hz = 8000.0;
  double floor_db = -100.0;
  std::string encoder_feature_mode = "log_mel";
  int n_mfcc = 13;

  // encoder
  int encoder_layers = 3;
  int encoder_hidden = 64;
  int encoder_embedding = 32;
  int encoder_speakers_per_batch = 4;
  int encoder_utterances_per_speaker = 5;
  int encoder_window_frames = 80;
  int encoder_stride_frames = 40;
  int encoder_steps = 500;
  double encoder_learning_rate = 0.01;
  double encoder_clip_norm = 3.0;
  double verify_threshold = 0.75;

  // synthesizer
  int synth_embedding = 32;
  int synth_prenet = 32;
  int synth_decoder_hidden = 128;
  int synth_steps = 500;
  double synth_learning_rate = 0.05;
  double synth_momentum = 0.9;
  double synth_clip_norm = 3.0;
  int synth_max_frames = 400;

  // vocoder
  int vocoder_conditioning = 32;
  int vocoder_hidden = 128;
  int vocoder_layers = 1;
  std::string vocoder_upsample = "repeat";
  int vocoder_steps = 1000;
  int vocoder_chunk = 400;
  double vocoder_learning_rate = 0.05;
  double vocoder_momentum = 0.9;
  double vocoder_clip_norm = 1.0;

  // denoise
  int denoise_window_length = 400;
  int denoise_hop = 100;
  int denoise_fft_size = 512;
  double gate_k = 1.5;
  double mask_floor = 0.1;
  int gate_time_smoothing = 2;
  int gate_freq_smoothing = 0;

  // pitch / metrics / Griffin-Lim
  int griffin_lim_iters = 60;
  double pitch_f_min = 50.0;
  double pitch_f_max = 500.0;
  double voicing_threshold = 0.5;
  double gpe_deviation = 0.2;

  // corpus
  int corpus_speakers = 8;
  int corpus_utterances = 10;
  int corpus_test_per_speaker = 2;
  double corpus_duration_s = 1.0;

  std::uint64_t seed = 1;

  /// Range and enum checks; throws malformed_config.
  void validate() const;

  FrameParams frame() const;
  FrameParams denoise_frame() const;
  FeatureConfig encoder_features() const;
  FeatureConfig synth_features() const;
  EncoderTrainConfig encoder_training() const;
  SynthConfig synth_model() const;
  SynthTrainConfig synth_training() const;
  VocoderConfig vocoder_model() const;
  VocoderTrainConfig vocoder_training() const;
  GateParams gate() const;
  PitchParams pitch() const;
  ScoreConfig scoring() const;
  ToyCorpusConfig corpus() const;
};

/// Applies `key = value` lines on top of the defaults. Blank lines and `#`
/// comments are ignored; unknown keys and malformed values throw.
Config parse_config_text(std::string_view text);
Config parse_config(const std::filesystem::path& path);

/// Sets one key from its text form, with the same checks as parsing.
void set_config_value(Config& cfg, std::string_view key, std::string_view value);

std::vector<std::string> config_keys();

/// Every key with its current value, in declaration order.
std::string render_config(const Config& cfg);

}  // namespace vclone
