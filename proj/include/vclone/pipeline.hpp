#pragma once

#include "vclone/config.hpp"
#include "vclone/corpus.hpp"
#include "vclone/encoder.hpp"
#include "vclone/speaker_library.hpp"
#include "vclone/synthesizer.hpp"
#include "vclone/vocoder.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vclone {

/// Throws sample_rate_mismatch unless the file is at cfg.sample_rate_hz.
Waveform load_wav_at(const std::filesystem::path& path, const Config& cfg);

/// Encoder features for this model's front end.
FeatureConfig encoder_feature_config(const EncoderModel& model, const Config& cfg);

/// Groups manifest entries by speaker, in order of first appearance.
std::vector<SpeakerFeatures> load_speaker_features(const std::vector<CorpusEntry>& entries,
                                                   const Config& cfg);

Dvector embed_wav(const EncoderModel& model, const Waveform& w, const Config& cfg);

/// Text, unit-range mel and the d-vector of the same recording. The encoder is
/// only read.
std::vector<MelTargetPair> build_synth_pairs(const std::vector<CorpusEntry>& entries,
                                             const EncoderModel& encoder, const Config& cfg);

std::vector<VocoderPair> build_vocoder_pairs(const std::vector<CorpusEntry>& entries,
                                             const Config& cfg);

/// One d-vector per speaker: the normalized mean of its utterance embeddings.
std::map<std::string, Dvector> speaker_dvectors(const std::vector<CorpusEntry>& entries,
                                                const EncoderModel& encoder, const Config& cfg);

struct CloneRequest {
  std::string text;
  std::optional<std::filesystem::path> reference_wav;
  std::optional<std::filesystem::path> library_dir;
  std::string speaker_id;
  std::optional<std::filesystem::path> noise_clip;  // set to denoise the output
  int max_frames = 400;
};

struct CloneModels {
  EncoderModel encoder;
  SynthParams synthesizer;
  VocoderParams vocoder;

  static CloneModels load(const std::filesystem::path& encoder,
                          const std::filesystem::path& synthesizer,
                          const std::filesystem::path& vocoder);
};

struct CloneResult {
  Waveform audio;
  MelSpectrogram mel;
  Dvector speaker;
};

/// Reference wav or library id -> d-vector -> mel -> waveform -> optional
/// denoise. Output length is hop * max_frames.
CloneResult run_clone_pipeline(const CloneRequest& request, const CloneModels& models,
                               const Config& cfg);

}  // namespace vclone
