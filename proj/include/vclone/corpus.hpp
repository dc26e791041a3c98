#pragma once

#include "vclone/dsp.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vclone {

/// A synthetic "speaker": a harmonic source with two resonant emphases.
struct SpeakerSpec {
  std::string speaker_id;
  double base_f0_hz = 120.0;
  double formant1_hz = 500.0;
  double formant2_hz = 1500.0;
  double amplitude = 0.5;  // output peak
  std::string accent = "western";
  std::string gender = "M";
};

inline constexpr double kMinF0Hz = 90.0;
inline constexpr double kMaxF0Hz = 300.0;
inline constexpr double kMinF0Ratio = 1.15;

/// Deterministic specs with base f0 values pairwise at least 15% apart.
std::vector<SpeakerSpec> make_speaker_specs(int count, std::uint64_t seed);

Waveform synth_speaker_utterance(const SpeakerSpec& spec, double duration_s, std::uint64_t seed,
                                 int sample_rate_hz = 16000);

struct CorpusEntry {
  std::filesystem::path wav_path;
  std::string transcript;
  std::string speaker_id;
};

const std::vector<std::string>& toy_sentences();

/// Manifest CSV `wav_path,transcript,speaker_id`; relative paths resolve
/// against the manifest's directory.
std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<CorpusEntry>& entries);

struct ToyCorpusConfig {
  int speakers = 8;
  int utterances_per_speaker = 10;
  int test_per_speaker = 2;
  double duration_s = 1.0;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 1;
};

struct ToyCorpus {
  std::vector<SpeakerSpec> speakers;
  std::vector<CorpusEntry> all;
  std::vector<CorpusEntry> train;
  std::vector<CorpusEntry> test;
};

/// Writes wavs/, manifest.csv, train.csv, test.csv and speakers.csv under dir.
ToyCorpus build_toy_corpus(const std::filesystem::path& dir, const ToyCorpusConfig& cfg);

}  // namespace vclone
