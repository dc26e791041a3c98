#pragma once

#include "vclone/dsp.hpp"
#include "vclone/encoder.hpp"
#include "vclone/nn.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vclone {

/// Grapheme inventory: 0 PAD, 1 UNK, 2 space, 3..28 a-z, 29 apostrophe,
/// 30..39 the punctuation marks . , ? ! - : ; " ( ).
class SymbolTable {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;
  static constexpr int kSpace = 2;
  static constexpr int kSize = 40;

  int id(char32_t symbol) const;
  /// Inverse of id() for ids >= 2.
  char32_t symbol(int id) const;
  int size() const { return kSize; }
};

struct TextSequence {
  std::vector<int> ids;

  std::size_t size() const { return ids.size(); }
};

/// Lowercases, collapses whitespace runs, maps unknown characters to UNK.
/// Input is UTF-8.
TextSequence encode_text(std::string_view raw, const SymbolTable& table = {});

struct SynthConfig {
  Index symbols = SymbolTable::kSize;
  Index embedding_size = 32;
  Index prenet_size = 32;
  Index speaker_size = 32;
  Index mel_channels = 80;
  Index decoder_hidden = 128;
};

/// Symbol embeddings -> two-layer ReLU pre-net -> mean-pooled text summary,
/// then an LSTM decoder over [previous frame | summary | d-vector].
struct SynthParams {
  Matrix embedding;  // V x Ds
  Matrix prenet1_weight;
  Vector prenet1_bias;
  Matrix prenet2_weight;
  Vector prenet2_bias;
  LstmLayer decoder;
  Matrix output_weight;  // K x Hd
  Vector output_bias;

  Index mel_channels() const { return output_weight.rows(); }
  Index prenet_size() const { return prenet2_weight.rows(); }
  Index speaker_size() const { return decoder.input_size() - mel_channels() - prenet_size(); }
  SynthConfig config() const;

  static SynthParams zeros(const SynthConfig& cfg);
  static SynthParams random(const SynthConfig& cfg, Rng& rng);
  ParamList params();
};

/// `mel` is in unit range (see to_unit_range).
struct MelTargetPair {
  TextSequence text;
  MelSpectrogram mel;
  Dvector speaker;
};

/// Pre-net output averaged over the text.
Vector text_summary(const SynthParams& p, const TextSequence& t);

/// Frame 0 is predicted from a zero go-frame, frame t > 0 from target frame t - 1.
MelSpectrogram decode_mel_teacher_forced(const SynthParams& p, const TextSequence& t,
                                         const MelSpectrogram& target, const Dvector& speaker);

/// Mean squared difference over all T x K entries.
double synth_loss(const MelSpectrogram& pred, const MelSpectrogram& target);

struct SynthGradients {
  double loss = 0.0;
  SynthParams grads;
};

SynthGradients synth_gradients(const SynthParams& p, const MelTargetPair& pair);

struct SynthTrainConfig {
  SynthConfig model;
  int steps = 2000;
  SgdConfig sgd{0.05, 3.0, 0.9};
  std::uint64_t seed = 1;
};

struct SynthLogEntry {
  int step = 0;
  double loss = 0.0;
};

struct SynthTrainResult {
  SynthParams params;
  std::vector<SynthLogEntry> log;
};

/// SGD on the teacher-forced loss, one pair per step drawn with a seeded RNG.
SynthTrainResult train_synthesizer(const std::vector<MelTargetPair>& pairs,
                                   const SynthTrainConfig& cfg);

/// Free-running decode for exactly max_frames frames.
MelSpectrogram infer_mel(const SynthParams& p, const TextSequence& t, const Dvector& speaker,
                         int max_frames);

/// Frame-averaged RMS difference over channels, in the mels' own units.
double mel_distortion(const MelSpectrogram& a, const MelSpectrogram& b);

}  // namespace vclone
