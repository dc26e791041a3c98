#include "vclone/synthesizer.hpp"

#include <cmath>

namespace vclone {

namespace {

constexpr char32_t kPunctuation[] = {U'.', U',', U'?', U'!', U'-', U':', U';', U'"', U'(', U')'};
constexpr int kFirstLetter = 3;
constexpr int kApostrophe = 29;
constexpr int kFirstPunctuation = 30;

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f';
}

/// Minimal UTF-8 decoder; malformed bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto b = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (b < 0x80) {
      cp = b;
    } else if ((b & 0xE0) == 0xC0) {
      cp = b & 0x1F;
      extra = 1;
    } else if ((b & 0xF0) == 0xE0) {
      cp = b & 0x0F;
      extra = 2;
    } else if ((b & 0xF8) == 0xF0) {
      cp = b & 0x07;
      extra = 3;
    } else {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    if (i + std::size_t(extra) >= s.size() && extra > 0) {
      out.push_back(U'\uFFFD');
      break;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      const auto c = static_cast<unsigned char>(s[i + std::size_t(k)]);
      if ((c & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (c & 0x3F);
    }
    if (!ok) {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += std::size_t(extra) + 1;
  }
  return out;
}

Eigen::ArrayXd relu_mask(const Vector& pre) { return (pre.array() > 0.0).cast<double>(); }

struct SummaryPass {
  std::vector<Vector> embedded;
  std::vector<Vector> pre1;
  std::vector<Vector> act1;
  std::vector<Vector> pre2;
  Vector summary;
};

SummaryPass run_summary(const SynthParams& p, const TextSequence& t) {
  if (t.ids.empty()) throw Error(ErrorCode::invalid_argument, "synthesizer: empty text");
  SummaryPass s;
  s.summary = Vector::Zero(p.prenet_size());
  for (int id : t.ids) {
    if (id < 0 || id >= p.embedding.rows()) {
      throw Error(ErrorCode::out_of_range, "synthesizer: symbol id " + std::to_string(id));
    }
    Vector e = p.embedding.row(id).transpose();
    Vector z1 = p.prenet1_weight * e + p.prenet1_bias;
    Vector a1 = z1.cwiseMax(0.0);
    Vector z2 = p.prenet2_weight * a1 + p.prenet2_bias;
    s.summary += z2.cwiseMax(0.0);
    s.embedded.push_back(std::move(e));
    s.pre1.push_back(std::move(z1));
    s.act1.push_back(std::move(a1));
    s.pre2.push_back(std::move(z2));
  }
  s.summary /= double(t.ids.size());
  return s;
}

void check_conditioning(const SynthParams& p, const Dvector& speaker) {
  if (speaker.size() != p.speaker_size()) {
    throw Error(ErrorCode::shape_mismatch, "synthesizer: d-vector size " +
                                               std::to_string(speaker.size()) + " != " +
                                               std::to_string(p.speaker_size()));
  }
}

std::vector<Matrix> decoder_inputs(const SynthParams& p, const Vector& summary,
                                   const MelSpectrogram& target, const Dvector& speaker) {
  const Index k = p.mel_channels();
  if (target.channels() != k) {
    throw Error(ErrorCode::shape_mismatch, "synthesizer: target has " +
                                               std::to_string(target.channels()) + " channels");
  }
  if (target.num_frames() < 1) throw Error(ErrorCode::invalid_argument, "synthesizer: empty target");
  std::vector<Matrix> inputs;
  inputs.reserve(static_cast<std::size_t>(target.num_frames()));
  Vector x(p.decoder.input_size());
  x.segment(k, summary.size()) = summary;
  x.tail(speaker.size()) = speaker.values;
  for (Index t = 0; t < target.num_frames(); ++t) {
    x.head(k) = t == 0 ? Vector::Zero(k) : Vector(target.frames.row(t - 1).transpose());
    inputs.push_back(x);
  }
  return inputs;
}

}  // namespace

int SymbolTable::id(char32_t c) const {
  if (c == U' ') return kSpace;
  if (c >= U'a' && c <= U'z') return kFirstLetter + int(c - U'a');
  if (c == U'\'') return kApostrophe;
  for (int i = 0; i < 10; ++i) {
    if (kPunctuation[i] == c) return kFirstPunctuation + i;
  }
  return kUnknown;
}

char32_t SymbolTable::symbol(int id) const {
  if (id == kSpace) return U' ';
  if (id >= kFirstLetter && id < kFirstLetter + 26) return U'a' + char32_t(id - kFirstLetter);
  if (id == kApostrophe) return U'\'';
  if (id >= kFirstPunctuation && id < kSize) return kPunctuation[id - kFirstPunctuation];
  throw Error(ErrorCode::out_of_range, "symbol table: id " + std::to_string(id) + " has no symbol");
}

TextSequence encode_text(std::string_view raw, const SymbolTable& table) {
  TextSequence seq;
  bool pending_space = false;
  for (char32_t c : decode_utf8(raw)) {
    if (is_space(c)) {
      pending_space = !seq.ids.empty();
      continue;
    }
    if (pending_space) seq.ids.push_back(SymbolTable::kSpace);
    pending_space = false;
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
    seq.ids.push_back(table.id(c));
  }
  if (seq.ids.empty()) throw Error(ErrorCode::invalid_argument, "text is empty after normalization");
  return seq;
}

SynthConfig SynthParams::config() const {
  return SynthConfig{embedding.rows(), embedding.cols(), prenet_size(), speaker_size(),
                     mel_channels(), decoder.hidden_size()};
}

SynthParams SynthParams::zeros(const SynthConfig& cfg) {
  SynthParams p;
  p.embedding = Matrix::Zero(cfg.symbols, cfg.embedding_size);
  p.prenet1_weight = Matrix::Zero(cfg.prenet_size, cfg.embedding_size);
  p.prenet1_bias = Vector::Zero(cfg.prenet_size);
  p.prenet2_weight = Matrix::Zero(cfg.prenet_size, cfg.prenet_size);
  p.prenet2_bias = Vector::Zero(cfg.prenet_size);
  p.decoder = LstmLayer::zeros(cfg.mel_channels + cfg.prenet_size + cfg.speaker_size,
                               cfg.decoder_hidden);
  p.output_weight = Matrix::Zero(cfg.mel_channels, cfg.decoder_hidden);
  p.output_bias = Vector::Zero(cfg.mel_channels);
  return p;
}

SynthParams SynthParams::random(const SynthConfig& cfg, Rng& rng) {
  SynthParams p = zeros(cfg);
  ParamList text;
  add_param(text, "embedding", p.embedding);
  init_uniform(text, 1.0, rng);
  ParamList rest;
  p.decoder.collect(rest, "decoder");
  add_param(rest, "prenet1.weight", p.prenet1_weight);
  add_param(rest, "prenet2.weight", p.prenet2_weight);
  add_param(rest, "output.weight", p.output_weight);
  init_uniform(rest, 1.0 / std::sqrt(double(cfg.decoder_hidden)), rng);
  return p;
}

ParamList SynthParams::params() {
  ParamList list;
  add_param(list, "embedding", embedding);
  add_param(list, "prenet1.weight", prenet1_weight);
  add_param(list, "prenet1.bias", prenet1_bias);
  add_param(list, "prenet2.weight", prenet2_weight);
  add_param(list, "prenet2.bias", prenet2_bias);
  decoder.collect(list, "decoder");
  add_param(list, "output.weight", output_weight);
  add_param(list, "output.bias", output_bias);
  return list;
}

Vector text_summary(const SynthParams& p, const TextSequence& t) { return run_summary(p, t).summary; }

MelSpectrogram decode_mel_teacher_forced(const SynthParams& p, const TextSequence& t,
                                         const MelSpectrogram& target, const Dvector& speaker) {
  check_conditioning(p, speaker);
  const Vector summary = text_summary(p, t);
  const LstmTrace trace = lstm_forward(p.decoder, decoder_inputs(p, summary, target, speaker));
  MelSpectrogram out;
  out.params = target.params;
  out.frames.resize(target.num_frames(), p.mel_channels());
  for (Index f = 0; f < target.num_frames(); ++f) {
    out.frames.row(f) =
        (p.output_weight * trace.hidden[std::size_t(f)].col(0) + p.output_bias).transpose();
  }
  return out;
}

double synth_loss(const MelSpectrogram& pred, const MelSpectrogram& target) {
  if (pred.frames.rows() != target.frames.rows() || pred.frames.cols() != target.frames.cols()) {
    throw Error(ErrorCode::shape_mismatch, "synth_loss: prediction and target shapes differ");
  }
  if (pred.frames.size() == 0) return 0.0;
  return (pred.frames - target.frames).squaredNorm() / double(pred.frames.size());
}

SynthGradients synth_gradients(const SynthParams& p, const MelTargetPair& pair) {
  check_conditioning(p, pair.speaker);
  const SummaryPass summary = run_summary(p, pair.text);
  const LstmTrace trace =
      lstm_forward(p.decoder, decoder_inputs(p, summary.summary, pair.mel, pair.speaker));

  const Index frames = pair.mel.num_frames();
  const Index k = p.mel_channels();
  const double scale = 2.0 / double(frames * k);
  SynthGradients g;
  g.grads = SynthParams::zeros(p.config());
  std::vector<Matrix> d_hidden(static_cast<std::size_t>(frames));
  for (Index f = 0; f < frames; ++f) {
    const auto& h = trace.hidden[std::size_t(f)];
    const Vector diff = p.output_weight * h.col(0) + p.output_bias - pair.mel.frames.row(f).transpose();
    g.loss += diff.squaredNorm();
    const Vector d_out = scale * diff;
    g.grads.output_weight.noalias() += d_out * h.col(0).transpose();
    g.grads.output_bias += d_out;
    d_hidden[std::size_t(f)] = p.output_weight.transpose() * d_out;
  }
  g.loss /= double(frames * k);

  const auto d_inputs = lstm_backward(p.decoder, trace, d_hidden, g.grads.decoder);
  Vector d_summary = Vector::Zero(p.prenet_size());
  for (const auto& d : d_inputs) d_summary += d.col(0).segment(k, p.prenet_size());

  const Vector d_act2 = d_summary / double(pair.text.size());
  for (std::size_t s = 0; s < pair.text.size(); ++s) {
    const Vector d_pre2 = (d_act2.array() * relu_mask(summary.pre2[s])).matrix();
    g.grads.prenet2_weight.noalias() += d_pre2 * summary.act1[s].transpose();
    g.grads.prenet2_bias += d_pre2;
    const Vector d_pre1 =
        ((p.prenet2_weight.transpose() * d_pre2).array() * relu_mask(summary.pre1[s])).matrix();
    g.grads.prenet1_weight.noalias() += d_pre1 * summary.embedded[s].transpose();
    g.grads.prenet1_bias += d_pre1;
    g.grads.embedding.row(pair.text.ids[s]) += (p.prenet1_weight.transpose() * d_pre1).transpose();
  }
  return g;
}

SynthTrainResult train_synthesizer(const std::vector<MelTargetPair>& pairs,
                                   const SynthTrainConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::corpus_too_small, "synthesizer: no training pairs");
  Rng rng(cfg.seed);
  SynthTrainResult result;
  result.params = SynthParams::random(cfg.model, rng);
  const ParamList values = result.params.params();
  Sgd sgd(cfg.sgd);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  for (int step = 0; step < cfg.steps; ++step) {
    const MelTargetPair& pair = pairs[pick(rng)];
    SynthGradients g = synth_gradients(result.params, pair);
    result.log.push_back({step, g.loss});
    sgd.step(values, g.grads.params());
  }
  return result;
}

MelSpectrogram infer_mel(const SynthParams& p, const TextSequence& t, const Dvector& speaker,
                         int max_frames) {
  if (max_frames < 1) throw Error(ErrorCode::invalid_argument, "infer_mel: max_frames must be >= 1");
  check_conditioning(p, speaker);
  const Index k = p.mel_channels();
  Vector x(p.decoder.input_size());
  x.head(k).setZero();
  x.segment(k, p.prenet_size()) = text_summary(p, t);
  x.tail(speaker.size()) = speaker.values;

  MelSpectrogram out;
  out.frames.resize(max_frames, k);
  LstmState state = LstmState::zeros(p.decoder.hidden_size());
  for (int f = 0; f < max_frames; ++f) {
    lstm_step(p.decoder, x, state);
    const Vector frame = p.output_weight * state.hidden.col(0) + p.output_bias;
    out.frames.row(f) = frame.transpose();
    x.head(k) = frame;
  }
  return out;
}

double mel_distortion(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.frames.rows() != b.frames.rows() || a.frames.cols() != b.frames.cols()) {
    throw Error(ErrorCode::shape_mismatch, "mel_distortion: shapes differ");
  }
  if (a.frames.rows() == 0) throw Error(ErrorCode::invalid_argument, "mel_distortion: no frames");
  const Matrix diff = a.frames - b.frames;
  return (diff.array().square().rowwise().mean().sqrt()).mean();
}

}  // namespace vclone
