#include "vclone/model_io.hpp"

namespace vclone {

namespace {

Index dim(const Checkpoint& ckpt, std::string_view name, std::size_t axis) {
  const Tensor& t = ckpt.at(name);
  if (axis >= t.dims.size()) {
    throw Error(ErrorCode::shape_mismatch, "tensor '" + t.name + "' has too few dimensions");
  }
  return static_cast<Index>(t.dims[axis]);
}

void expect_kind(const Checkpoint& ckpt, std::string_view kind) {
  if (ckpt.kind != kind) {
    throw Error(ErrorCode::wrong_kind, "checkpoint holds a '" + ckpt.kind + "' model, expected '" +
                                           std::string(kind) + "'");
  }
}

int count_layers(const Checkpoint& ckpt, const std::string& prefix) {
  int n = 0;
  while (ckpt.contains(prefix + std::to_string(n) + ".w_input")) ++n;
  if (n == 0) throw Error(ErrorCode::invalid_argument, "checkpoint has no " + prefix + "0 layer");
  return n;
}

}  // namespace

Checkpoint params_to_checkpoint(std::string_view kind, const ParamList& params) {
  Checkpoint ckpt;
  ckpt.kind = std::string(kind);
  for (const auto& p : params) {
    if (!p.is_vector) {
      ckpt.add(Tensor::from_matrix(p.name, p.map()));
    } else if (p.is_scalar) {
      ckpt.add(Tensor::scalar(p.name, p.data[0]));
    } else {
      ckpt.add(Tensor::from_vector(p.name, Eigen::Map<const Vector>(p.data, p.rows)));
    }
  }
  return ckpt;
}

void params_from_checkpoint(const Checkpoint& ckpt, const ParamList& params) {
  for (const auto& p : params) {
    const Tensor& t = ckpt.at(p.name);
    if (t.element_count() != static_cast<std::size_t>(p.size())) {
      throw Error(ErrorCode::shape_mismatch, "tensor '" + p.name + "' has " +
                                                 std::to_string(t.element_count()) +
                                                 " values, model expects " + std::to_string(p.size()));
    }
    if (!p.is_vector) {
      if (t.dims.size() != 2 || Index(t.dims[0]) != p.rows || Index(t.dims[1]) != p.cols) {
        throw Error(ErrorCode::shape_mismatch, "tensor '" + p.name + "' has the wrong shape");
      }
      p.map() = t.to_matrix();
    } else {
      for (Index i = 0; i < p.size(); ++i) p.data[i] = t.data[static_cast<std::size_t>(i)];
    }
  }
}

Checkpoint to_checkpoint(const EncoderModel& m) {
  EncoderModel copy = m;
  ParamList list = copy.params.params();
  for (const auto& p : copy.similarity.params()) list.push_back(p);
  Checkpoint ckpt = params_to_checkpoint(kEncoderKind, list);
  ckpt.add(Tensor::scalar("frontend.mode", m.mode == FeatureMode::mfcc ? 1.0 : 0.0));
  return ckpt;
}

EncoderModel encoder_from_checkpoint(const Checkpoint& ckpt) {
  expect_kind(ckpt, kEncoderKind);
  EncoderConfig cfg;
  cfg.layers = count_layers(ckpt, "lstm.");
  cfg.input_size = dim(ckpt, "lstm.0.w_input", 1);
  cfg.hidden_size = dim(ckpt, "lstm.0.w_hidden", 1);
  cfg.embedding_size = dim(ckpt, "projection.weight", 0);
  EncoderModel m;
  m.params = EncoderParams::zeros(cfg);
  params_from_checkpoint(ckpt, m.params.params());
  params_from_checkpoint(ckpt, m.similarity.params());
  m.mode = ckpt.at("frontend.mode").to_scalar() != 0.0 ? FeatureMode::mfcc : FeatureMode::log_mel;
  return m;
}

Checkpoint to_checkpoint(const SynthParams& p) {
  SynthParams copy = p;
  return params_to_checkpoint(kSynthesizerKind, copy.params());
}

SynthParams synthesizer_from_checkpoint(const Checkpoint& ckpt) {
  expect_kind(ckpt, kSynthesizerKind);
  SynthConfig cfg;
  cfg.symbols = dim(ckpt, "embedding", 0);
  cfg.embedding_size = dim(ckpt, "embedding", 1);
  cfg.prenet_size = dim(ckpt, "prenet2.weight", 0);
  cfg.mel_channels = dim(ckpt, "output.weight", 0);
  cfg.decoder_hidden = dim(ckpt, "decoder.w_hidden", 1);
  cfg.speaker_size = dim(ckpt, "decoder.w_input", 1) - cfg.mel_channels - cfg.prenet_size;
  if (cfg.speaker_size < 1 || cfg.symbols != SymbolTable::kSize) {
    throw Error(ErrorCode::shape_mismatch, "synthesizer checkpoint has inconsistent shapes");
  }
  SynthParams p = SynthParams::zeros(cfg);
  params_from_checkpoint(ckpt, p.params());
  return p;
}

Checkpoint to_checkpoint(const VocoderParams& p) {
  VocoderParams copy = p;
  Checkpoint ckpt = params_to_checkpoint(kVocoderKind, copy.params());
  ckpt.add(Tensor::scalar("meta.hop", p.hop));
  ckpt.add(Tensor::scalar("meta.upsample", p.upsample == UpsampleMode::linear ? 1.0 : 0.0));
  return ckpt;
}

VocoderParams vocoder_from_checkpoint(const Checkpoint& ckpt) {
  expect_kind(ckpt, kVocoderKind);
  VocoderConfig cfg;
  cfg.conditioning = dim(ckpt, "cond.weight", 0);
  cfg.mel_channels = dim(ckpt, "cond.weight", 1);
  cfg.layers = count_layers(ckpt, "gru.");
  cfg.hidden = dim(ckpt, "gru.0.w_hidden", 1);
  cfg.hop = static_cast<int>(ckpt.at("meta.hop").to_scalar());
  cfg.upsample = ckpt.at("meta.upsample").to_scalar() != 0.0 ? UpsampleMode::linear
                                                              : UpsampleMode::repeat;
  VocoderParams p = VocoderParams::zeros(cfg);
  params_from_checkpoint(ckpt, p.params());
  return p;
}

Checkpoint to_checkpoint(const Dvector& d) {
  Checkpoint ckpt;
  ckpt.kind = std::string(kDvectorKind);
  ckpt.add(Tensor::from_vector("dvector", d.values));
  return ckpt;
}

Dvector dvector_from_checkpoint(const Checkpoint& ckpt) {
  expect_kind(ckpt, kDvectorKind);
  // Renormalize: float32 storage perturbs the norm slightly.
  return Dvector::normalized(ckpt.at("dvector").to_vector());
}

}  // namespace vclone
