#include "vclone/pipeline.hpp"

#include "vclone/denoise.hpp"
#include "vclone/model_io.hpp"

#include <algorithm>
#include <iterator>

namespace vclone {

Waveform load_wav_at(const std::filesystem::path& path, const Config& cfg) {
  Waveform w = load_wav(path);
  if (w.sample_rate_hz != cfg.sample_rate_hz) {
    throw Error(ErrorCode::sample_rate_mismatch,
                path.string() + " is " + std::to_string(w.sample_rate_hz) + " Hz, expected " +
                    std::to_string(cfg.sample_rate_hz) + " Hz");
  }
  return w;
}

FeatureConfig encoder_feature_config(const EncoderModel& model, const Config& cfg) {
  FeatureConfig f = cfg.encoder_features();
  f.mode = model.mode;
  const Index width = f.mode == FeatureMode::mfcc ? f.n_mfcc : f.channels;
  if (width != model.params.input_size()) {
    throw Error(ErrorCode::shape_mismatch,
                "encoder expects " + std::to_string(model.params.input_size()) +
                    "-wide features, config produces " + std::to_string(width));
  }
  return f;
}

std::vector<SpeakerFeatures> load_speaker_features(const std::vector<CorpusEntry>& entries,
                                                   const Config& cfg) {
  const FeatureConfig fc = cfg.encoder_features();
  std::vector<SpeakerFeatures> out;
  for (const auto& e : entries) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const SpeakerFeatures& s) { return s.speaker_id == e.speaker_id; });
    if (it == out.end()) {
      out.push_back({e.speaker_id, {}});
      it = std::prev(out.end());
    }
    it->utterances.push_back(extract_features(load_wav_at(e.wav_path, cfg), fc));
  }
  return out;
}

Dvector embed_wav(const EncoderModel& model, const Waveform& w, const Config& cfg) {
  const FeatureSequence f = extract_features(w, encoder_feature_config(model, cfg));
  return embed_utterance(model.params, f, cfg.encoder_window_frames, cfg.encoder_stride_frames);
}

std::vector<MelTargetPair> build_synth_pairs(const std::vector<CorpusEntry>& entries,
                                             const EncoderModel& encoder, const Config& cfg) {
  const FeatureConfig mel_cfg = cfg.synth_features();
  std::vector<MelTargetPair> pairs;
  for (const auto& e : entries) {
    const Waveform w = load_wav_at(e.wav_path, cfg);
    pairs.push_back(
        {encode_text(e.transcript), extract_unit_mel(w, mel_cfg), embed_wav(encoder, w, cfg)});
  }
  return pairs;
}

std::vector<VocoderPair> build_vocoder_pairs(const std::vector<CorpusEntry>& entries,
                                             const Config& cfg) {
  const FeatureConfig mel_cfg = cfg.synth_features();
  std::vector<VocoderPair> pairs;
  for (const auto& e : entries) {
    Waveform w = load_wav_at(e.wav_path, cfg);
    MelSpectrogram mel = extract_unit_mel(w, mel_cfg);
    pairs.push_back({std::move(mel), std::move(w)});
  }
  return pairs;
}

std::map<std::string, Dvector> speaker_dvectors(const std::vector<CorpusEntry>& entries,
                                                const EncoderModel& encoder, const Config& cfg) {
  std::map<std::string, Vector> sums;
  for (const auto& e : entries) {
    const Dvector d = embed_wav(encoder, load_wav_at(e.wav_path, cfg), cfg);
    auto [it, fresh] = sums.try_emplace(e.speaker_id, Vector::Zero(d.size()));
    it->second += d.values;
  }
  std::map<std::string, Dvector> out;
  for (const auto& [id, sum] : sums) out.emplace(id, Dvector::normalized(sum));
  return out;
}

CloneModels CloneModels::load(const std::filesystem::path& encoder,
                              const std::filesystem::path& synthesizer,
                              const std::filesystem::path& vocoder) {
  return {encoder_from_checkpoint(load_checkpoint(encoder, kEncoderKind)),
          synthesizer_from_checkpoint(load_checkpoint(synthesizer, kSynthesizerKind)),
          vocoder_from_checkpoint(load_checkpoint(vocoder, kVocoderKind))};
}

CloneResult run_clone_pipeline(const CloneRequest& request, const CloneModels& models,
                               const Config& cfg) {
  if (request.max_frames < 1) throw Error(ErrorCode::invalid_argument, "max_frames must be >= 1");
  if (models.synthesizer.mel_channels() != models.vocoder.mel_channels()) {
    throw Error(ErrorCode::shape_mismatch, "synthesizer and vocoder disagree on mel channels");
  }
  if (models.synthesizer.speaker_size() != models.encoder.params.embedding_size()) {
    throw Error(ErrorCode::shape_mismatch, "synthesizer and encoder disagree on embedding size");
  }

  CloneResult result{{}, {}, {}};
  if (request.reference_wav) {
    result.speaker = embed_wav(models.encoder, load_wav_at(*request.reference_wav, cfg), cfg);
  } else if (request.library_dir) {
    result.speaker = SpeakerLibrary::load(*request.library_dir).dvector(request.speaker_id);
  } else {
    throw Error(ErrorCode::invalid_argument, "clone needs a reference wav or a library speaker");
  }

  const TextSequence text = encode_text(request.text);
  result.mel = infer_mel(models.synthesizer, text, result.speaker, request.max_frames);
  const ConditioningTrack cond = upsample_conditioning(models.vocoder, result.mel);
  result.audio = generate(models.vocoder, cond, 0.0, cfg.sample_rate_hz);
  if (request.noise_clip) {
    const Waveform noise = load_wav_at(*request.noise_clip, cfg);
    result.audio = denoise(result.audio, noise, cfg.denoise_frame(), cfg.gate());
  }
  return result;
}

}  // namespace vclone
