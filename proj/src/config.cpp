#include "vclone/config.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <variant>

namespace vclone {

namespace {

using Field = std::variant<int Config::*, double Config::*, std::string Config::*,
                           std::uint64_t Config::*>;

struct Key {
  std::string_view name;
  Field field;
};

#define VCLONE_KEY(name) Key{#name, &Config::name}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      VCLONE_KEY(sample_rate_hz),
      VCLONE_KEY(window_length),
      VCLONE_KEY(hop_samples),
      VCLONE_KEY(fft_size),
      VCLONE_KEY(window_kind),
      VCLONE_KEY(encoder_mels),
      VCLONE_KEY(synth_mels),
      VCLONE_KEY(synth_fft_size),
      VCLONE_KEY(mel_low_hz),
      VCLONE_KEY(mel_high_hz),
      VCLONE_KEY(floor_db),
      VCLONE_KEY(encoder_feature_mode),
      VCLONE_KEY(n_mfcc),
      VCLONE_KEY(encoder_layers),
      VCLONE_KEY(encoder_hidden),
      VCLONE_KEY(encoder_embedding),
      VCLONE_KEY(encoder_speakers_per_batch),
      VCLONE_KEY(encoder_utterances_per_speaker),
      VCLONE_KEY(encoder_window_frames),
      VCLONE_KEY(encoder_stride_frames),
      VCLONE_KEY(encoder_steps),
      VCLONE_KEY(encoder_learning_rate),
      VCLONE_KEY(encoder_clip_norm),
      VCLONE_KEY(verify_threshold),
      VCLONE_KEY(synth_embedding),
      VCLONE_KEY(synth_prenet),
      VCLONE_KEY(synth_decoder_hidden),
      VCLONE_KEY(synth_steps),
      VCLONE_KEY(synth_learning_rate),
      VCLONE_KEY(synth_momentum),
      VCLONE_KEY(synth_clip_norm),
      VCLONE_KEY(synth_max_frames),
      VCLONE_KEY(vocoder_conditioning),
      VCLONE_KEY(vocoder_hidden),
      VCLONE_KEY(vocoder_layers),
      VCLONE_KEY(vocoder_upsample),
      VCLONE_KEY(vocoder_steps),
      VCLONE_KEY(vocoder_chunk),
      VCLONE_KEY(vocoder_learning_rate),
      VCLONE_KEY(vocoder_momentum),
      VCLONE_KEY(vocoder_clip_norm),
      VCLONE_KEY(denoise_window_length),
      VCLONE_KEY(denoise_hop),
      VCLONE_KEY(denoise_fft_size),
      VCLONE_KEY(gate_k),
      VCLONE_KEY(mask_floor),
      VCLONE_KEY(gate_time_smoothing),
      VCLONE_KEY(gate_freq_smoothing),
      VCLONE_KEY(griffin_lim_iters),
      VCLONE_KEY(pitch_f_min),
      VCLONE_KEY(pitch_f_max),
      VCLONE_KEY(voicing_threshold),
      VCLONE_KEY(gpe_deviation),
      VCLONE_KEY(corpus_speakers),
      VCLONE_KEY(corpus_utterances),
      VCLONE_KEY(corpus_test_per_speaker),
      VCLONE_KEY(corpus_duration_s),
      VCLONE_KEY(seed),
  };
  return table;
}

#undef VCLONE_KEY

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw Error(ErrorCode::malformed_config,
                "key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
  }
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::malformed_config, message);
}

void require_frame(const FrameParams& p, const std::string& keys) {
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::malformed_config, keys + ": " + e.what());
  }
}

WindowKind window_kind_of(const std::string& s) {
  return s == "rectangular" ? WindowKind::rectangular : WindowKind::hann;
}

}  // namespace

void set_config_value(Config& cfg, std::string_view key, std::string_view value) {
  for (const auto& k : keys()) {
    if (k.name != key) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          if constexpr (std::is_same_v<T, std::string>) {
            cfg.*member = std::string(value);
          } else {
            cfg.*member = parse_number<T>(key, value);
          }
        },
        k.field);
    return;
  }
  throw Error(ErrorCode::unknown_key, "unknown key '" + std::string(key) + "'");
}

Config parse_config_text(std::string_view text) {
  Config cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::malformed_config,
                  "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw Error(ErrorCode::malformed_config,
                  "line " + std::to_string(line_no) + ": empty key or value");
    }
    set_config_value(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

Config parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read config " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return parse_config_text(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

std::string render_config(const Config& cfg) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& k : keys()) {
    out << k.name << " = ";
    std::visit([&](auto member) { out << cfg.*member; }, k.field);
    out << '\n';
  }
  return out.str();
}

void Config::validate() const {
  require(sample_rate_hz > 0, "sample_rate_hz must be positive");
  require(window_length > 0 && hop_samples > 0 && fft_size >= window_length,
          "need window_length > 0, hop_samples > 0, fft_size >= window_length");
  require(window_kind == "hann" || window_kind == "rectangular",
          "window_kind must be hann or rectangular");
  require_frame(frame(), "window_length/hop_samples/fft_size");
  require_frame(denoise_frame(), "denoise_window_length/denoise_hop/denoise_fft_size");
  require_frame({window_length, hop_samples, synth_fft_size}, "synth_fft_size");
  require(encoder_mels > 0 && synth_mels > 0 && synth_fft_size >= window_length,
          "mel channel counts must be positive and synth_fft_size >= window_length");
  require(mel_low_hz >= 0.0 && mel_high_hz > mel_low_hz && mel_high_hz <= sample_rate_hz / 2.0,
          "need 0 <= mel_low_hz < mel_high_hz <= sample_rate_hz / 2");
  require(floor_db < 0.0, "floor_db must be negative");
  require(encoder_feature_mode == "log_mel" || encoder_feature_mode == "mfcc",
          "encoder_feature_mode must be log_mel or mfcc");
  require(n_mfcc > 0 && n_mfcc <= encoder_mels, "need 0 < n_mfcc <= encoder_mels");
  require(encoder_layers > 0 && encoder_hidden > 0 && encoder_embedding > 0,
          "encoder sizes must be positive");
  require(encoder_speakers_per_batch >= 2 && encoder_utterances_per_speaker >= 2,
          "encoder batches need >= 2 speakers and >= 2 utterances each");
  require(encoder_window_frames > 0 && encoder_stride_frames > 0 && encoder_steps >= 0,
          "encoder window, stride and steps must be positive");
  require(encoder_learning_rate > 0.0 && synth_learning_rate > 0.0 && vocoder_learning_rate > 0.0,
          "learning rates must be positive");
  require(verify_threshold >= -1.0 && verify_threshold <= 1.0, "verify_threshold must lie in [-1, 1]");
  require(synth_embedding > 0 && synth_prenet > 0 && synth_decoder_hidden > 0 && synth_steps >= 0,
          "synthesizer sizes must be positive");
  require(synth_momentum >= 0.0 && synth_momentum < 1.0 && vocoder_momentum >= 0.0 &&
              vocoder_momentum < 1.0,
          "momentum must lie in [0, 1)");
  require(synth_max_frames >= 1, "synth_max_frames must be >= 1");
  require(vocoder_conditioning > 0 && vocoder_hidden > 0 && vocoder_layers > 0 &&
              vocoder_steps >= 0 && vocoder_chunk > 0,
          "vocoder sizes must be positive");
  require(vocoder_upsample == "repeat" || vocoder_upsample == "linear",
          "vocoder_upsample must be repeat or linear");
  require(denoise_window_length > 0 && denoise_hop > 0 && denoise_fft_size >= denoise_window_length,
          "need denoise_fft_size >= denoise_window_length > 0 and denoise_hop > 0");
  require(gate_k >= 0.0, "gate_k must be >= 0");
  require(mask_floor >= 0.0 && mask_floor <= 1.0, "mask_floor must lie in [0, 1]");
  require(gate_time_smoothing >= 0 && gate_freq_smoothing >= 0, "smoothing must be >= 0");
  require(griffin_lim_iters >= 1, "griffin_lim_iters must be >= 1");
  require(pitch_f_min > 0.0 && pitch_f_max > pitch_f_min, "need 0 < pitch_f_min < pitch_f_max");
  require(voicing_threshold >= 0.0 && voicing_threshold <= 1.0, "voicing_threshold must lie in [0, 1]");
  require(gpe_deviation > 0.0, "gpe_deviation must be positive");
  require(corpus_speakers >= 1 && corpus_utterances >= 2 && corpus_test_per_speaker >= 0 &&
              corpus_test_per_speaker < corpus_utterances && corpus_duration_s > 0.0,
          "corpus sizes are inconsistent");
}

FrameParams Config::frame() const {
  return {window_length, hop_samples, fft_size, window_kind_of(window_kind)};
}

FrameParams Config::denoise_frame() const {
  return {denoise_window_length, denoise_hop, denoise_fft_size, window_kind_of(window_kind)};
}

FeatureConfig Config::encoder_features() const {
  FeatureConfig f;
  f.frame = frame();
  f.channels = encoder_mels;
  f.low_hz = mel_low_hz;
  f.high_hz = mel_high_hz;
  f.floor_db = floor_db;
  f.mode = encoder_feature_mode == "mfcc" ? FeatureMode::mfcc : FeatureMode::log_mel;
  f.n_mfcc = n_mfcc;
  return f;
}

FeatureConfig Config::synth_features() const {
  FeatureConfig f = encoder_features();
  f.frame.fft_size = synth_fft_size;
  f.channels = synth_mels;
  f.mode = FeatureMode::log_mel;
  return f;
}

EncoderTrainConfig Config::encoder_training() const {
  EncoderTrainConfig t;
  const FeatureConfig f = encoder_features();
  t.model.input_size = f.mode == FeatureMode::mfcc ? n_mfcc : encoder_mels;
  t.model.hidden_size = encoder_hidden;
  t.model.embedding_size = encoder_embedding;
  t.model.layers = encoder_layers;
  t.speakers_per_batch = encoder_speakers_per_batch;
  t.utterances_per_speaker = encoder_utterances_per_speaker;
  t.window_frames = encoder_window_frames;
  t.steps = encoder_steps;
  t.sgd = {encoder_learning_rate, encoder_clip_norm, 0.0};
  t.seed = seed;
  return t;
}

SynthConfig Config::synth_model() const {
  SynthConfig s;
  s.embedding_size = synth_embedding;
  s.prenet_size = synth_prenet;
  s.speaker_size = encoder_embedding;
  s.mel_channels = synth_mels;
  s.decoder_hidden = synth_decoder_hidden;
  return s;
}

SynthTrainConfig Config::synth_training() const {
  SynthTrainConfig t;
  t.model = synth_model();
  t.steps = synth_steps;
  t.sgd = {synth_learning_rate, synth_clip_norm, synth_momentum};
  t.seed = seed;
  return t;
}

VocoderConfig Config::vocoder_model() const {
  VocoderConfig v;
  v.mel_channels = synth_mels;
  v.conditioning = vocoder_conditioning;
  v.hidden = vocoder_hidden;
  v.layers = vocoder_layers;
  v.hop = hop_samples;
  v.upsample = vocoder_upsample == "linear" ? UpsampleMode::linear : UpsampleMode::repeat;
  return v;
}

VocoderTrainConfig Config::vocoder_training() const {
  VocoderTrainConfig t;
  t.model = vocoder_model();
  t.steps = vocoder_steps;
  t.chunk = vocoder_chunk;
  t.sgd = {vocoder_learning_rate, vocoder_clip_norm, vocoder_momentum};
  t.seed = seed;
  return t;
}

GateParams Config::gate() const {
  return {gate_k, mask_floor, gate_time_smoothing, gate_freq_smoothing};
}

PitchParams Config::pitch() const {
  PitchParams p;
  p.f_min_hz = pitch_f_min;
  p.f_max_hz = pitch_f_max;
  p.voicing_threshold = voicing_threshold;
  return p;
}

ScoreConfig Config::scoring() const {
  ScoreConfig s;
  s.frame = frame();
  s.pitch = pitch();
  s.gpe_deviation = gpe_deviation;
  return s;
}

ToyCorpusConfig Config::corpus() const {
  ToyCorpusConfig c;
  c.speakers = corpus_speakers;
  c.utterances_per_speaker = corpus_utterances;
  c.test_per_speaker = corpus_test_per_speaker;
  c.duration_s = corpus_duration_s;
  c.sample_rate_hz = sample_rate_hz;
  c.seed = seed;
  return c;
}

}  // namespace vclone
