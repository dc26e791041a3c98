#include "vclone/corpus.hpp"

#include "vclone/csv.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace vclone {

namespace {

double resonance(double f, double center, double bandwidth) {
  const double x = (f - center) / bandwidth;
  return 1.0 / (1.0 + x * x);
}

std::string two_digits(int v) {
  std::ostringstream s;
  s.width(2);
  s.fill('0');
  s << v;
  return s.str();
}

}  // namespace

std::vector<SpeakerSpec> make_speaker_specs(int count, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::invalid_argument, "need at least one speaker");
  const double span = std::log(kMaxF0Hz / kMinF0Hz);
  const double gap = std::log(kMinF0Ratio);
  const double slack = span - gap * (count - 1);
  if (slack < 0.0) {
    throw Error(ErrorCode::invalid_argument,
                std::to_string(count) + " speakers do not fit the f0 band at 15% spacing");
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Split the spare log-range randomly among the count + 1 gaps.
  std::vector<double> shares(static_cast<std::size_t>(count) + 1);
  double total = 0.0;
  for (auto& s : shares) total += (s = 0.05 + unit(rng));

  std::vector<SpeakerSpec> specs;
  double position = 0.0;
  for (int k = 0; k < count; ++k) {
    position += slack * shares[static_cast<std::size_t>(k)] / total + (k ? gap : 0.0);
    SpeakerSpec s;
    s.speaker_id = "spk" + two_digits(k);
    s.base_f0_hz = kMinF0Hz * std::exp(position);
    s.formant1_hz = 300.0 + 600.0 * unit(rng);
    s.formant2_hz = 1000.0 + 1800.0 * unit(rng);
    s.accent = k % 2 == 0 ? "western" : "indian";
    s.gender = s.base_f0_hz < 165.0 ? "M" : "F";
    specs.push_back(s);
  }
  return specs;
}

Waveform synth_speaker_utterance(const SpeakerSpec& spec, double duration_s, std::uint64_t seed,
                                 int sample_rate_hz) {
  if (!(duration_s > 0.0)) throw Error(ErrorCode::invalid_argument, "duration must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double f0 = spec.base_f0_hz * (1.0 + jitter(rng));
  const double f1 = spec.formant1_hz * (1.0 + 1.5 * jitter(rng));
  const double f2 = spec.formant2_hz * (1.0 + 1.5 * jitter(rng));

  const auto n = static_cast<Index>(std::llround(duration_s * sample_rate_hz));
  Waveform w;
  w.sample_rate_hz = sample_rate_hz;
  w.samples = Vector::Zero(n);
  const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(n, 0.0, double(n - 1)) / sample_rate_hz;
  for (int k = 1; k * f0 < 0.45 * sample_rate_hz; ++k) {
    const double fk = k * f0;
    const double amp = (0.3 + resonance(fk, f1, 90.0) + 0.8 * resonance(fk, f2, 150.0)) / k;
    w.samples.array() += amp * (2.0 * std::numbers::pi * fk * t + phase(rng)).sin();
  }
  const double peak = w.samples.cwiseAbs().maxCoeff();
  if (peak > 0.0) w.samples *= spec.amplitude / peak;
  return w;
}

const std::vector<std::string>& toy_sentences() {
  static const std::vector<std::string> sentences = {
      "the quick brown fox jumps over the lazy dog",
      "please call stella and ask her to bring these things",
      "a rainbow is a division of white light into many colors",
      "she sells sea shells by the sea shore",
      "we will meet at the station before noon",
      "the weather today is warm and clear",
      "open the window, the room is too hot",
      "can you hear the birds singing outside?",
      "my favourite colour is a deep shade of blue",
      "the library closes early on sundays",
      "he read the letter twice before answering",
      "turn left at the second traffic light",
      "they planted rice in the monsoon season",
      "the train to chennai leaves at six",
      "music can change the mood of a room",
      "don't forget to water the plants",
      "the children laughed at the clever puppet",
      "every voice carries a little of its owner",
      "speak slowly and clearly, please",
      "the river runs quietly past the old temple",
  };
  return sentences;
}

std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows.front() != CsvRow{"wav_path", "transcript", "speaker_id"}) {
    throw Error(ErrorCode::malformed_config,
                "manifest header must be wav_path,transcript,speaker_id: " + path.string());
  }
  const auto base = path.parent_path();
  std::vector<CorpusEntry> entries;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 3) {
      throw Error(ErrorCode::malformed_config, "manifest row " + std::to_string(r) + " needs 3 fields");
    }
    std::filesystem::path wav = rows[r][0];
    if (wav.is_relative()) wav = base / wav;
    entries.push_back({wav, rows[r][1], rows[r][2]});
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<CorpusEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  write_csv_row(out, {"wav_path", "transcript", "speaker_id"});
  const auto base = path.parent_path();
  for (const auto& e : entries) {
    const auto rel = e.wav_path.lexically_relative(base);
    write_csv_row(out, {(rel.empty() ? e.wav_path : rel).generic_string(), e.transcript, e.speaker_id});
  }
}

ToyCorpus build_toy_corpus(const std::filesystem::path& dir, const ToyCorpusConfig& cfg) {
  if (cfg.test_per_speaker < 0 || cfg.test_per_speaker >= cfg.utterances_per_speaker) {
    throw Error(ErrorCode::invalid_argument, "test split must leave training utterances");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir / "wavs", ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + (dir / "wavs").string() + ": " + ec.message());

  ToyCorpus corpus;
  corpus.speakers = make_speaker_specs(cfg.speakers, cfg.seed);
  const auto& sentences = toy_sentences();
  for (std::size_t s = 0; s < corpus.speakers.size(); ++s) {
    const SpeakerSpec& spec = corpus.speakers[s];
    for (int u = 0; u < cfg.utterances_per_speaker; ++u) {
      const std::uint64_t seed = cfg.seed * 1000003ull + s * 1009ull + std::uint64_t(u);
      const Waveform w = synth_speaker_utterance(spec, cfg.duration_s, seed, cfg.sample_rate_hz);
      const auto path = dir / "wavs" / (spec.speaker_id + "_" + two_digits(u) + ".wav");
      write_wav(w, path);
      const auto& text = sentences[(s * 7 + std::size_t(u)) % sentences.size()];
      CorpusEntry entry{path, text, spec.speaker_id};
      corpus.all.push_back(entry);
      (u < cfg.utterances_per_speaker - cfg.test_per_speaker ? corpus.train : corpus.test)
          .push_back(entry);
    }
  }
  write_manifest(dir / "manifest.csv", corpus.all);
  write_manifest(dir / "train.csv", corpus.train);
  write_manifest(dir / "test.csv", corpus.test);

  std::ofstream specs(dir / "speakers.csv", std::ios::binary);
  if (!specs) throw Error(ErrorCode::io, "cannot write speakers.csv");
  write_csv_row(specs, {"speaker_id", "accent", "gender", "base_f0_hz", "formant1_hz", "formant2_hz"});
  for (const auto& s : corpus.speakers) {
    write_csv_row(specs, {s.speaker_id, s.accent, s.gender, std::to_string(s.base_f0_hz),
                          std::to_string(s.formant1_hz), std::to_string(s.formant2_hz)});
  }
  return corpus;
}

}  // namespace vclone
