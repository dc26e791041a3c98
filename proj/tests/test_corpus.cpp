#include "support.hpp"
#include "vclone/corpus.hpp"
#include "vclone/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace vclone;
using namespace vclone::testing;

namespace {

double median_f0(const PitchTrack& t) {
  std::vector<double> f;
  for (Index i = 0; i < t.size(); ++i)
    if (t.voiced[i]) f.push_back(t.f0_hz[i]);
  std::sort(f.begin(), f.end());
  return f.empty() ? 0.0 : f[f.size() / 2];
}

Vector mean_log_mel(const Waveform& w) {
  return extract_features(w, FeatureConfig{}).frames.colwise().mean().transpose();
}

double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("speaker specs") {
  const auto specs = make_speaker_specs(8, 1);
  REQUIRE(specs.size() == 8);
  std::set<std::string> ids;
  for (const auto& s : specs) {
    ids.insert(s.speaker_id);
    CHECK(s.base_f0_hz >= kMinF0Hz);
    CHECK(s.base_f0_hz <= kMaxF0Hz);
    CHECK(s.formant1_hz < 8000.0);
    CHECK(s.formant2_hz < 8000.0);
  }
  CHECK(ids.size() == 8);
  for (std::size_t i = 0; i < specs.size(); ++i)
    for (std::size_t j = i + 1; j < specs.size(); ++j) {
      const double hi = std::max(specs[i].base_f0_hz, specs[j].base_f0_hz);
      const double lo = std::min(specs[i].base_f0_hz, specs[j].base_f0_hz);
      CHECK(hi / lo >= 1.15);
    }
  const auto again = make_speaker_specs(8, 1);
  for (std::size_t i = 0; i < specs.size(); ++i) CHECK(again[i].base_f0_hz == specs[i].base_f0_hz);
}

TEST_CASE("utterances") {
  const auto specs = make_speaker_specs(8, 2);
  for (const auto& s : specs) {
    CAPTURE(s.base_f0_hz);
    const Waveform w = synth_speaker_utterance(s, 1.0, 9);
    CHECK(w.size() == 16000);
    CHECK(w.sample_rate_hz == 16000);
    CHECK(w.samples.cwiseAbs().maxCoeff() == doctest::Approx(s.amplitude).epsilon(1e-12));
    const double f0 = median_f0(track_pitch(w, {400, 160, 512}));
    CHECK(std::abs(f0 - s.base_f0_hz) / s.base_f0_hz < 0.03);
    CHECK(synth_speaker_utterance(s, 1.0, 9).samples == w.samples);
  }
  CHECK(synth_speaker_utterance(specs[0], 1.0, 1).samples != synth_speaker_utterance(specs[0], 1.0, 2).samples);
  CHECK_THROWS_AS(synth_speaker_utterance(specs[0], 0.0, 1), Error);
}

TEST_CASE("toy corpus layout and split") {
  TempDir dir("corpus");
  const ToyCorpus c = build_toy_corpus(dir.path(), {});
  CHECK(c.speakers.size() == 8);
  CHECK(c.all.size() == 80);
  CHECK(c.train.size() == 64);
  CHECK(c.test.size() == 16);
  for (const auto& e : c.all) CHECK(std::filesystem::exists(e.wav_path));
  CHECK(read_manifest(dir / "manifest.csv").size() == 80);
  CHECK(read_manifest(dir / "train.csv").size() == 64);
  CHECK(read_manifest(dir / "test.csv").size() == 16);

  std::map<std::string, std::set<std::string>> train, test;
  for (const auto& e : c.train) train[e.speaker_id].insert(e.wav_path.string());
  for (const auto& e : c.test) test[e.speaker_id].insert(e.wav_path.string());
  for (const auto& [id, files] : train) {
    CHECK(files.size() == 8);
    CHECK(test[id].size() == 2);
    for (const auto& f : test[id]) CHECK(files.count(f) == 0);
  }
  const auto& sentences = toy_sentences();
  CHECK(sentences.size() == 20);
  for (const auto& e : c.all)
    CHECK(std::find(sentences.begin(), sentences.end(), e.transcript) != sentences.end());
}

TEST_CASE("toy corpus is reproducible") {
  TempDir a("corpus_a"), b("corpus_b");
  ToyCorpusConfig cfg;
  cfg.speakers = 3;
  cfg.utterances_per_speaker = 4;
  cfg.test_per_speaker = 1;
  const ToyCorpus ca = build_toy_corpus(a.path(), cfg);
  const ToyCorpus cb = build_toy_corpus(b.path(), cfg);
  REQUIRE(ca.all.size() == cb.all.size());
  for (std::size_t i = 0; i < ca.all.size(); ++i)
    CHECK(read_file(ca.all[i].wav_path) == read_file(cb.all[i].wav_path));
  CHECK(read_file(a / "speakers.csv") == read_file(b / "speakers.csv"));
}

TEST_CASE("manifest round trip") {
  TempDir dir("manifest");
  std::filesystem::create_directories(dir / "w");
  const std::vector<CorpusEntry> rows{{dir / "w" / "a.wav", "hello, world", "s1"},
                                      {dir / "w" / "b.wav", "say \"hi\"", "s2"}};
  write_manifest(dir / "m.csv", rows);
  const auto back = read_manifest(dir / "m.csv");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::filesystem::weakly_canonical(back[i].wav_path) == std::filesystem::weakly_canonical(rows[i].wav_path));
    CHECK(back[i].transcript == rows[i].transcript);
    CHECK(back[i].speaker_id == rows[i].speaker_id);
  }
  write_file(dir / "rel.csv", "wav_path,transcript,speaker_id\nw/a.wav,x,s\n");
  CHECK(read_manifest(dir / "rel.csv")[0].wav_path == dir / "w" / "a.wav");
}

TEST_CASE("speakers are more alike within than across") {
  const auto specs = make_speaker_specs(6, 4);
  std::vector<std::vector<Vector>> feats(specs.size());
  for (std::size_t s = 0; s < specs.size(); ++s)
    for (int u = 0; u < 4; ++u) feats[s].push_back(mean_log_mel(synth_speaker_utterance(specs[s], 1.0, 50 + u)));
  // centered on the corpus mean, otherwise every dB profile looks alike
  Vector global = Vector::Zero(feats[0][0].size());
  for (const auto& fs : feats)
    for (const auto& f : fs) global += f / double(feats.size() * fs.size());
  for (auto& fs : feats)
    for (auto& f : fs) f -= global;
  double intra = 0.0, inter = 0.0;
  int n_intra = 0, n_inter = 0;
  for (std::size_t s = 0; s < feats.size(); ++s)
    for (std::size_t t = 0; t < feats.size(); ++t)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          if (s == t && i >= j) continue;
          if (s > t) continue;
          const double c = cosine(feats[s][i], feats[t][j]);
          if (s == t) {
            intra += c;
            ++n_intra;
          } else {
            inter += c;
            ++n_inter;
          }
        }
  CHECK(intra / n_intra > inter / n_inter);
}

}  // TEST_SUITE
