// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "support.hpp"
#include "vclone/checkpoint.hpp"
#include "vclone/config.hpp"
#include "vclone/corpus.hpp"
#include "vclone/denoise.hpp"
#include "vclone/encoder.hpp"
#include "vclone/metrics.hpp"
#include "vclone/model_io.hpp"
#include "vclone/pipeline.hpp"
#include "vclone/synthesizer.hpp"
#include "vclone/vocoder.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

using namespace vclone;
using namespace vclone::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(v));
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
    if (!ok) {
      pass = false;
      detail += " [x]";
    }
  }
};

int failures = 0;

template <typename Body>
void criterion(int number, const char* title, Body body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + "threw: " + e.what();
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << number << ". " << title << "  (" << o.detail
            << ", " << fmt("%.1f", seconds_since(t0)) << " s)" << std::endl;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0.0 : v[v.size() / 2];
}

std::vector<double> voiced_f0(const PitchTrack& t) {
  std::vector<double> f;
  for (Index i = 0; i < t.size(); ++i)
    if (t.voiced[i]) f.push_back(t.f0_hz[i]);
  return f;
}

// State shared by the training criteria and the end-to-end run.
struct Shared {
  Config cfg;
  TempDir work{"acceptance"};
  ToyCorpus corpus;
  std::optional<EncoderModel> encoder;
  std::optional<SynthParams> synth;
  std::optional<VocoderParams> vocoder;
};

}  // namespace

int main() {
  Shared s;
  std::cout << "acceptance run, scratch " << s.work.path().string() << std::endl;

  criterion(1, "GE2E gradient check", [](Outcome& o) {
    const auto t0 = Clock::now();
    Rng rng(2024);
    EncoderParams params = EncoderParams::random({10, 16, 8, 3}, rng);
    SimilarityParams sp{10.0, -5.0};
    GE2EBatch batch;
    batch.speakers = 4;
    batch.utterances = 3;
    for (int k = 0; k < 12; ++k) {
      FeatureSequence f;
      Rng r(77 + k);
      std::normal_distribution<double> d;
      f.frames = Matrix::NullaryExpr(6, 10, [&] { return d(r); });
      batch.features.push_back(f);
    }
    Ge2eGradients g = ge2e_gradients(batch, params, sp);
    ParamList p = params.params();
    for (auto& v : sp.params()) p.push_back(v);
    ParamList d = g.encoder.params();
    for (auto& v : g.similarity.params()) d.push_back(v);
    const double err = max_gradient_error(p, d, [&] { return ge2e_batch_loss(batch, params, sp); });
    const double t = seconds_since(t0);
    o.require(err < 1e-4, "max rel err " + fmt("%.2e", err) + " < 1e-4");
    o.require(t < 10.0, "runtime " + fmt("%.2f", t) + " s < 10 s");
  });

  criterion(2, "GE2E closed-form fixture", [](Outcome& o) {
    Matrix e(4, 2);
    e << 1, 0, 1, 0, 0, 1, 0, 1;
    const double loss = ge2e_loss(similarity_matrix(e, centroids(e, 2, 2), {1.0, 0.0}));
    o.require(std::abs(loss - 1.253046) <= 1e-6, "loss " + fmt("%.7f", loss) + " vs 1.253046");
  });

  criterion(3, "encoder toy training", [&](Outcome& o) {
    const auto t0 = Clock::now();
    s.corpus = build_toy_corpus(s.work / "corpus", s.cfg.corpus());
    const EncoderTrainConfig tc = s.cfg.encoder_training();
    const auto features = load_speaker_features(s.corpus.train, s.cfg);
    const EncoderTrainResult r = train_encoder(features, tc);
    s.encoder = r.model;

    std::vector<Dvector> ds;
    for (const auto& e : s.corpus.test) ds.push_back(embed_wav(*s.encoder, load_wav_at(e.wav_path, s.cfg), s.cfg));
    std::vector<double> same, diff;
    for (std::size_t i = 0; i < ds.size(); ++i)
      for (std::size_t j = i + 1; j < ds.size(); ++j) {
        const double c = ds[i].values.dot(ds[j].values);
        (s.corpus.test[i].speaker_id == s.corpus.test[j].speaker_id ? same : diff).push_back(c);
      }
    const double eer = compute_eer(same, diff);
    auto mean = [](const std::vector<double>& v) {
      double t = 0;
      for (double x : v) t += x;
      return t / double(v.size());
    };
    const double gap = mean(same) - mean(diff);
    const double t = seconds_since(t0);
    o.require(tc.steps <= 2000, std::to_string(tc.steps) + " steps");
    o.require(r.log.back().loss < r.log.front().loss,
              "loss " + fmt("%.3f", r.log.front().loss) + " -> " + fmt("%.4f", r.log.back().loss));
    o.require(eer <= 0.05, "held-out EER " + fmt("%.3f", eer) + " <= 0.05");
    o.require(gap >= 0.3, "intra-inter cosine " + fmt("%.3f", gap) + " >= 0.3");
    o.require(t < 300.0, "runtime " + fmt("%.0f", t) + " s < 300 s");
  });

  criterion(4, "DSP oracles", [](Outcome& o) {
    const FrameParams p{400, 100, 512};
    const Waveform x = white_noise(16000, 0.3, 5);
    const Waveform y = istft(stft(x, p));
    const Index n = y.size() - 800;
    const double rel = (x.samples.segment(400, n) - y.samples.segment(400, n)).norm() /
                       x.samples.segment(400, n).norm();
    o.require(rel < 1e-6, "istft(stft) interior rel err " + fmt("%.1e", rel));

    const MelFilterbank fb = build_mel_filterbank(512, 16000, 40, 0, 8000);
    const Waveform a = white_noise(16000, 0.1, 6);
    Waveform b = a;
    b.samples *= 2.0;
    const Matrix diff = mel_spectrogram(b, {}, fb).frames - mel_spectrogram(a, {}, fb).frames;
    const double worst = (diff.array() - 6.0206).abs().maxCoeff();
    o.require(worst <= 1e-3, "x2 mel offset within " + fmt("%.1e", worst) + " of 6.0206 dB");
    const double m700 = hz_to_mel(700.0);
    o.require(std::abs(m700 - 781.17) <= 0.01, "mel(700) " + fmt("%.4f", m700));
  });

  criterion(5, "pitch and GPE oracles", [](Outcome& o) {
    const FrameParams p{400, 160, 512};
    double worst = 0.0;
    for (double hz : {100.0, 200.0, 300.0, 400.0}) {
      const PitchTrack t = track_pitch(sine(hz, 16000), p);
      if (t.voiced_count() != t.size()) worst = 1.0;
      for (Index i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t.f0_hz[i] - hz) / hz);
    }
    o.require(worst < 0.01, "worst frame error " + fmt("%.4f", 100 * worst) + "%");
    const PitchTrack r200 = track_pitch(sine(200, 16000), p);
    const double self = gpe(r200, r200).percent;
    const double g260 = gpe(r200, track_pitch(sine(260, 16000), p)).percent;
    const double g220 = gpe(r200, track_pitch(sine(220, 16000), p)).percent;
    o.require(self == 0.0, "gpe(x,x) " + fmt("%.1f", self));
    o.require(g260 == 100.0, "200 vs 260 " + fmt("%.1f", g260));
    o.require(g220 == 0.0, "200 vs 220 " + fmt("%.1f", g220));
  });

  criterion(6, "spectral distortion oracle", [](Outcome& o) {
    const FrameParams p{400, 160, 512};
    const Waveform x = white_noise(16000, 0.01, 3);
    for (double c : {2.0, 10.0}) {
      Waveform y = x;
      y.samples *= c;
      const double sd = spectral_distortion(x, y, p);
      const double want = c == 2.0 ? 6.02 : 20.0;
      o.require(std::abs(sd - want) <= 0.05, "x" + fmt("%g", c) + " " + fmt("%.3f", sd) + " dB");
    }
    const double same = spectral_distortion(x, x, p);
    o.require(same == 0.0, "identical " + fmt("%.3f", same) + " dB");
  });

  criterion(7, "denoise fixture", [&](Outcome& o) {
    const FrameParams p = s.cfg.denoise_frame();
    const NoisySine f = noisy_sine_fixture();
    const double before = snr_db(f.clean.samples, f.mixture.samples);
    const double after = snr_db(f.clean.samples, denoise(f.mixture, f.noise_clip, p, s.cfg.gate()).samples);
    o.require(after - before >= 6.0, "SNR " + fmt("%.2f", before) + " -> " + fmt("%.2f", after) + " dB");
    const Waveform clean = sine(1000, 16000, 0.5);
    const Waveform out = denoise(clean, white_noise(16000, 1e-5, 4), p, s.cfg.gate());
    const double change = 10.0 * std::log10(band_energy(out, 900, 1100) / band_energy(clean, 900, 1100));
    o.require(std::abs(change) < 1.0, "passthrough band energy " + fmt("%+.4f", change) + " dB");
  });

  criterion(8, "synthesizer overfit", [&](Outcome& o) {
    if (!s.encoder) throw std::runtime_error("needs the encoder from criterion 3");
    const std::string enc_before = serialize_checkpoint(to_checkpoint(*s.encoder));
    const auto pairs = build_synth_pairs({s.corpus.train.front()}, *s.encoder, s.cfg);
    SynthTrainConfig tc = s.cfg.synth_training();
    tc.steps = 1000;
    const SynthTrainResult r = train_synthesizer(pairs, tc);
    s.synth = r.params;
    const MelTargetPair& pr = pairs.front();
    const double mse = synth_loss(decode_mel_teacher_forced(r.params, pr.text, pr.mel, pr.speaker), pr.mel);
    o.require(tc.steps <= 2000, std::to_string(tc.steps) + " steps");
    o.require(mse < 0.01, "teacher-forced MSE " + fmt("%.4f", mse) + " < 0.01");
    o.require(serialize_checkpoint(to_checkpoint(*s.encoder)) == enc_before, "encoder unchanged");

    const Dvector other = embed_wav(*s.encoder, load_wav_at(s.corpus.train.back().wav_path, s.cfg), s.cfg);
    const MelSpectrogram a = decode_mel_teacher_forced(r.params, pr.text, pr.mel, pr.speaker);
    const MelSpectrogram b = decode_mel_teacher_forced(r.params, pr.text, pr.mel, other);
    const double sens = (a.frames - b.frames).cwiseAbs().maxCoeff();
    o.require(sens > 0.0, "speaker sensitivity " + fmt("%.3g", sens));
  });

  criterion(9, "vocoder overfit and Griffin-Lim", [&](Outcome& o) {
    const Waveform clip = sine(200, 8000, 0.5);
    const MelSpectrogram mel = extract_unit_mel(clip, s.cfg.synth_features());
    const VocoderPair pair{mel, clip};
    const VocoderTrainResult r = train_vocoder({pair}, s.cfg.vocoder_training());
    s.vocoder = r.params;
    const ConditioningTrack cond = upsample_conditioning(r.params, mel);
    const Vector target = aligned_target(pair, r.params.hop);
    const double mse = vocoder_loss(teacher_forced_predict(r.params, cond, target), target);
    o.require(mse < 1e-3, "teacher-forced MSE " + fmt("%.2e", mse) + " < 1e-3");
    const Waveform gen = generate(r.params, cond);
    const double peak = gen.samples.cwiseAbs().maxCoeff();
    const double rms = std::sqrt(gen.samples.squaredNorm() / double(gen.size()));
    o.require(peak < 1.0, "free-run peak " + fmt("%.3f", peak));
    o.require(rms > 0.01, "free-run RMS " + fmt("%.3f", rms));

    const FrameParams gp = s.cfg.denoise_frame();
    const Waveform tone = sine(200, 16000, 0.5);
    const GriffinLimResult gl = griffin_lim(stft(tone, gp).frames.cwiseAbs(), gp, s.cfg.griffin_lim_iters);
    const double f0 = median(voiced_f0(track_pitch(gl.audio, s.cfg.frame(), s.cfg.pitch())));
    o.require(std::abs(f0 - 200.0) / 200.0 < 0.01, "Griffin-Lim pitch " + fmt("%.2f", f0) + " Hz");
  });

  criterion(10, "MOS aggregation", [&](Outcome& o) {
    std::string csv = "label,locale,source\n";
    for (int i = 0; i < 11; ++i) csv += std::string("Very similar,") + (i < 5 ? "IN" : "GB") + ",survey\n";
    write_file(s.work / "ratings.csv", csv);
    const auto records = read_ratings(s.work / "ratings.csv");
    const double mos = aggregate_mos(records);
    o.require(records.size() == 11 && mos == 4.5, std::to_string(records.size()) + " ratings -> " + fmt("%g", mos));
    const bool bands = band_midpoint(RatingLabel::very_similar) > 4.0 &&
                       band_midpoint(RatingLabel::very_similar) < 5.0 &&
                       band_midpoint(RatingLabel::moderately_similar) > 3.0 &&
                       band_midpoint(RatingLabel::moderately_similar) < 4.0 &&
                       band_midpoint(RatingLabel::slightly_similar) > 2.0 &&
                       band_midpoint(RatingLabel::slightly_similar) < 3.0 &&
                       band_midpoint(RatingLabel::not_at_all_similar) < 2.0;
    o.require(bands, "midpoints inside their bands");
  });

  criterion(11, "end-to-end determinism", [&](Outcome& o) {
    if (!s.encoder || !s.synth || !s.vocoder) throw std::runtime_error("needs the trained models");
    save_checkpoint(s.work / "encoder.ckpt", to_checkpoint(*s.encoder));
    save_checkpoint(s.work / "synth.ckpt", to_checkpoint(*s.synth));
    save_checkpoint(s.work / "vocoder.ckpt", to_checkpoint(*s.vocoder));
    const std::string text = "the quick brown fox jumps over the lazy sleeping dog";
    std::vector<std::uint32_t> hashes;
    double slowest = 0.0;
    for (const char* name : {"clone_a.wav", "clone_b.wav"}) {
      const auto t0 = Clock::now();
      const CliRun r = run_cli(VCLONE_CLI_PATH,
                               {"clone", "--text", text, "--reference", s.corpus.test.front().wav_path.string(),
                                "--encoder", (s.work / "encoder.ckpt").string(), "--synth",
                                (s.work / "synth.ckpt").string(), "--vocoder", (s.work / "vocoder.ckpt").string(),
                                "--out", (s.work / name).string(), "--seed", "7"},
                               s.work.path());
      slowest = std::max(slowest, seconds_since(t0));
      if (r.exit_code != 0) throw std::runtime_error("clone exited " + std::to_string(r.exit_code) + ": " + r.out);
      hashes.push_back(crc32(read_file(s.work / name)));
    }
    o.require(hashes[0] == hashes[1], "crc32 " + hex(hashes[0]) + " / " + hex(hashes[1]));
    o.require(slowest < 60.0, "slowest clone " + fmt("%.2f", slowest) + " s < 60 s");
  });

  criterion(12, "report fidelity", [&](Outcome& o) {
    std::ostringstream out;
    write_report(out, {{{"Western", "VCTK", "p230", "F", 4.64, 1.95, 3.38, ""}}});
    const std::string want = "accent,dataset,speaker_id,gender,mos,gpe,sd\nWestern,VCTK,p230,F,4.64,1.95,3.38\n";
    o.require(out.str() == want, "p230 row rendered verbatim");

    write_wav(sine(200, 16000, 0.4), s.work / "ref.wav");
    const ScoreReport self = score_report({{"Western", "VCTK", "self", "F", s.work / "ref.wav", s.work / "ref.wav", {}}},
                                          s.cfg.scoring());
    const std::string row = format_report_row(self.rows.front());
    o.require(row == "Western,VCTK,self,F,,0.00,0.00", "self row '" + row + "'");
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
