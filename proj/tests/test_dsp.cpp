#include "support.hpp"
#include "vclone/dsp.hpp"

#include <doctest.h>

#include <cstring>

using namespace vclone;
using namespace vclone::testing;

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

// Hand-built RIFF file so the reader is checked against bytes we control.
std::string wav_bytes(const std::vector<std::int16_t>& pcm, std::uint16_t channels = 1,
                      std::uint16_t bits = 16, std::uint16_t format = 1) {
  const std::uint32_t rate = 16000;
  const std::uint32_t data_size = static_cast<std::uint32_t>(pcm.size() * (bits / 8));
  std::string s = "RIFF";
  put_u32(s, 36 + data_size);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, format);
  put_u16(s, channels);
  put_u32(s, rate);
  put_u32(s, rate * channels * bits / 8);
  put_u16(s, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(s, bits);
  s += "data";
  put_u32(s, data_size);
  for (auto v : pcm) {
    if (bits == 16) {
      put_u16(s, static_cast<std::uint16_t>(v));
    } else {
      s.push_back(static_cast<char>(v));
    }
  }
  return s;
}

ErrorCode load_error(const std::filesystem::path& p) {
  try {
    load_wav(p);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("load_wav did not throw");
  return ErrorCode::io;
}

double interior_relative_error(const Vector& x, const Vector& y, Index margin) {
  const Index n = x.size() - 2 * margin;
  return (x.segment(margin, n) - y.segment(margin, n)).norm() / x.segment(margin, n).norm();
}

}  // namespace

TEST_SUITE("audio-dsp") {

TEST_CASE("pcm scaling at the endpoints") {
  TempDir dir("wav");
  write_file(dir / "a.wav", wav_bytes({32767, -32768, 0, 16384}));
  const Waveform w = load_wav(dir / "a.wav");
  REQUIRE(w.size() == 4);
  CHECK(w.sample_rate_hz == 16000);
  CHECK(w.samples[0] == 32767.0 / 32768.0);
  CHECK(w.samples[1] == -1.0);
  CHECK(w.samples[2] == 0.0);
  CHECK(w.samples[3] == 0.5);
}

TEST_CASE("wav reader errors are distinct") {
  TempDir dir("wav");
  write_file(dir / "stereo.wav", wav_bytes({1, 2, 3, 4}, 2));
  write_file(dir / "pcm8.wav", wav_bytes({1, 2}, 1, 8));
  write_file(dir / "float.wav", wav_bytes({1, 2}, 1, 16, 3));
  write_file(dir / "junk.wav", "this is not a riff file at all, not even close");
  CHECK(load_error(dir / "stereo.wav") == ErrorCode::multichannel);
  CHECK(load_error(dir / "pcm8.wav") == ErrorCode::unsupported_encoding);
  CHECK(load_error(dir / "float.wav") == ErrorCode::unsupported_encoding);
  CHECK(load_error(dir / "junk.wav") == ErrorCode::not_a_wav);
  CHECK(load_error(dir / "missing.wav") == ErrorCode::io);
}

TEST_CASE("wav write and read back") {
  TempDir dir("wav");
  SUBCASE("empty") {
    Waveform w;
    write_wav(w, dir / "empty.wav");
    CHECK(load_wav(dir / "empty.wav").size() == 0);
  }
  SUBCASE("random signal within one quantization step") {
    Waveform w;
    w.samples = uniform_vector(4000, -1.0, 1.0, 3);
    write_wav(w, dir / "r.wav");
    const Waveform back = load_wav(dir / "r.wav");
    REQUIRE(back.size() == w.size());
    CHECK((back.samples - w.samples).cwiseAbs().maxCoeff() <= 1.0 / 32768.0);
  }
  SUBCASE("out of range sample") {
    Waveform w;
    w.samples = Vector::Constant(3, 0.1);
    w.samples[1] = 2.0;
    try {
      write_wav(w, dir / "bad.wav");
      FAIL("expected out_of_range");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::out_of_range);
    }
    CHECK_FALSE(std::filesystem::exists(dir / "bad.wav"));
  }
}

TEST_CASE("frame count") {
  CHECK(frame_count(1000, {400, 160, 512}) == 4);
  CHECK(frame_count(399, {400, 160, 512}) == 0);
  CHECK(frame_count(400, {400, 160, 512}) == 1);

  // Brute force: count window starts that fit.
  Rng rng(11);
  std::uniform_int_distribution<int> len(0, 5000), win_log(3, 10);
  for (int trial = 0; trial < 300; ++trial) {
    FrameParams p;
    p.fft_size = 1 << win_log(rng);
    p.window_length = std::uniform_int_distribution<int>(1, p.fft_size)(rng);
    p.hop = std::uniform_int_distribution<int>(1, p.window_length)(rng);
    const Index n = len(rng);
    Index expected = 0;
    for (Index start = 0; start + p.window_length <= n; start += p.hop) ++expected;
    CHECK(frame_count(n, p) == expected);
    CHECK(frame_signal(Vector::Zero(n), p).rows() == expected);
  }
}

TEST_CASE("rectangular frames are raw slices") {
  const Vector x = uniform_vector(1000, -1, 1, 5);
  const FrameParams p{400, 160, 512, WindowKind::rectangular};
  const Matrix f = frame_signal(x, p);
  REQUIRE(f.rows() == 4);
  REQUIRE(f.cols() == 400);
  for (Index t = 0; t < 4; ++t) CHECK(f.row(t).transpose() == x.segment(t * 160, 400));
}

TEST_CASE("stft of a constant signal") {
  Waveform w;
  w.samples = Vector::Ones(2048);
  const FrameParams p{512, 128, 512, WindowKind::rectangular};
  const ComplexSpectrogram s = stft(w, p);
  REQUIRE(s.frames.cols() == 257);
  for (Index t = 0; t < s.num_frames(); ++t) {
    CHECK(std::abs(s.frames(t, 0)) == doctest::Approx(512.0).epsilon(1e-12));
    CHECK(s.frames.row(t).tail(256).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("stft of an on-bin cosine peaks at that bin") {
  const FrameParams p{512, 256, 512, WindowKind::rectangular};
  for (int bin : {5, 37, 100, 200}) {
    Waveform w;
    w.samples.resize(4096);
    for (Index i = 0; i < w.size(); ++i)
      w.samples[i] = std::cos(2.0 * std::numbers::pi * bin * double(i) / p.fft_size);
    const ComplexSpectrogram s = stft(w, p);
    for (Index t = 0; t < s.num_frames(); ++t) {
      Index arg = 0;
      s.frames.row(t).cwiseAbs().maxCoeff(&arg);
      CHECK(arg == bin);
      CHECK(std::abs(s.frames(t, bin)) == doctest::Approx(256.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("stft of silence is zero") {
  Waveform w;
  w.samples = Vector::Zero(3000);
  CHECK(stft(w, {}).frames.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("istft inverts stft in the interior") {
  for (int window : {256, 400, 512}) {
    const FrameParams p{window, window / 4, window <= 256 ? 256 : 512};
    const Waveform x = white_noise(16000, 0.3, 7 + window);
    const Waveform y = istft(stft(x, p));
    REQUIRE(y.size() <= x.size());
    const Vector xs = x.samples.head(y.size());
    CHECK(interior_relative_error(xs, y.samples, window) < 1e-6);
  }
}

TEST_CASE("istft edge cases") {
  SUBCASE("zero spectrogram") {
    ComplexSpectrogram s;
    s.params = {400, 100, 512};
    s.frames = ComplexMatrix::Zero(10, 257);
    const Waveform y = istft(s);
    CHECK(y.size() == 9 * 100 + 400);
    CHECK(y.samples.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("disjoint rectangular frames reconstruct exactly") {
    const FrameParams p{256, 256, 256, WindowKind::rectangular};
    const Waveform x = white_noise(256 * 8, 0.3, 9);
    const Waveform y = istft(stft(x, p));
    REQUIRE(y.size() == x.size());
    CHECK((y.samples - x.samples).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("non-COLA parameters are rejected") {
    const FrameParams p{400, 160, 512};
    CHECK_FALSE(satisfies_cola(p));
    try {
      istft(stft(white_noise(4000, 0.1, 1), p));
      FAIL("expected not_cola");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::not_cola);
    }
  }
}

TEST_CASE("mel scale") {
  CHECK(hz_to_mel(0.0) == 0.0);
  // 2595 * log10(2), computed independently of the implementation's formula.
  const double oracle = 2595.0 * std::log(2.0) / std::log(10.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(std::abs(hz_to_mel(700.0) - 781.17) < 0.01);
  for (double hz : {10.0, 440.0, 3999.0, 8000.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
}

TEST_CASE("filterbank shape and invariants") {
  struct Case {
    int fft, k;
  };
  for (Case c : {Case{512, 40}, Case{1024, 80}, Case{256, 20}}) {
    CAPTURE(c.fft);
    const MelFilterbank fb = build_mel_filterbank(c.fft, 16000, c.k, 0, 8000);
    REQUIRE(fb.weights.rows() == c.k);
    REQUIRE(fb.weights.cols() == c.fft / 2 + 1);
    CHECK(fb.weights.minCoeff() >= 0.0);
    Index prev = -1;
    for (Index k = 0; k < c.k; ++k) {
      const auto row = fb.weights.row(k);
      Index first = -1, last = -1;
      for (Index b = 0; b < row.size(); ++b) {
        if (row[b] > 0) {
          if (first < 0) first = b;
          last = b;
        }
      }
      REQUIRE(first >= 0);
      // single contiguous support, rising then falling
      for (Index b = first; b <= last; ++b) CHECK(row[b] > 0);
      Index arg = 0;
      row.maxCoeff(&arg);
      for (Index b = first; b < arg; ++b) CHECK(row[b] <= row[b + 1]);
      for (Index b = arg; b < last; ++b) CHECK(row[b] >= row[b + 1]);
      CHECK(arg > prev);
      prev = arg;
    }
    CHECK(fb.weights.colwise().sum().maxCoeff() <= 1.0 + 1e-6);
  }
}

TEST_CASE("filterbank with more channels than the fft resolves") {
  try {
    build_mel_filterbank(512, 16000, 80, 0, 8000);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
  }
}

TEST_CASE("mel spectrogram floor and log scaling") {
  const FrameParams p;
  const MelFilterbank fb = build_mel_filterbank(512, 16000, 40, 0, 8000);
  Waveform zero;
  zero.samples = Vector::Zero(4000);
  const MelSpectrogram mz = mel_spectrogram(zero, p, fb, -100.0);
  CHECK(mz.frames.rows() == frame_count(4000, p));
  CHECK(mz.frames.cols() == 40);
  CHECK((mz.frames.array() == -100.0).all());

  const Waveform x = white_noise(16000, 0.1, 21);
  Waveform x2 = x;
  x2.samples *= 2.0;
  const MelSpectrogram a = mel_spectrogram(x, p, fb, -100.0);
  const MelSpectrogram b = mel_spectrogram(x2, p, fb, -100.0);
  const double law = 20.0 * std::log10(2.0);
  Index checked = 0;
  for (Index t = 0; t < a.num_frames(); ++t) {
    for (Index k = 0; k < a.channels(); ++k) {
      if (a.frames(t, k) <= -100.0) continue;
      CHECK(std::abs(b.frames(t, k) - a.frames(t, k) - law) < 1e-6);
      ++checked;
    }
  }
  CHECK(checked == a.frames.size());
  CHECK(std::abs(law - 6.0206) < 1e-3);
}

TEST_CASE("dct basis is orthonormal") {
  const Matrix d = dct_matrix<double>(40, 40);
  CHECK((d * d.transpose() - Matrix::Identity(40, 40)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mfcc examples") {
  MelSpectrogram m;
  m.frames = Matrix::Constant(5, 40, -37.5);
  const FeatureSequence c = mfcc(m, 13);
  CHECK(c.frames.rows() == 5);
  CHECK(c.frames.cols() == 13);
  CHECK(c.mode == FeatureMode::mfcc);
  CHECK(c.frames.col(0).cwiseAbs().minCoeff() > 1.0);
  CHECK(c.frames.rightCols(12).cwiseAbs().maxCoeff() < 1e-9);

  MelSpectrogram r;
  Rng rng(4);
  r.frames = Matrix::NullaryExpr(7, 40, [&] { return std::normal_distribution<double>(-40, 10)(rng); });
  const FeatureSequence full = mfcc(r, 40);
  for (Index t = 0; t < 7; ++t)
    CHECK(full.frames.row(t).norm() == doctest::Approx(r.frames.row(t).norm()).epsilon(1e-12));
  CHECK((inverse_mfcc(full) - r.frames).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("feature extraction shapes") {
  const Waveform x = white_noise(16000, 0.1, 2);
  FeatureConfig cfg;
  const FeatureSequence lm = extract_features(x, cfg);
  CHECK(lm.frames.rows() == frame_count(16000, cfg.frame));
  CHECK(lm.frames.cols() == 40);
  cfg.mode = FeatureMode::mfcc;
  CHECK(extract_features(x, cfg).frames.cols() == 13);

  FeatureConfig mel80;
  mel80.channels = 80;
  mel80.frame.fft_size = 1024;
  const MelSpectrogram u = extract_unit_mel(x, mel80);
  CHECK(u.channels() == 80);
  CHECK(u.frames.minCoeff() >= 0.0);
  CHECK((from_unit_range(u).frames - mel_spectrogram(x, mel80.frame,
                                                      build_mel_filterbank(1024, 16000, 80, 0, 8000))
                                         .frames)
            .cwiseAbs()
            .maxCoeff() < 1e-9);
}

}  // TEST_SUITE
