#include "vclone/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <numbers>
#include <vector>

namespace vclone {

void Waveform::validate() const {
  if (sample_rate_hz <= 0) {
    throw Error(ErrorCode::invalid_argument, "sample rate must be positive");
  }
  for (Index i = 0; i < samples.size(); ++i) {
    const double v = samples[i];
    if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
      throw Error(ErrorCode::out_of_range,
                  "out of range: sample " + std::to_string(i) + " = " + std::to_string(v));
    }
  }
}

void FrameParams::validate() const {
  if (window_length <= 0 || hop <= 0 || fft_size <= 0) {
    throw Error(ErrorCode::invalid_argument, "frame params must be positive");
  }
  if (hop > window_length) {
    throw Error(ErrorCode::invalid_argument, "hop exceeds window length");
  }
  if (fft_size < window_length) {
    throw Error(ErrorCode::invalid_argument, "fft size smaller than window");
  }
  if ((fft_size & (fft_size - 1)) != 0) {
    throw Error(ErrorCode::invalid_argument, "fft size must be a power of two");
  }
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::not_a_wav, "not-a-wav: " + path.string());
  }

  bool have_fmt = false;
  Waveform w;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw Error(ErrorCode::not_a_wav, "not-a-wav: truncated chunk in " + path.string());
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw Error(ErrorCode::not_a_wav, "not-a-wav: short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = read_u16(f);
      const std::uint16_t channels = read_u16(f + 2);
      const std::uint32_t rate = read_u32(f + 4);
      const std::uint16_t bits = read_u16(f + 14);
      if (format != 1) {
        throw Error(ErrorCode::unsupported_encoding,
                    "unsupported encoding: format tag " + std::to_string(format));
      }
      if (channels != 1) {
        throw Error(ErrorCode::multichannel,
                    "multichannel unsupported: " + std::to_string(channels) + " channels");
      }
      if (bits != 16) {
        throw Error(ErrorCode::unsupported_encoding,
                    "unsupported encoding: " + std::to_string(bits) + "-bit PCM");
      }
      if (rate == 0) throw Error(ErrorCode::not_a_wav, "not-a-wav: zero sample rate");
      w.sample_rate_hz = static_cast<int>(rate);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorCode::not_a_wav, "not-a-wav: data before fmt");
      const std::size_t n = size / 2;
      w.samples.resize(static_cast<Index>(n));
      const unsigned char* d = bytes.data() + body;
      for (std::size_t i = 0; i < n; ++i) {
        const auto pcm = static_cast<std::int16_t>(read_u16(d + 2 * i));
        w.samples[static_cast<Index>(i)] = pcm / 32768.0;
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw Error(ErrorCode::not_a_wav, "not-a-wav: no data chunk in " + path.string());
}

void write_wav(const Waveform& w, const std::filesystem::path& path) {
  w.validate();
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * n);
  put_tag(out, "RIFF");
  put_u32(out, 36 + 2 * n);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, 2 * n);
  for (Index i = 0; i < w.samples.size(); ++i) {
    const double scaled = std::round(w.samples[i] * 32768.0);
    const auto pcm = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(pcm));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::io, "cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorCode::io, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Framing / STFT

Vector make_window(WindowKind kind, int length) {
  if (kind == WindowKind::rectangular) return Vector::Ones(length);
  Vector w(length);
  for (int n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

Index frame_count(Index signal_length, const FrameParams& p) {
  if (signal_length < p.window_length) return 0;
  return (signal_length - p.window_length) / p.hop + 1;
}

Matrix frame_signal(const Eigen::Ref<const Vector>& x, const FrameParams& p) {
  p.validate();
  const Index frames = frame_count(x.size(), p);
  const Vector window = make_window(p.window, p.window_length);
  Matrix out(frames, p.window_length);
  for (Index f = 0; f < frames; ++f) {
    out.row(f) = (x.segment(f * p.hop, p.window_length).array() * window.array()).transpose();
  }
  return out;
}

ComplexSpectrogram stft(const Waveform& w, const FrameParams& p) {
  const Matrix frames = frame_signal(w.samples, p);
  ComplexSpectrogram s;
  s.params = p;
  s.sample_rate_hz = w.sample_rate_hz;
  s.frames.resize(frames.rows(), p.bins());

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buffer(static_cast<std::size_t>(p.fft_size), 0.0);
  std::vector<std::complex<double>> spectrum;
  for (Index f = 0; f < frames.rows(); ++f) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    for (int n = 0; n < p.window_length; ++n) buffer[static_cast<std::size_t>(n)] = frames(f, n);
    fft.fwd(spectrum, buffer);
    for (int k = 0; k < p.bins(); ++k) s.frames(f, k) = spectrum[static_cast<std::size_t>(k)];
  }
  return s;
}

bool satisfies_cola(const FrameParams& p) {
  p.validate();
  const Vector window = make_window(p.window, p.window_length);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int phase = 0; phase < p.hop; ++phase) {
    double sum = 0.0;
    for (int n = phase; n < p.window_length; n += p.hop) sum += window[n] * window[n];
    lo = std::min(lo, sum);
    hi = std::max(hi, sum);
  }
  return lo > 0.0 && (hi - lo) <= 1e-9 * hi;
}

Waveform istft(const ComplexSpectrogram& s) {
  const FrameParams& p = s.params;
  if (!satisfies_cola(p)) {
    throw Error(ErrorCode::not_cola, "istft: window/hop combination is not COLA");
  }
  if (s.frames.cols() != p.bins()) {
    throw Error(ErrorCode::shape_mismatch, "istft: bin count does not match fft size");
  }
  Waveform out;
  out.sample_rate_hz = s.sample_rate_hz;
  const Index frames = s.num_frames();
  if (frames == 0) return out;

  const Index length = (frames - 1) * p.hop + p.window_length;
  const Vector window = make_window(p.window, p.window_length);
  Vector acc = Vector::Zero(length);
  Vector norm = Vector::Zero(length);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(p.bins()));
  std::vector<double> buffer;
  for (Index f = 0; f < frames; ++f) {
    for (int k = 0; k < p.bins(); ++k) spectrum[static_cast<std::size_t>(k)] = s.frames(f, k);
    fft.inv(buffer, spectrum, p.fft_size);
    const Index start = f * p.hop;
    for (int n = 0; n < p.window_length; ++n) {
      acc[start + n] += window[n] * buffer[static_cast<std::size_t>(n)];
      norm[start + n] += window[n] * window[n];
    }
  }
  out.samples = Vector::Zero(length);
  for (Index i = 0; i < length; ++i) {
    if (norm[i] > 1e-12) out.samples[i] = acc[i] / norm[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mel

MelFilterbank build_mel_filterbank(int fft_size, int sample_rate_hz, int channels,
                                   double low_hz, double high_hz) {
  if (channels <= 0 || fft_size <= 0 || sample_rate_hz <= 0) {
    throw Error(ErrorCode::invalid_argument, "filterbank sizes must be positive");
  }
  if (!(low_hz >= 0.0 && low_hz < high_hz && high_hz <= sample_rate_hz / 2.0)) {
    throw Error(ErrorCode::invalid_argument, "filterbank band edges out of order");
  }
  const int bins = fft_size / 2 + 1;
  const double mel_low = hz_to_mel(low_hz);
  const double mel_high = hz_to_mel(high_hz);
  std::vector<double> edges(static_cast<std::size_t>(channels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_low + (mel_high - mel_low) * double(i) / double(channels + 1));
  }

  MelFilterbank fb;
  fb.low_hz = low_hz;
  fb.high_hz = high_hz;
  fb.sample_rate_hz = sample_rate_hz;
  fb.fft_size = fft_size;
  fb.weights = Matrix::Zero(channels, bins);
  Index previous_peak = -1;
  for (int k = 0; k < channels; ++k) {
    const double left = edges[static_cast<std::size_t>(k)];
    const double center = edges[static_cast<std::size_t>(k) + 1];
    const double right = edges[static_cast<std::size_t>(k) + 2];
    for (int b = 0; b < bins; ++b) {
      const double f = double(b) * sample_rate_hz / fft_size;
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      fb.weights(k, b) = std::max(0.0, std::min(rise, fall));
    }
    Index peak = 0;
    const double top = fb.weights.row(k).maxCoeff(&peak);
    if (top <= 0.0 || peak <= previous_peak) {
      throw Error(ErrorCode::invalid_argument,
                  "too many mel channels for fft resolution: filter " + std::to_string(k) +
                      " duplicates a center bin");
    }
    previous_peak = peak;
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const Waveform& w, const FrameParams& p, const MelFilterbank& fb,
                               double floor_db) {
  if (fb.fft_size != p.fft_size || fb.weights.cols() != p.bins()) {
    throw Error(ErrorCode::shape_mismatch, "filterbank does not match fft size");
  }
  const ComplexSpectrogram s = stft(w, p);
  const Matrix energies = s.frames.cwiseAbs() * fb.weights.transpose();
  MelSpectrogram m;
  m.params = p;
  m.frames = energies.unaryExpr([floor_db](double v) {
    return std::max(20.0 * std::log10(std::max(v, kPowerFloor)), floor_db);
  });
  return m;
}

FeatureSequence mfcc(const MelSpectrogram& m, int n_coeffs) {
  if (n_coeffs <= 0 || n_coeffs > m.channels()) {
    throw Error(ErrorCode::invalid_argument, "mfcc: coefficient count exceeds mel channels");
  }
  const Matrix basis = dct_matrix<double>(n_coeffs, m.channels());
  return FeatureSequence{m.frames * basis.transpose(), FeatureMode::mfcc};
}

Matrix inverse_mfcc(const FeatureSequence& c) {
  const Matrix basis = dct_matrix<double>(c.width(), c.width());
  return c.frames * basis;
}

MelSpectrogram to_unit_range(const MelSpectrogram& m, double floor_db) {
  MelSpectrogram out = m;
  out.frames = (m.frames.array() - floor_db) / -floor_db;
  return out;
}

MelSpectrogram from_unit_range(const MelSpectrogram& m, double floor_db) {
  MelSpectrogram out = m;
  out.frames = m.frames.array() * -floor_db + floor_db;
  return out;
}

FeatureSequence extract_features(const Waveform& w, const FeatureConfig& cfg) {
  const MelFilterbank fb = build_mel_filterbank(cfg.frame.fft_size, w.sample_rate_hz,
                                                cfg.channels, cfg.low_hz, cfg.high_hz);
  MelSpectrogram m = mel_spectrogram(w, cfg.frame, fb, cfg.floor_db);
  if (cfg.mode == FeatureMode::mfcc) return mfcc(m, cfg.n_mfcc);
  return FeatureSequence{std::move(m.frames), FeatureMode::log_mel};
}

MelSpectrogram extract_unit_mel(const Waveform& w, const FeatureConfig& cfg) {
  const MelFilterbank fb = build_mel_filterbank(cfg.frame.fft_size, w.sample_rate_hz,
                                                cfg.channels, cfg.low_hz, cfg.high_hz);
  return to_unit_range(mel_spectrogram(w, cfg.frame, fb, cfg.floor_db), cfg.floor_db);
}

}  // namespace vclone
