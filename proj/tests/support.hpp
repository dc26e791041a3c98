#pragma once

#include "vclone/dsp.hpp"
#include "vclone/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

namespace vclone::testing {

inline Waveform sine(double hz, Index n, double amp = 0.5, int rate = 16000) {
  Waveform w;
  w.sample_rate_hz = rate;
  w.samples.resize(n);
  for (Index i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / rate);
  return w;
}

inline Waveform white_noise(Index n, double stddev, std::uint64_t seed, int rate = 16000) {
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  Waveform w;
  w.sample_rate_hz = rate;
  w.samples.resize(n);
  for (Index i = 0; i < n; ++i) w.samples[i] = dist(rng);
  return w;
}

inline Vector uniform_vector(Index n, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

/// 1 kHz sine at 0 dBFS plus white noise at -10 dB SNR, with a separate
/// noise-only clip. Mixture and noise clip share one scale so the mixture
/// peaks at 1.
struct NoisySine {
  Waveform clean;
  Waveform mixture;
  Waveform noise_clip;
};

inline NoisySine noisy_sine_fixture(Index n = 16000) {
  const Waveform s = sine(1000.0, n, 1.0);
  const double noise_sd = std::sqrt(0.5 * 10.0);  // signal power 0.5, ten times that in noise
  const Waveform v = white_noise(n, noise_sd, 101);
  const Waveform clip = white_noise(n, noise_sd, 202);
  const Vector mix = s.samples + v.samples;
  const double scale = 1.0 / mix.cwiseAbs().maxCoeff();
  NoisySine f;
  f.clean = s;
  f.clean.samples *= scale;
  f.mixture = s;
  f.mixture.samples = mix * scale;
  f.noise_clip = clip;
  f.noise_clip.samples *= scale;
  return f;
}

/// SNR in dB of y against the clean reference after least-squares scaling.
inline double snr_db(const Vector& clean, const Vector& y) {
  const double alpha = clean.dot(y) / clean.squaredNorm();
  const Vector residual = y - alpha * clean;
  return 10.0 * std::log10((alpha * clean).squaredNorm() / residual.squaredNorm());
}

/// Summed STFT power between lo_hz and hi_hz.
inline double band_energy(const Waveform& w, double lo_hz, double hi_hz,
                          const FrameParams& p = {400, 100, 512}) {
  const ComplexSpectrogram s = stft(w, p);
  double sum = 0.0;
  for (Index b = 0; b < s.frames.cols(); ++b) {
    const double hz = double(b) * w.sample_rate_hz / p.fft_size;
    if (hz >= lo_hz && hz <= hi_hz) sum += s.frames.col(b).cwiseAbs2().sum();
  }
  return sum;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vclone_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// |a - f| / max(|a|, |f|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences over every coordinate of `params`; returns the largest
/// relative error against the matching entry of `grads`.
inline double max_gradient_error(const ParamList& params, const ParamList& grads,
                                 const std::function<double()>& loss, double step = 1e-4) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Index i = 0; i < params[p].size(); ++i) {
      double& x = params[p].data[i];
      const double saved = x;
      x = saved + step;
      const double up = loss();
      x = saved - step;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, relative_error(grads[p].data[i], numeric));
    }
  }
  return worst;
}

struct CliRun {
  int exit_code = -1;
  std::string out;  // stdout and stderr together
};

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

/// Runs the command line tool with the given arguments and captures its output.
inline CliRun run_cli(const std::string& exe, const std::vector<std::string>& args,
                      const std::filesystem::path& scratch) {
  std::string cmd = shell_quote(exe);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  const auto log = scratch / "cli_output.txt";
  cmd += " > " + shell_quote(log.string()) + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(log);
  return r;
}

}  // namespace vclone::testing
