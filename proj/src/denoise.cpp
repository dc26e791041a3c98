#include "vclone/denoise.hpp"

#include <algorithm>

namespace vclone {

void GateParams::validate() const {
  if (!(mask_floor >= 0.0 && mask_floor <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "mask_floor must lie in [0, 1]");
  }
  if (!(threshold_k >= 0.0)) throw Error(ErrorCode::invalid_argument, "gate k must be >= 0");
  if (time_smoothing < 0 || freq_smoothing < 0) {
    throw Error(ErrorCode::invalid_argument, "smoothing half-widths must be >= 0");
  }
}

NoiseProfile estimate_noise_profile(const Waveform& noise_clip, const FrameParams& p) {
  const ComplexSpectrogram s = stft(noise_clip, p);
  if (s.num_frames() == 0) {
    throw Error(ErrorCode::invalid_argument,
                "noise clip has " + std::to_string(noise_clip.size()) +
                    " samples, fewer than one window of " + std::to_string(p.window_length));
  }
  const Matrix mag = s.frames.cwiseAbs();
  NoiseProfile prof;
  prof.mean = mag.colwise().mean().transpose();
  const Matrix centered = mag.rowwise() - prof.mean.transpose();
  prof.stddev = (centered.array().square().colwise().sum() / double(mag.rows())).sqrt().transpose();
  return prof;
}

Matrix box_smooth(const Matrix& m, int time_half_width, int freq_half_width) {
  const Index rows = m.rows();
  const Index cols = m.cols();
  // Separable: time first, then frequency.
  Matrix along_time(rows, cols);
  for (Index t = 0; t < rows; ++t) {
    const Index lo = std::max<Index>(0, t - time_half_width);
    const Index hi = std::min<Index>(rows - 1, t + time_half_width);
    along_time.row(t) = m.middleRows(lo, hi - lo + 1).colwise().mean();
  }
  Matrix out(rows, cols);
  for (Index k = 0; k < cols; ++k) {
    const Index lo = std::max<Index>(0, k - freq_half_width);
    const Index hi = std::min<Index>(cols - 1, k + freq_half_width);
    out.col(k) = along_time.middleCols(lo, hi - lo + 1).rowwise().mean();
  }
  return out;
}

Matrix spectral_gate_mask(const ComplexSpectrogram& spec, const NoiseProfile& prof,
                          const GateParams& g) {
  g.validate();
  if (spec.frames.cols() != prof.bins() || prof.stddev.size() != prof.bins()) {
    throw Error(ErrorCode::shape_mismatch, "gate: spectrogram has " +
                                               std::to_string(spec.frames.cols()) +
                                               " bins, profile has " + std::to_string(prof.bins()));
  }
  const Eigen::RowVectorXd threshold = (prof.mean + g.threshold_k * prof.stddev).transpose();
  Matrix raw(spec.frames.rows(), spec.frames.cols());
  const Matrix mag = spec.frames.cwiseAbs();
  for (Index t = 0; t < raw.rows(); ++t) {
    const auto above = (mag.row(t).array() > threshold.array()).cast<double>();
    raw.row(t) = (g.mask_floor + (1.0 - g.mask_floor) * above).matrix();
  }
  if (raw.size() == 0) return raw;
  Matrix mask = box_smooth(raw, g.time_smoothing, g.freq_smoothing);
  return mask.cwiseMax(g.mask_floor).cwiseMin(1.0);
}

Waveform denoise(const Waveform& w, const NoiseProfile& prof, const FrameParams& p,
                 const GateParams& g) {
  p.validate();
  if (!satisfies_cola(p)) {
    throw Error(ErrorCode::not_cola, "denoise: window " + std::to_string(p.window_length) +
                                         " with hop " + std::to_string(p.hop) + " is not COLA");
  }
  Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  const Index n = w.size();
  if (n == 0) return out;

  const Index lead = p.window_length - p.hop;
  Index padded = lead + n + lead;
  const Index rem = (padded - p.window_length) % p.hop;
  if (rem != 0) padded += p.hop - rem;
  Waveform x;
  x.sample_rate_hz = w.sample_rate_hz;
  x.samples = Vector::Zero(padded);
  x.samples.segment(lead, n) = w.samples;

  ComplexSpectrogram spec = stft(x, p);
  const Matrix mask = spectral_gate_mask(spec, prof, g);
  spec.frames = spec.frames.cwiseProduct(mask.cast<std::complex<double>>());
  const Waveform y = istft(spec);
  out.samples = y.samples.segment(lead, n);
  return out;
}

Waveform denoise(const Waveform& w, const Waveform& noise_clip, const FrameParams& p,
                 const GateParams& g) {
  return denoise(w, estimate_noise_profile(noise_clip, p), p, g);
}

}  // namespace vclone
