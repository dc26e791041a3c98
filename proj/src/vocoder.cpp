#include "vclone/vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <unsupported/Eigen/FFT>

namespace vclone {

namespace {

// Sample s reads (1 - a) * proj[t0] + a * proj[t1].
struct Tap {
  Index t0 = 0;
  Index t1 = 0;
  double a = 0.0;
};

Tap tap(Index s, Index frames, int hop, UpsampleMode mode) {
  if (mode == UpsampleMode::repeat) {
    const Index t = std::min<Index>(s / hop, frames - 1);
    return {t, t, 0.0};
  }
  const double u = (static_cast<double>(s) - 0.5 * hop) / hop;
  if (u <= 0.0) return {0, 0, 0.0};
  if (u >= static_cast<double>(frames - 1)) return {frames - 1, frames - 1, 0.0};
  const auto t0 = static_cast<Index>(std::floor(u));
  return {t0, t0 + 1, u - static_cast<double>(t0)};
}

Matrix project(const MelSpectrogram& m, const Matrix& weight, const Vector& bias) {
  if (m.channels() != weight.cols()) {
    throw Error(ErrorCode::shape_mismatch, "vocoder: mel has " + std::to_string(m.channels()) +
                                               " channels, projection expects " +
                                               std::to_string(weight.cols()));
  }
  Matrix proj = m.frames * weight.transpose();
  proj.rowwise() += bias.transpose();
  return proj;  // T x C
}

Matrix upsample_rows(const Matrix& proj, int hop, UpsampleMode mode, Index start, Index length) {
  Matrix out(length, proj.cols());
  for (Index i = 0; i < length; ++i) {
    const Tap k = tap(start + i, proj.rows(), hop, mode);
    if (k.a == 0.0) {
      out.row(i) = proj.row(k.t0);
    } else {
      out.row(i) = (1.0 - k.a) * proj.row(k.t0) + k.a * proj.row(k.t1);
    }
  }
  return out;
}

Vector layer_input(double prev, const Vector& cond) {
  Vector x(1 + cond.size());
  x << prev, cond;
  return x;
}

Vector layer_input(const Vector& below, const Vector& cond) {
  Vector x(below.size() + cond.size());
  x << below, cond;
  return x;
}

}  // namespace

VocoderConfig VocoderParams::config() const {
  VocoderConfig c;
  c.mel_channels = mel_channels();
  c.conditioning = conditioning();
  c.hidden = hidden();
  c.layers = static_cast<int>(gru.size());
  c.hop = hop;
  c.upsample = upsample;
  return c;
}

VocoderParams VocoderParams::zeros(const VocoderConfig& cfg) {
  if (cfg.layers < 1 || cfg.hidden < 1 || cfg.conditioning < 1 || cfg.mel_channels < 1 ||
      cfg.hop < 1) {
    throw Error(ErrorCode::invalid_argument, "vocoder sizes must be positive");
  }
  VocoderParams p;
  p.cond_weight = Matrix::Zero(cfg.conditioning, cfg.mel_channels);
  p.cond_bias = Vector::Zero(cfg.conditioning);
  for (int l = 0; l < cfg.layers; ++l) {
    const Index in = (l == 0 ? 1 : cfg.hidden) + cfg.conditioning;
    p.gru.push_back(GruLayer::zeros(in, cfg.hidden));
  }
  p.output_weight = Vector::Zero(cfg.hidden);
  p.hop = cfg.hop;
  p.upsample = cfg.upsample;
  return p;
}

VocoderParams VocoderParams::random(const VocoderConfig& cfg, Rng& rng) {
  VocoderParams p = zeros(cfg);
  ParamList body;
  add_param(body, "cond.weight", p.cond_weight);
  add_param(body, "cond.bias", p.cond_bias);
  for (std::size_t l = 0; l < p.gru.size(); ++l) p.gru[l].collect(body, "gru." + std::to_string(l));
  init_uniform(body, 1.0 / std::sqrt(static_cast<double>(cfg.hidden)), rng);
  return p;
}

ParamList VocoderParams::params() {
  ParamList list;
  add_param(list, "cond.weight", cond_weight);
  add_param(list, "cond.bias", cond_bias);
  for (std::size_t l = 0; l < gru.size(); ++l) gru[l].collect(list, "gru." + std::to_string(l));
  add_param(list, "output.weight", output_weight);
  add_param(list, "output.bias", output_bias);
  return list;
}

ConditioningTrack upsample_conditioning(const MelSpectrogram& m, const Matrix& weight,
                                        const Vector& bias, int hop, UpsampleMode mode) {
  if (m.num_frames() == 0) throw Error(ErrorCode::invalid_argument, "upsample: empty mel");
  if (hop < 1) throw Error(ErrorCode::invalid_argument, "upsample: hop must be positive");
  const Matrix proj = project(m, weight, bias);
  return {upsample_rows(proj, hop, mode, 0, proj.rows() * hop)};
}

VocoderState initial_state(const VocoderParams& p) {
  return VocoderState(p.gru.size(), Vector::Zero(p.hidden()));
}

double wavernn_step(const VocoderParams& p, double prev_sample, const Vector& cond,
                    VocoderState& state) {
  if (cond.size() != p.conditioning()) {
    throw Error(ErrorCode::shape_mismatch, "wavernn_step: conditioning width mismatch");
  }
  for (std::size_t l = 0; l < p.gru.size(); ++l) {
    const Vector x = l == 0 ? layer_input(prev_sample, cond) : layer_input(state[l - 1], cond);
    state[l] = gru_forward(p.gru[l], x, state[l]).h;
  }
  return std::tanh(p.output_weight.dot(state.back()) + p.output_bias);
}

double vocoder_loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size()) {
    throw Error(ErrorCode::shape_mismatch, "vocoder_loss: lengths differ (" +
                                               std::to_string(pred.size()) + " vs " +
                                               std::to_string(target.size()) + ")");
  }
  if (pred.size() == 0) return 0.0;
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

Vector teacher_forced_predict(const VocoderParams& p, const ConditioningTrack& cond,
                              const Vector& target) {
  if (target.size() != cond.size()) {
    throw Error(ErrorCode::shape_mismatch, "teacher forcing: target and conditioning lengths differ");
  }
  VocoderState state = initial_state(p);
  Vector pred(target.size());
  for (Index s = 0; s < target.size(); ++s) {
    const double prev = s == 0 ? 0.0 : target[s - 1];
    pred[s] = wavernn_step(p, prev, cond.values.row(s).transpose(), state);
  }
  return pred;
}

Vector aligned_target(const VocoderPair& pair, int hop) {
  const Index length = pair.mel.num_frames() * hop;
  if (pair.audio.size() < length) {
    throw Error(ErrorCode::shape_mismatch,
                "vocoder pair: " + std::to_string(pair.audio.size()) + " samples cannot cover " +
                    std::to_string(pair.mel.num_frames()) + " frames at hop " + std::to_string(hop));
  }
  return pair.audio.samples.head(length);
}

VocoderChunkGradients vocoder_chunk_gradients(const VocoderParams& p, const MelSpectrogram& mel,
                                              const Vector& target, Index start, Index length,
                                              const VocoderState& state) {
  if (start < 0 || length < 1 || start + length > target.size()) {
    throw Error(ErrorCode::out_of_range, "vocoder chunk outside the target");
  }
  const std::size_t layers = p.gru.size();
  const Matrix proj = project(mel, p.cond_weight, p.cond_bias);
  const Matrix cond = upsample_rows(proj, p.hop, p.upsample, start, length);

  // Forward
  std::vector<std::vector<GruStep>> steps(static_cast<std::size_t>(length));
  Vector pred(length);
  VocoderState h = state;
  for (Index i = 0; i < length; ++i) {
    const Index s = start + i;
    const double prev = s == 0 ? 0.0 : target[s - 1];
    const Vector c = cond.row(i).transpose();
    auto& at = steps[static_cast<std::size_t>(i)];
    at.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      const Vector x = l == 0 ? layer_input(prev, c) : layer_input(h[l - 1], c);
      at.push_back(gru_forward(p.gru[l], x, h[l]));
      h[l] = at.back().h;
    }
    pred[i] = std::tanh(p.output_weight.dot(h.back()) + p.output_bias);
  }

  VocoderChunkGradients out;
  out.loss = vocoder_loss(pred, target.segment(start, length));
  out.final_state = h;
  out.grads = VocoderParams::zeros(p.config());

  // Backward
  const Index c_size = p.conditioning();
  Matrix d_cond = Matrix::Zero(length, c_size);
  VocoderState d_h(layers, Vector::Zero(p.hidden()));
  const double scale = 2.0 / static_cast<double>(length);
  for (Index i = length; i-- > 0;) {
    const auto& at = steps[static_cast<std::size_t>(i)];
    const double err = pred[i] - target[start + i];
    const double d_pre = scale * err * (1.0 - pred[i] * pred[i]);
    out.grads.output_weight += d_pre * at.back().h;
    out.grads.output_bias += d_pre;
    d_h.back() += d_pre * p.output_weight;
    for (std::size_t l = layers; l-- > 0;) {
      const Vector dx = gru_backward(p.gru[l], at[l], d_h[l], out.grads.gru[l]);
      d_cond.row(i) += dx.tail(c_size).transpose();
      if (l > 0) d_h[l - 1] += dx.head(p.hidden());
    }
  }

  // Through the upsampler and projection.
  Matrix d_proj = Matrix::Zero(proj.rows(), proj.cols());
  for (Index i = 0; i < length; ++i) {
    const Tap k = tap(start + i, proj.rows(), p.hop, p.upsample);
    d_proj.row(k.t0) += (1.0 - k.a) * d_cond.row(i);
    if (k.a != 0.0) d_proj.row(k.t1) += k.a * d_cond.row(i);
  }
  out.grads.cond_weight = d_proj.transpose() * mel.frames;
  out.grads.cond_bias = d_proj.colwise().sum().transpose();
  return out;
}

VocoderTrainResult train_vocoder(const std::vector<VocoderPair>& pairs,
                                 const VocoderTrainConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::invalid_argument, "train_vocoder: no pairs");
  if (cfg.chunk < 1) throw Error(ErrorCode::invalid_argument, "train_vocoder: chunk must be positive");
  std::vector<Vector> targets;
  for (const auto& pair : pairs) {
    if (pair.mel.channels() != cfg.model.mel_channels) {
      throw Error(ErrorCode::shape_mismatch, "train_vocoder: mel channel count mismatch");
    }
    targets.push_back(aligned_target(pair, cfg.model.hop));
  }

  Rng rng(cfg.seed);
  VocoderTrainResult result;
  result.params = VocoderParams::random(cfg.model, rng);
  VocoderParams grads = VocoderParams::zeros(cfg.model);
  Sgd sgd(cfg.sgd);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  Index position = 0;
  VocoderState state;
  for (int step = 0; step < cfg.steps; ++step) {
    if (cursor == order.size() || position >= targets[order[cursor]].size()) {
      if (cursor + 1 >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      } else {
        ++cursor;
      }
      position = 0;
      state = initial_state(result.params);
    }
    const std::size_t clip = order[cursor];
    const Index length = std::min<Index>(cfg.chunk, targets[clip].size() - position);
    auto g = vocoder_chunk_gradients(result.params, pairs[clip].mel, targets[clip], position,
                                     length, state);
    grads = std::move(g.grads);
    result.log.push_back({step, g.loss});
    sgd.step(result.params.params(), grads.params());
    state = std::move(g.final_state);
    position += length;
  }
  return result;
}

Waveform generate(const VocoderParams& p, const ConditioningTrack& cond, double seed_sample,
                  int sample_rate_hz) {
  if (cond.size() == 0) throw Error(ErrorCode::invalid_argument, "generate: empty conditioning");
  VocoderState state = initial_state(p);
  Waveform out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.resize(cond.size());
  double prev = seed_sample;
  for (Index s = 0; s < cond.size(); ++s) {
    prev = wavernn_step(p, prev, cond.values.row(s).transpose(), state);
    out.samples[s] = prev;
  }
  return out;
}

double spectral_consistency_error(const Waveform& x, const Matrix& magnitude, const FrameParams& p) {
  const ComplexSpectrogram s = stft(x, p);
  if (s.frames.rows() != magnitude.rows() || s.frames.cols() != magnitude.cols()) {
    throw Error(ErrorCode::shape_mismatch, "consistency: spectrogram shape mismatch");
  }
  const Eigen::ArrayXXd diff2 = (s.frames.cwiseAbs() - magnitude).array().square();
  // Interior bins stand for a conjugate pair in the two-sided spectrum.
  double total = 2.0 * diff2.sum() - diff2.col(0).sum();
  if (p.fft_size % 2 == 0) total -= diff2.col(diff2.cols() - 1).sum();
  return std::sqrt(total);
}

ComplexMatrix sequential_phase_init(const Matrix& magnitude, const FrameParams& p) {
  const Index frames = magnitude.rows();
  ComplexMatrix out(frames, magnitude.cols());
  if (frames == 0) return out;
  const Vector window = make_window(p.window, p.window_length);
  const Index length = (frames - 1) * p.hop + p.window_length;
  Vector acc = Vector::Zero(length);
  Vector norm = Vector::Zero(length);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buffer(static_cast<std::size_t>(p.fft_size));
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(p.bins()));
  for (Index t = 0; t < frames; ++t) {
    const Index start = t * p.hop;
    std::fill(buffer.begin(), buffer.end(), 0.0);
    for (int n = 0; n < p.window_length; ++n) {
      const double den = norm[start + n];
      buffer[std::size_t(n)] = den > 1e-12 ? window[n] * acc[start + n] / den : 0.0;
    }
    fft.fwd(spectrum, buffer);
    for (int k = 0; k < p.bins(); ++k) {
      const std::complex<double> z = spectrum[std::size_t(k)];
      const double a = std::abs(z);
      out(t, k) = a > 1e-12 ? magnitude(t, k) * (z / a) : std::complex<double>(magnitude(t, k));
      spectrum[std::size_t(k)] = out(t, k);
    }
    fft.inv(buffer, spectrum, p.fft_size);
    for (int n = 0; n < p.window_length; ++n) {
      acc[start + n] += window[n] * buffer[std::size_t(n)];
      norm[start + n] += window[n] * window[n];
    }
  }
  return out;
}

GriffinLimResult griffin_lim(const Matrix& magnitude, const FrameParams& p, int iters,
                             int sample_rate_hz) {
  p.validate();
  if (magnitude.cols() != p.bins()) {
    throw Error(ErrorCode::shape_mismatch, "griffin_lim: bin count does not match fft size");
  }
  if ((magnitude.array() < 0.0).any()) {
    throw Error(ErrorCode::invalid_argument, "griffin_lim: magnitudes must be nonnegative");
  }
  if (iters < 1) throw Error(ErrorCode::invalid_argument, "griffin_lim: iters must be >= 1");

  ComplexSpectrogram spec;
  spec.params = p;
  spec.sample_rate_hz = sample_rate_hz;
  spec.frames = sequential_phase_init(magnitude, p);

  GriffinLimResult result;
  result.audio = istft(spec);
  for (int it = 0; it < iters; ++it) {
    const ComplexSpectrogram est = stft(result.audio, p);
    for (Index t = 0; t < est.frames.rows(); ++t) {
      for (Index k = 0; k < est.frames.cols(); ++k) {
        const std::complex<double> z = est.frames(t, k);
        const double a = std::abs(z);
        spec.frames(t, k) = a > 0.0 ? magnitude(t, k) * (z / a) : std::complex<double>(magnitude(t, k));
      }
    }
    result.audio = istft(spec);
    result.errors.push_back(spectral_consistency_error(result.audio, magnitude, p));
  }
  return result;
}

}  // namespace vclone
