#pragma once

#include "vclone/dsp.hpp"
#include "vclone/nn.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace vclone {

struct EncoderConfig {
  Index input_size = 40;
  Index hidden_size = 64;
  Index embedding_size = 32;
  int layers = 3;
};

/// Stacked LSTM followed by a linear projection of the last hidden state.
struct EncoderParams {
  std::vector<LstmLayer> lstm;
  Matrix projection;       // E x H
  Vector projection_bias;  // E

  Index input_size() const { return lstm.front().input_size(); }
  Index hidden_size() const { return lstm.back().hidden_size(); }
  Index embedding_size() const { return projection.rows(); }

  static EncoderParams zeros(const EncoderConfig& cfg);
  static EncoderParams random(const EncoderConfig& cfg, Rng& rng);
  ParamList params();
};

/// Scale and offset of the cosine similarity matrix. The scale stays positive.
struct SimilarityParams {
  static constexpr double kMinScale = 1e-4;

  double scale_w = 10.0;
  double bias_b = -5.0;

  void reproject() { scale_w = std::max(scale_w, kMinScale); }
  ParamList params();
};

/// Unit-norm speaker embedding.
struct Dvector {
  Vector values;

  /// Normalizes raw; throws degenerate_embedding when its norm is below 1e-12.
  static Dvector normalized(const Vector& raw);
  Index size() const { return values.size(); }
};

/// N speakers x M utterances, stored speaker-major: entry (j, i) at j*M + i.
struct GE2EBatch {
  Index speakers = 0;
  Index utterances = 0;
  std::vector<FeatureSequence> features;

  const FeatureSequence& at(Index j, Index i) const {
    return features[static_cast<std::size_t>(j * utterances + i)];
  }
  void validate() const;
};

/// Rows index utterances (j*M + i), columns index centroids k.
struct SimilarityMatrix {
  Matrix entries;
  SimilarityParams params;
  Index utterances = 0;

  /// Column holding the utterance's own speaker.
  Index own_speaker(Index row) const { return row / utterances; }
};

struct Centroids {
  Matrix full;       // N x E
  Matrix exclusive;  // N*M x E, own utterance left out

  Index utterances() const { return exclusive.rows() / full.rows(); }
};

/// Per-frame standardization across channels, applied before the LSTM.
FeatureSequence normalize_frames(const FeatureSequence& x);

/// Final hidden state of the top layer.
Vector lstm_forward(const EncoderParams& params, const FeatureSequence& x);

Dvector embed_frames(const EncoderParams& params, const FeatureSequence& x);

/// Embeds equal-length sequences in one batched pass; row b is sequence b.
Matrix embed_batch(const EncoderParams& params, const std::vector<FeatureSequence>& xs);

Centroids centroids(const Eigen::Ref<const Matrix>& embeddings, Index speakers,
                    Index utterances);

SimilarityMatrix similarity_matrix(const Eigen::Ref<const Matrix>& embeddings,
                                   const Centroids& cents, const SimilarityParams& sp);

/// Softmax GE2E, summed over every utterance in the batch.
double ge2e_loss(const SimilarityMatrix& s);

/// Loss and its derivatives with respect to the embedding rows, w and b.
struct EmbeddingGradients {
  double loss = 0.0;
  Matrix embeddings;
  double scale_w = 0.0;
  double bias_b = 0.0;
};

EmbeddingGradients ge2e_embedding_gradients(const Eigen::Ref<const Matrix>& embeddings,
                                            const SimilarityParams& sp, Index speakers,
                                            Index utterances);

struct Ge2eGradients {
  double loss = 0.0;
  EncoderParams encoder;
  SimilarityParams similarity;
};

double ge2e_batch_loss(const GE2EBatch& batch, const EncoderParams& params,
                       const SimilarityParams& sp);

Ge2eGradients ge2e_gradients(const GE2EBatch& batch, const EncoderParams& params,
                             const SimilarityParams& sp);

// ---------------------------------------------------------------------------
// Training

struct SpeakerFeatures {
  std::string speaker_id;
  std::vector<FeatureSequence> utterances;
};

struct EncoderTrainConfig {
  EncoderConfig model;
  int speakers_per_batch = 4;
  int utterances_per_speaker = 5;
  int window_frames = 80;
  int steps = 1000;
  SgdConfig sgd{0.01, 3.0, 0.0};
  std::uint64_t seed = 1;
};

struct EncoderLogEntry {
  int step = 0;
  double loss = 0.0;
  double scale_w = 0.0;
  double bias_b = 0.0;
};

struct EncoderModel {
  EncoderParams params;
  SimilarityParams similarity;
  FeatureMode mode = FeatureMode::log_mel;
};

struct EncoderTrainResult {
  EncoderModel model;
  std::vector<EncoderLogEntry> log;
};

/// Fixed-length excerpt starting at `start`; sequences shorter than `length`
/// are tiled.
FeatureSequence crop_frames(const FeatureSequence& x, Index start, Index length);

EncoderTrainResult train_encoder(const std::vector<SpeakerFeatures>& corpus,
                                 const EncoderTrainConfig& cfg);

// ---------------------------------------------------------------------------
// Inference

Dvector embed_utterance(const EncoderParams& params, const FeatureSequence& features,
                        Index window_frames = 80, Index stride_frames = 40);

struct Verification {
  double similarity = 0.0;
  bool accepted = false;
};

Verification cosine_verify(const Dvector& a, const Dvector& b, double threshold = 0.75);

/// Equal error rate by threshold sweep with linear interpolation at the crossing.
double compute_eer(const std::vector<double>& same_scores,
                   const std::vector<double>& diff_scores);

/// Mean-centered projection onto the top two principal axes, one row per input.
Matrix project_2d(const std::vector<Dvector>& embeddings);

}  // namespace vclone
