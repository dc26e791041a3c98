#include "vclone/encoder.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vclone {

EncoderParams EncoderParams::zeros(const EncoderConfig& cfg) {
  if (cfg.layers < 1) throw Error(ErrorCode::invalid_argument, "encoder needs >= 1 layer");
  EncoderParams p;
  for (int l = 0; l < cfg.layers; ++l) {
    p.lstm.push_back(LstmLayer::zeros(l == 0 ? cfg.input_size : cfg.hidden_size, cfg.hidden_size));
  }
  p.projection = Matrix::Zero(cfg.embedding_size, cfg.hidden_size);
  p.projection_bias = Vector::Zero(cfg.embedding_size);
  return p;
}

EncoderParams EncoderParams::random(const EncoderConfig& cfg, Rng& rng) {
  EncoderParams p = zeros(cfg);
  init_uniform(p.params(), 1.0 / std::sqrt(double(cfg.hidden_size)), rng);
  return p;
}

ParamList EncoderParams::params() {
  ParamList list;
  for (std::size_t l = 0; l < lstm.size(); ++l) lstm[l].collect(list, "lstm." + std::to_string(l));
  add_param(list, "projection.weight", projection);
  add_param(list, "projection.bias", projection_bias);
  return list;
}

ParamList SimilarityParams::params() {
  ParamList list;
  add_param(list, "similarity.w", scale_w);
  add_param(list, "similarity.b", bias_b);
  return list;
}

Dvector Dvector::normalized(const Vector& raw) {
  const double norm = raw.norm();
  if (!(norm >= 1e-12)) {
    throw Error(ErrorCode::degenerate_embedding, "degenerate embedding: zero-norm projection");
  }
  return Dvector{raw / norm};
}

void GE2EBatch::validate() const {
  if (speakers < 2 || utterances < 2) {
    throw Error(ErrorCode::invalid_argument, "GE2E batch needs N >= 2 and M >= 2");
  }
  if (static_cast<Index>(features.size()) != speakers * utterances) {
    throw Error(ErrorCode::shape_mismatch, "GE2E batch must hold exactly N*M sequences");
  }
}

FeatureSequence normalize_frames(const FeatureSequence& x) {
  FeatureSequence out = x;
  if (x.width() == 0) return out;
  for (Index t = 0; t < x.num_frames(); ++t) {
    auto row = out.frames.row(t).array();
    const double mean = row.mean();
    const double var = (row - mean).square().mean();
    row = (row - mean) / std::sqrt(var + 1e-6);
  }
  return out;
}

namespace {

struct EncoderPass {
  std::vector<LstmTrace> layers;
  Matrix raw;         // E x B
  Matrix embeddings;  // B x E
  Vector norms;
};

void check_input(const EncoderParams& params, const FeatureSequence& x) {
  if (x.num_frames() < 1) throw Error(ErrorCode::invalid_argument, "encoder: empty feature sequence");
  if (x.width() != params.input_size()) {
    throw Error(ErrorCode::shape_mismatch, "encoder: feature width " + std::to_string(x.width()) +
                                               " != " + std::to_string(params.input_size()));
  }
}

std::vector<Matrix> time_major(const std::vector<FeatureSequence>& xs, bool normalize) {
  const Index steps = xs.front().num_frames();
  const Index width = xs.front().width();
  std::vector<Matrix> inputs(static_cast<std::size_t>(steps), Matrix(width, Index(xs.size())));
  for (std::size_t b = 0; b < xs.size(); ++b) {
    if (xs[b].num_frames() != steps) {
      throw Error(ErrorCode::shape_mismatch, "encoder batch: sequences differ in length");
    }
    const Matrix frames = normalize ? normalize_frames(xs[b]).frames : xs[b].frames;
    for (Index t = 0; t < steps; ++t) {
      inputs[static_cast<std::size_t>(t)].col(Index(b)) = frames.row(t).transpose();
    }
  }
  return inputs;
}

std::vector<LstmTrace> run_stack(const EncoderParams& params, std::vector<Matrix> inputs) {
  std::vector<LstmTrace> traces;
  traces.reserve(params.lstm.size());
  for (const auto& layer : params.lstm) {
    traces.push_back(lstm_forward(layer, std::move(inputs)));
    inputs = traces.back().hidden;
  }
  return traces;
}

EncoderPass run_encoder(const EncoderParams& params, const std::vector<FeatureSequence>& xs) {
  if (xs.empty()) throw Error(ErrorCode::invalid_argument, "encoder: empty batch");
  for (const auto& x : xs) check_input(params, x);
  EncoderPass pass;
  pass.layers = run_stack(params, time_major(xs, true));
  pass.raw = params.projection * pass.layers.back().hidden.back();
  pass.raw.colwise() += params.projection_bias;
  pass.norms = pass.raw.colwise().norm().transpose();
  if ((pass.norms.array() < 1e-12).any()) {
    throw Error(ErrorCode::degenerate_embedding, "degenerate embedding: zero-norm projection");
  }
  pass.embeddings = (pass.raw.array().rowwise() / pass.norms.transpose().array()).matrix().transpose();
  return pass;
}

}  // namespace

Vector lstm_forward(const EncoderParams& params, const FeatureSequence& x) {
  check_input(params, x);
  const auto traces = run_stack(params, time_major({x}, false));
  return traces.back().hidden.back().col(0);
}

Matrix embed_batch(const EncoderParams& params, const std::vector<FeatureSequence>& xs) {
  return run_encoder(params, xs).embeddings;
}

Dvector embed_frames(const EncoderParams& params, const FeatureSequence& x) {
  return Dvector{embed_batch(params, {x}).row(0).transpose()};
}

// ---------------------------------------------------------------------------
// GE2E

Centroids centroids(const Eigen::Ref<const Matrix>& embeddings, Index speakers, Index utterances) {
  if (embeddings.rows() != speakers * utterances) {
    throw Error(ErrorCode::shape_mismatch, "centroids: expected N*M embedding rows");
  }
  if (utterances < 2) {
    throw Error(ErrorCode::invalid_argument, "centroids: exclusive centroids need M >= 2");
  }
  Centroids c;
  c.full.resize(speakers, embeddings.cols());
  c.exclusive.resize(embeddings.rows(), embeddings.cols());
  for (Index j = 0; j < speakers; ++j) {
    const auto block = embeddings.middleRows(j * utterances, utterances);
    const Eigen::RowVectorXd sum = block.colwise().sum();
    c.full.row(j) = sum / double(utterances);
    for (Index i = 0; i < utterances; ++i) {
      c.exclusive.row(j * utterances + i) = (sum - block.row(i)) / double(utterances - 1);
    }
  }
  return c;
}

namespace {

double cosine(const Eigen::Ref<const Eigen::RowVectorXd>& a,
              const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double nb = b.norm();
  if (!(nb > 0.0)) throw Error(ErrorCode::degenerate_embedding, "similarity: zero-norm centroid");
  return a.dot(b) / (a.norm() * nb);
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double top = row.maxCoeff();
  return top + std::log((row.array() - top).exp().sum());
}

}  // namespace

SimilarityMatrix similarity_matrix(const Eigen::Ref<const Matrix>& embeddings,
                                   const Centroids& cents, const SimilarityParams& sp) {
  if (!(sp.scale_w > 0.0)) throw Error(ErrorCode::invalid_argument, "similarity scale must be > 0");
  const Index speakers = cents.full.rows();
  const Index utterances = cents.utterances();
  SimilarityMatrix s{Matrix(embeddings.rows(), speakers), sp, utterances};
  for (Index row = 0; row < embeddings.rows(); ++row) {
    for (Index k = 0; k < speakers; ++k) {
      const auto& c = k == s.own_speaker(row) ? cents.exclusive.row(row) : cents.full.row(k);
      s.entries(row, k) = sp.scale_w * cosine(embeddings.row(row), c) + sp.bias_b;
    }
  }
  return s;
}

double ge2e_loss(const SimilarityMatrix& s) {
  double loss = 0.0;
  for (Index row = 0; row < s.entries.rows(); ++row) {
    loss += -s.entries(row, s.own_speaker(row)) + log_sum_exp(s.entries.row(row));
  }
  return loss;
}

EmbeddingGradients ge2e_embedding_gradients(const Eigen::Ref<const Matrix>& embeddings,
                                            const SimilarityParams& sp, Index speakers,
                                            Index utterances) {
  const Centroids cents = centroids(embeddings, speakers, utterances);
  const SimilarityMatrix s = similarity_matrix(embeddings, cents, sp);

  EmbeddingGradients g;
  g.loss = ge2e_loss(s);
  g.embeddings = Matrix::Zero(embeddings.rows(), embeddings.cols());
  Matrix d_full = Matrix::Zero(speakers, embeddings.cols());
  Matrix d_exclusive = Matrix::Zero(embeddings.rows(), embeddings.cols());

  for (Index row = 0; row < s.entries.rows(); ++row) {
    const Eigen::RowVectorXd scores = s.entries.row(row);
    const double top = scores.maxCoeff();
    Eigen::RowVectorXd soft = (scores.array() - top).exp();
    soft /= soft.sum();
    const Index own = s.own_speaker(row);
    soft(own) -= 1.0;

    const auto e = embeddings.row(row);
    const double ne = e.norm();
    for (Index k = 0; k < speakers; ++k) {
      const bool is_own = k == own;
      const auto c = is_own ? cents.exclusive.row(row) : cents.full.row(k);
      const double nc = c.norm();
      const double cos = e.dot(c) / (ne * nc);
      g.scale_w += soft(k) * cos;
      g.bias_b += soft(k);
      const double upstream = sp.scale_w * soft(k);
      g.embeddings.row(row) += upstream * (c / (ne * nc) - cos * e / (ne * ne));
      const Eigen::RowVectorXd dc = upstream * (e / (ne * nc) - cos * c / (nc * nc));
      if (is_own) {
        d_exclusive.row(row) += dc;
      } else {
        d_full.row(k) += dc;
      }
    }
  }

  for (Index j = 0; j < speakers; ++j) {
    Eigen::RowVectorXd excl_sum = Eigen::RowVectorXd::Zero(embeddings.cols());
    for (Index i = 0; i < utterances; ++i) excl_sum += d_exclusive.row(j * utterances + i);
    for (Index i = 0; i < utterances; ++i) {
      const Index row = j * utterances + i;
      g.embeddings.row(row) += d_full.row(j) / double(utterances);
      g.embeddings.row(row) += (excl_sum - d_exclusive.row(row)) / double(utterances - 1);
    }
  }
  return g;
}

double ge2e_batch_loss(const GE2EBatch& batch, const EncoderParams& params,
                       const SimilarityParams& sp) {
  batch.validate();
  const Matrix e = embed_batch(params, batch.features);
  return ge2e_loss(similarity_matrix(e, centroids(e, batch.speakers, batch.utterances), sp));
}

Ge2eGradients ge2e_gradients(const GE2EBatch& batch, const EncoderParams& params,
                             const SimilarityParams& sp) {
  batch.validate();
  const EncoderPass pass = run_encoder(params, batch.features);
  const EmbeddingGradients eg =
      ge2e_embedding_gradients(pass.embeddings, sp, batch.speakers, batch.utterances);

  Ge2eGradients out;
  out.loss = eg.loss;
  out.similarity.scale_w = eg.scale_w;
  out.similarity.bias_b = eg.bias_b;
  EncoderConfig shape{params.input_size(), params.hidden_size(), params.embedding_size(),
                      static_cast<int>(params.lstm.size())};
  out.encoder = EncoderParams::zeros(shape);

  // Through the L2 normalization: dr = (de - e (e . de)) / |r|.
  const Matrix de = eg.embeddings.transpose();
  const Matrix e = pass.embeddings.transpose();
  const Eigen::RowVectorXd along = (e.array() * de.array()).colwise().sum();
  Matrix d_raw = de - (e.array().rowwise() * along.array()).matrix();
  d_raw.array().rowwise() /= pass.norms.transpose().array();

  const Matrix& top_hidden = pass.layers.back().hidden.back();
  out.encoder.projection.noalias() = d_raw * top_hidden.transpose();
  out.encoder.projection_bias = d_raw.rowwise().sum();

  std::vector<Matrix> d_hidden(pass.layers.back().hidden.size());
  d_hidden.back() = params.projection.transpose() * d_raw;
  for (std::size_t l = params.lstm.size(); l-- > 0;) {
    d_hidden = lstm_backward(params.lstm[l], pass.layers[l], d_hidden, out.encoder.lstm[l]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

FeatureSequence crop_frames(const FeatureSequence& x, Index start, Index length) {
  if (x.num_frames() < 1) throw Error(ErrorCode::invalid_argument, "crop: empty feature sequence");
  FeatureSequence out{Matrix(length, x.width()), x.mode};
  if (x.num_frames() >= length) {
    if (start < 0 || start + length > x.num_frames()) {
      throw Error(ErrorCode::out_of_range, "crop: window exceeds sequence");
    }
    out.frames = x.frames.middleRows(start, length);
    return out;
  }
  for (Index t = 0; t < length; ++t) out.frames.row(t) = x.frames.row(t % x.num_frames());
  return out;
}

EncoderTrainResult train_encoder(const std::vector<SpeakerFeatures>& corpus,
                                 const EncoderTrainConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.speakers_per_batch);
  const auto m = static_cast<std::size_t>(cfg.utterances_per_speaker);
  std::vector<std::size_t> eligible;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    if (corpus[s].utterances.size() >= m) eligible.push_back(s);
  }
  if (n < 2 || m < 2 || eligible.size() < n) {
    throw Error(ErrorCode::corpus_too_small,
                "corpus too small: need " + std::to_string(n) + " speakers with >= " +
                    std::to_string(m) + " utterances, have " + std::to_string(eligible.size()));
  }

  Rng rng(cfg.seed);
  EncoderTrainResult result;
  result.model.params = EncoderParams::random(cfg.model, rng);
  result.model.mode = corpus[eligible.front()].utterances.front().mode;
  EncoderParams& params = result.model.params;
  SimilarityParams& sp = result.model.similarity;

  ParamList values = params.params();
  for (auto& v : sp.params()) values.push_back(v);
  Sgd sgd(cfg.sgd);

  GE2EBatch batch;
  batch.speakers = Index(n);
  batch.utterances = Index(m);
  for (int step = 0; step < cfg.steps; ++step) {
    std::shuffle(eligible.begin(), eligible.end(), rng);
    batch.features.clear();
    for (std::size_t j = 0; j < n; ++j) {
      const auto& utts = corpus[eligible[j]].utterances;
      std::vector<std::size_t> order(utts.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < m; ++i) {
        const FeatureSequence& x = utts[order[i]];
        const Index slack = std::max<Index>(0, x.num_frames() - cfg.window_frames);
        const Index start = std::uniform_int_distribution<Index>(0, slack)(rng);
        batch.features.push_back(crop_frames(x, start, cfg.window_frames));
      }
    }

    Ge2eGradients g = ge2e_gradients(batch, params, sp);
    result.log.push_back({step, g.loss, sp.scale_w, sp.bias_b});
    ParamList grads = g.encoder.params();
    for (auto& v : g.similarity.params()) grads.push_back(v);
    sgd.step(values, grads);
    sp.reproject();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference

Dvector embed_utterance(const EncoderParams& params, const FeatureSequence& features,
                        Index window_frames, Index stride_frames) {
  if (features.num_frames() < 1) {
    throw Error(ErrorCode::invalid_argument, "embed_utterance: empty features");
  }
  if (window_frames < 1 || stride_frames < 1) {
    throw Error(ErrorCode::invalid_argument, "embed_utterance: window and stride must be positive");
  }
  std::vector<FeatureSequence> windows;
  if (features.num_frames() <= window_frames) {
    windows.push_back(crop_frames(features, 0, window_frames));
  } else {
    for (Index start = 0; start + window_frames <= features.num_frames(); start += stride_frames) {
      windows.push_back(crop_frames(features, start, window_frames));
    }
  }
  const Matrix e = embed_batch(params, windows);
  return Dvector::normalized(e.colwise().mean().transpose());
}

Verification cosine_verify(const Dvector& a, const Dvector& b, double threshold) {
  if (a.size() != b.size()) throw Error(ErrorCode::shape_mismatch, "verify: dimension mismatch");
  const double sim = a.values.dot(b.values);
  return {sim, sim >= threshold};
}

double compute_eer(const std::vector<double>& same_scores, const std::vector<double>& diff_scores) {
  if (same_scores.empty() || diff_scores.empty()) {
    throw Error(ErrorCode::invalid_argument, "eer: score lists must be nonempty");
  }
  std::vector<double> thresholds(same_scores);
  thresholds.insert(thresholds.end(), diff_scores.begin(), diff_scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  auto rates = [&](double t) {
    const double fa = double(std::count_if(diff_scores.begin(), diff_scores.end(),
                                           [t](double s) { return s >= t; })) /
                      double(diff_scores.size());
    const double fr = double(std::count_if(same_scores.begin(), same_scores.end(),
                                           [t](double s) { return s < t; })) /
                      double(same_scores.size());
    return std::pair{fa, fr};
  };

  auto [prev_fa, prev_fr] = rates(thresholds.front());
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const auto [fa, fr] = rates(thresholds[i]);
    const double gap = fa - fr;
    if (gap <= 0.0) {
      if (gap == 0.0) return fa;
      const double prev_gap = prev_fa - prev_fr;
      const double alpha = prev_gap / (prev_gap - gap);
      return prev_fa + alpha * (fa - prev_fa);
    }
    prev_fa = fa;
    prev_fr = fr;
  }
  return prev_fa;
}

Matrix project_2d(const std::vector<Dvector>& embeddings) {
  if (embeddings.size() < 2) throw Error(ErrorCode::invalid_argument, "project_2d: need >= 2 points");
  const Index dim = embeddings.front().size();
  Matrix data(Index(embeddings.size()), dim);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != dim) throw Error(ErrorCode::shape_mismatch, "project_2d: mixed dimensions");
    data.row(Index(i)) = embeddings[i].values.transpose();
  }
  data.rowwise() -= data.colwise().mean();

  Eigen::JacobiSVD<Matrix> svd(data, Eigen::ComputeThinV);
  Matrix axes = Matrix::Zero(dim, 2);
  const Index keep = std::min<Index>(2, svd.matrixV().cols());
  axes.leftCols(keep) = svd.matrixV().leftCols(keep);
  for (Index a = 0; a < keep; ++a) {
    Index pivot = 0;
    axes.col(a).cwiseAbs().maxCoeff(&pivot);
    if (axes(pivot, a) < 0.0) axes.col(a) *= -1.0;
  }
  return data * axes;
}

}  // namespace vclone
