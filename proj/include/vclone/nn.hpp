#pragma once

#include "vclone/common.hpp"

#include <string>
#include <vector>

namespace vclone {

// ---------------------------------------------------------------------------
// Parameter views: a flat, named list of every trainable tensor in a model.
// Gradients are stored in a structure of the same type, so the two lists line
// up index by index.

struct ParamView {
  std::string name;
  double* data = nullptr;
  Index rows = 0;
  Index cols = 0;
  bool is_vector = false;
  bool is_scalar = false;

  Index size() const { return rows * cols; }
  Eigen::Map<Matrix> map() const { return Eigen::Map<Matrix>(data, rows, cols); }
};

using ParamList = std::vector<ParamView>;

void add_param(ParamList& list, std::string name, Matrix& m);
void add_param(ParamList& list, std::string name, Vector& v);
void add_param(ParamList& list, std::string name, double& scalar);

double squared_norm(const ParamList& list);
void set_zero(const ParamList& list);

struct SgdConfig {
  double learning_rate = 0.01;
  double clip_norm = 3.0;  // global L2 clip, <= 0 disables
  double momentum = 0.0;
};

/// Plain (optionally momentum) SGD with global-norm gradient clipping.
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg) : cfg_(cfg) {}

  /// Returns the pre-clip gradient norm.
  double step(const ParamList& params, const ParamList& grads);

 private:
  SgdConfig cfg_;
  std::vector<Vector> velocity_;
};

void init_uniform(const ParamList& list, double bound, Rng& rng);

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  return 1.0 / (1.0 + (-x).exp());
}

// ---------------------------------------------------------------------------
// LSTM layer, gates packed as [input, forget, candidate, output].

struct LstmLayer {
  Matrix w_input;   // 4H x D
  Matrix w_hidden;  // 4H x H
  Vector bias;      // 4H

  Index hidden_size() const { return w_hidden.cols(); }
  Index input_size() const { return w_input.cols(); }

  static LstmLayer zeros(Index input, Index hidden);
  void collect(ParamList& list, const std::string& prefix);
};

/// Batched sequence activations. Every matrix has one column per sequence.
struct LstmTrace {
  std::vector<Matrix> inputs;  // x_t, D x B
  std::vector<Matrix> gates;   // activated gates, 4H x B
  std::vector<Matrix> cells;   // c_t, H x B
  std::vector<Matrix> hidden;  // h_t, H x B
};

struct LstmState {
  Matrix hidden;
  Matrix cell;

  static LstmState zeros(Index hidden_size, Index batch = 1) {
    return {Matrix::Zero(hidden_size, batch), Matrix::Zero(hidden_size, batch)};
  }
};

/// One recurrence step, updating state in place.
void lstm_step(const LstmLayer& layer, const Matrix& input, LstmState& state);

/// Runs the layer from a zero state over inputs[0..T).
LstmTrace lstm_forward(const LstmLayer& layer, std::vector<Matrix> inputs);

/// Backpropagates d_hidden[t] = dL/dh_t (empty matrices count as zero),
/// accumulates into grad, and returns dL/dx_t.
std::vector<Matrix> lstm_backward(const LstmLayer& layer, const LstmTrace& trace,
                                  const std::vector<Matrix>& d_hidden, LstmLayer& grad);

// ---------------------------------------------------------------------------
// GRU layer, gates packed as [update, reset, candidate]:
//   z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br)
//   n = tanh(Wn x + bn + r * (Un h + bhn)),  h' = (1 - z) * n + z * h

struct GruLayer {
  Matrix w_input;      // 3H x D
  Matrix w_hidden;     // 3H x H
  Vector bias;         // 3H
  Vector bias_hidden;  // H, inside the reset product

  Index hidden_size() const { return w_hidden.cols(); }
  Index input_size() const { return w_input.cols(); }

  static GruLayer zeros(Index input, Index hidden);
  void collect(ParamList& list, const std::string& prefix);
};

struct GruStep {
  Vector input;
  Vector h_prev;
  Vector update;
  Vector reset;
  Vector candidate;
  Vector hidden_proj;  // Un h + bhn
  Vector h;
};

GruStep gru_forward(const GruLayer& layer, const Vector& input, const Vector& h_prev);

/// Returns dL/dx; d_h carries dL/dh' in and dL/dh_prev out.
Vector gru_backward(const GruLayer& layer, const GruStep& step, Vector& d_h, GruLayer& grad);

}  // namespace vclone
