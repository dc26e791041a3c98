#include "vclone/nn.hpp"

#include <cmath>

namespace vclone {

void add_param(ParamList& list, std::string name, Matrix& m) {
  list.push_back({std::move(name), m.data(), m.rows(), m.cols(), false});
}

void add_param(ParamList& list, std::string name, Vector& v) {
  list.push_back({std::move(name), v.data(), v.rows(), 1, true});
}

void add_param(ParamList& list, std::string name, double& scalar) {
  list.push_back({std::move(name), &scalar, 1, 1, true, true});
}

double squared_norm(const ParamList& list) {
  double sum = 0.0;
  for (const auto& p : list) sum += p.map().squaredNorm();
  return sum;
}

void set_zero(const ParamList& list) {
  for (const auto& p : list) p.map().setZero();
}

double Sgd::step(const ParamList& params, const ParamList& grads) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::shape_mismatch, "sgd: parameter/gradient lists differ");
  }
  const double norm = std::sqrt(squared_norm(grads));
  const double scale =
      (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  if (cfg_.momentum > 0.0 && velocity_.empty()) {
    for (const auto& p : params) velocity_.push_back(Vector::Zero(p.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = Eigen::Map<Vector>(params[i].data, params[i].size());
    auto grad = Eigen::Map<const Vector>(grads[i].data, grads[i].size());
    if (cfg_.momentum > 0.0) {
      velocity_[i] = cfg_.momentum * velocity_[i] + scale * grad;
      value -= cfg_.learning_rate * velocity_[i];
    } else {
      value -= (cfg_.learning_rate * scale) * grad;
    }
  }
  return norm;
}

void init_uniform(const ParamList& list, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (const auto& p : list) {
    for (Index i = 0; i < p.size(); ++i) p.data[i] = dist(rng);
  }
}

// ---------------------------------------------------------------------------
// LSTM

LstmLayer LstmLayer::zeros(Index input, Index hidden) {
  return LstmLayer{Matrix::Zero(4 * hidden, input), Matrix::Zero(4 * hidden, hidden),
                   Vector::Zero(4 * hidden)};
}

void LstmLayer::collect(ParamList& list, const std::string& prefix) {
  add_param(list, prefix + ".w_input", w_input);
  add_param(list, prefix + ".w_hidden", w_hidden);
  add_param(list, prefix + ".bias", bias);
}

void lstm_step(const LstmLayer& layer, const Matrix& input, LstmState& state) {
  const Index h = layer.hidden_size();
  Matrix z = layer.w_input * input;
  z.noalias() += layer.w_hidden * state.hidden;
  z.colwise() += layer.bias;
  const Eigen::ArrayXXd in_gate = sigmoid(z.topRows(h).array());
  const Eigen::ArrayXXd forget = sigmoid(z.middleRows(h, h).array());
  const Eigen::ArrayXXd cand = z.middleRows(2 * h, h).array().tanh();
  const Eigen::ArrayXXd out_gate = sigmoid(z.bottomRows(h).array());
  state.cell = (forget * state.cell.array() + in_gate * cand).matrix();
  state.hidden = (out_gate * state.cell.array().tanh()).matrix();
}

LstmTrace lstm_forward(const LstmLayer& layer, std::vector<Matrix> inputs) {
  const Index h = layer.hidden_size();
  LstmTrace trace;
  const std::size_t steps = inputs.size();
  if (steps == 0) return trace;
  const Index batch = inputs.front().cols();
  trace.gates.reserve(steps);
  trace.cells.reserve(steps);
  trace.hidden.reserve(steps);

  Matrix cell = Matrix::Zero(h, batch);
  Matrix hidden = Matrix::Zero(h, batch);
  Matrix z(4 * h, batch);
  for (std::size_t t = 0; t < steps; ++t) {
    if (inputs[t].rows() != layer.input_size()) {
      throw Error(ErrorCode::shape_mismatch, "lstm: input width " +
                                                 std::to_string(inputs[t].rows()) +
                                                 " != " + std::to_string(layer.input_size()));
    }
    z.noalias() = layer.w_input * inputs[t];
    z.noalias() += layer.w_hidden * hidden;
    z.colwise() += layer.bias;
    z.topRows(2 * h) = sigmoid(z.topRows(2 * h).array()).matrix();
    z.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
    z.bottomRows(h) = sigmoid(z.bottomRows(h).array()).matrix();

    cell = z.middleRows(h, h).cwiseProduct(cell) + z.topRows(h).cwiseProduct(z.middleRows(2 * h, h));
    hidden = z.bottomRows(h).cwiseProduct(cell.array().tanh().matrix());
    trace.gates.push_back(z);
    trace.cells.push_back(cell);
    trace.hidden.push_back(hidden);
  }
  trace.inputs = std::move(inputs);
  return trace;
}

std::vector<Matrix> lstm_backward(const LstmLayer& layer, const LstmTrace& trace,
                                  const std::vector<Matrix>& d_hidden, LstmLayer& grad) {
  const Index h = layer.hidden_size();
  const std::size_t steps = trace.hidden.size();
  std::vector<Matrix> d_inputs(steps);
  if (steps == 0) return d_inputs;
  const Index batch = trace.hidden.front().cols();

  Matrix dh_next = Matrix::Zero(h, batch);
  Matrix dc_next = Matrix::Zero(h, batch);
  Matrix dz(4 * h, batch);
  for (std::size_t step = steps; step-- > 0;) {
    const Matrix& g = trace.gates[step];
    const auto in_gate = g.topRows(h).array();
    const auto forget = g.middleRows(h, h).array();
    const auto cand = g.middleRows(2 * h, h).array();
    const auto out_gate = g.bottomRows(h).array();
    const Eigen::ArrayXXd tanh_c = trace.cells[step].array().tanh();
    const Matrix zero_state = Matrix::Zero(h, batch);
    const Matrix& c_prev = step > 0 ? trace.cells[step - 1] : zero_state;
    const Matrix& h_prev = step > 0 ? trace.hidden[step - 1] : zero_state;

    Eigen::ArrayXXd dh = dh_next.array();
    if (step < d_hidden.size() && d_hidden[step].size() > 0) dh += d_hidden[step].array();

    const Eigen::ArrayXXd dc = dh * out_gate * (1.0 - tanh_c.square()) + dc_next.array();
    dz.topRows(h) = (dc * cand * in_gate * (1.0 - in_gate)).matrix();
    dz.middleRows(h, h) = (dc * c_prev.array() * forget * (1.0 - forget)).matrix();
    dz.middleRows(2 * h, h) = (dc * in_gate * (1.0 - cand.square())).matrix();
    dz.bottomRows(h) = (dh * tanh_c * out_gate * (1.0 - out_gate)).matrix();
    dc_next = (dc * forget).matrix();

    grad.w_input.noalias() += dz * trace.inputs[step].transpose();
    grad.w_hidden.noalias() += dz * h_prev.transpose();
    grad.bias += dz.rowwise().sum();
    d_inputs[step].noalias() = layer.w_input.transpose() * dz;
    dh_next.noalias() = layer.w_hidden.transpose() * dz;
  }
  return d_inputs;
}

// ---------------------------------------------------------------------------
// GRU

GruLayer GruLayer::zeros(Index input, Index hidden) {
  return GruLayer{Matrix::Zero(3 * hidden, input), Matrix::Zero(3 * hidden, hidden),
                  Vector::Zero(3 * hidden), Vector::Zero(hidden)};
}

void GruLayer::collect(ParamList& list, const std::string& prefix) {
  add_param(list, prefix + ".w_input", w_input);
  add_param(list, prefix + ".w_hidden", w_hidden);
  add_param(list, prefix + ".bias", bias);
  add_param(list, prefix + ".bias_hidden", bias_hidden);
}

GruStep gru_forward(const GruLayer& layer, const Vector& input, const Vector& h_prev) {
  const Index h = layer.hidden_size();
  GruStep s;
  s.input = input;
  s.h_prev = h_prev;
  Vector x_part = layer.w_input * input + layer.bias;
  Vector h_part = layer.w_hidden * h_prev;
  s.update = sigmoid((x_part.head(h) + h_part.head(h)).array()).matrix();
  s.reset = sigmoid((x_part.segment(h, h) + h_part.segment(h, h)).array()).matrix();
  s.hidden_proj = h_part.tail(h) + layer.bias_hidden;
  s.candidate =
      (x_part.tail(h) + s.reset.cwiseProduct(s.hidden_proj)).array().tanh().matrix();
  s.h = (1.0 - s.update.array()) * s.candidate.array() + s.update.array() * h_prev.array();
  return s;
}

Vector gru_backward(const GruLayer& layer, const GruStep& s, Vector& d_h, GruLayer& grad) {
  const Index h = layer.hidden_size();
  const Eigen::ArrayXd z = s.update.array();
  const Eigen::ArrayXd r = s.reset.array();
  const Eigen::ArrayXd n = s.candidate.array();

  const Eigen::ArrayXd dn_pre = d_h.array() * (1.0 - z) * (1.0 - n.square());
  const Eigen::ArrayXd dz_pre = d_h.array() * (s.h_prev.array() - n) * z * (1.0 - z);
  const Eigen::ArrayXd dr_pre = dn_pre * s.hidden_proj.array() * r * (1.0 - r);
  const Eigen::ArrayXd d_hproj = dn_pre * r;

  Vector d_x_part(3 * h);
  d_x_part << dz_pre.matrix(), dr_pre.matrix(), dn_pre.matrix();
  Vector d_h_part(3 * h);
  d_h_part << dz_pre.matrix(), dr_pre.matrix(), d_hproj.matrix();

  grad.w_input.noalias() += d_x_part * s.input.transpose();
  grad.bias += d_x_part;
  grad.w_hidden.noalias() += d_h_part * s.h_prev.transpose();
  grad.bias_hidden += d_hproj.matrix();

  Vector d_prev = (d_h.array() * z).matrix();
  d_prev.noalias() += layer.w_hidden.transpose() * d_h_part;
  d_h = std::move(d_prev);
  return layer.w_input.transpose() * d_x_part;
}

}  // namespace vclone
