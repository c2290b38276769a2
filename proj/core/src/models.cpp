#include "tfcast/models.hpp"

#include <cmath>

#include "tfcast/errors.hpp"

namespace tfcast {
namespace {

void check_topology(const Topology& t) {
  if (t.input_size == 0) throw UsageError("topology: input size must be at least 1");
  if (t.window_len == 0) throw UsageError("topology: window length must be at least 1");
  if (t.hidden_sizes.empty()) throw UsageError("topology: at least one hidden layer required");
  for (std::size_t h : t.hidden_sizes)
    if (h == 0) throw UsageError("topology: hidden sizes must be at least 1");
  if (!(t.dropout >= 0.0 && t.dropout < 1.0))
    throw UsageError("topology: dropout must lie in [0, 1)");
}

template <typename Layer>
const char* layer_prefix();
template <>
const char* layer_prefix<LstmLayer>() { return "lstm"; }
template <>
const char* layer_prefix<RnnLayer>() { return "rnn"; }

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::lstm: return "lstm";
    case ModelKind::baseline: return "baseline";
    case ModelKind::rnn: return "rnn";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "lstm") return ModelKind::lstm;
  if (text == "baseline") return ModelKind::baseline;
  if (text == "rnn") return ModelKind::rnn;
  throw UsageError("unknown model kind '" + text + "' (expected lstm, baseline or rnn)");
}

std::vector<const Parameter*> Model::parameters() const {
  auto mutable_params = const_cast<Model*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

void Model::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

// ---------------------------------------------------------------------------

template <typename Layer>
RecurrentRegressor<Layer>::RecurrentRegressor(Topology topology, Rng& init_rng)
    : Model((check_topology(topology), std::move(topology))),
      head_("head", topology_.hidden_sizes.back(), 1, Activation::linear, init_rng) {
  std::size_t in = topology_.input_size;
  layers_.reserve(topology_.hidden_sizes.size());
  for (std::size_t l = 0; l < topology_.hidden_sizes.size(); ++l) {
    const std::size_t hidden = topology_.hidden_sizes[l];
    layers_.emplace_back(layer_prefix<Layer>() + std::to_string(l), in, hidden, init_rng);
    in = hidden;
  }
}

template <typename Layer>
Matrix RecurrentRegressor<Layer>::run(const Sequence& xs, Mode mode, Rng* rng,
                                      Tape* tape) const {
  if (xs.empty()) throw UsageError("forward: empty input sequence");
  const bool drop = mode == Mode::train && topology_.dropout > 0.0;
  if (tape) {
    tape->layers.assign(layers_.size(), {});
    tape->masks.assign(layers_.size(), {});
  }
  Sequence seq = xs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    seq = layers_[l].forward(seq, tape ? &tape->layers[l] : nullptr);
    if (drop && l + 1 < layers_.size()) {
      for (auto& h : seq) {
        DropoutResult d = dropout_forward(h, topology_.dropout, mode, *rng);
        h = std::move(d.output);
        if (tape) tape->masks[l].push_back(std::move(d.mask));
      }
    }
  }
  return head_.forward(seq.back(), tape ? &tape->head : nullptr);
}

template <typename Layer>
Matrix RecurrentRegressor<Layer>::forward(const Sequence& xs, Mode mode, Rng& rng) {
  Tape tape;
  Matrix out = run(xs, mode, &rng, &tape);
  tape_ = std::move(tape);
  return out;
}

template <typename Layer>
Matrix RecurrentRegressor<Layer>::predict(const Sequence& xs) const {
  return run(xs, Mode::infer, nullptr, nullptr);
}

template <typename Layer>
void RecurrentRegressor<Layer>::backward(const Matrix& dprediction) {
  if (!tape_) throw StateError("backward called without a recorded forward pass");
  Tape& tape = *tape_;
  const Matrix dtop = head_.backward(tape.head, dprediction);
  const std::size_t steps = tape.layers.back().size();

  Sequence dseq(steps, Matrix(dtop.rows(), dtop.cols()));
  dseq.back() = dtop;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (!tape.masks[l].empty()) {
      for (std::size_t t = 0; t < steps; ++t) dseq[t] = hadamard(dseq[t], tape.masks[l][t]);
    }
    dseq = layers_[l].backward(tape.layers[l], dseq);
  }
  tape_.reset();
}

template <typename Layer>
std::vector<Parameter*> RecurrentRegressor<Layer>::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_)
    for (Parameter* p : layer.parameters()) out.push_back(p);
  out.push_back(&head_.weight());
  out.push_back(&head_.bias());
  return out;
}

template class RecurrentRegressor<LstmLayer>;
template class RecurrentRegressor<RnnLayer>;

// ---------------------------------------------------------------------------

DenseBaseline::DenseBaseline(Topology topology, Rng& init_rng)
    : Model((check_topology(topology), std::move(topology))),
      head_("head", topology_.hidden_sizes.back(), 1, Activation::linear, init_rng) {
  std::size_t in = topology_.input_size * topology_.window_len;
  for (std::size_t l = 0; l < topology_.hidden_sizes.size(); ++l) {
    const std::size_t width = topology_.hidden_sizes[l];
    hidden_.emplace_back("dense" + std::to_string(l), in, width, topology_.hidden_activation,
                         init_rng);
    in = width;
  }
}

Matrix DenseBaseline::run(const Sequence& xs, Mode mode, Rng* rng, Tape* tape) const {
  if (xs.empty()) throw UsageError("forward: empty input sequence");
  if (xs.size() != topology_.window_len) {
    throw DimensionError("baseline: expected " + std::to_string(topology_.window_len) +
                         " steps, got " + std::to_string(xs.size()));
  }
  Matrix x;
  for (const auto& step : xs) x = concat_rows(x, step);

  const bool drop = mode == Mode::train && topology_.dropout > 0.0;
  if (tape) {
    tape->hidden.assign(hidden_.size(), {});
    tape->masks.assign(hidden_.size(), {});
  }
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    x = hidden_[l].forward(x, tape ? &tape->hidden[l] : nullptr);
    if (drop) {
      DropoutResult d = dropout_forward(x, topology_.dropout, mode, *rng);
      x = std::move(d.output);
      if (tape) tape->masks[l] = std::move(d.mask);
    }
  }
  return head_.forward(x, tape ? &tape->head : nullptr);
}

Matrix DenseBaseline::forward(const Sequence& xs, Mode mode, Rng& rng) {
  Tape tape;
  Matrix out = run(xs, mode, &rng, &tape);
  tape_ = std::move(tape);
  return out;
}

Matrix DenseBaseline::predict(const Sequence& xs) const {
  return run(xs, Mode::infer, nullptr, nullptr);
}

void DenseBaseline::backward(const Matrix& dprediction) {
  if (!tape_) throw StateError("backward called without a recorded forward pass");
  Tape& tape = *tape_;
  Matrix d = head_.backward(tape.head, dprediction);
  for (std::size_t l = hidden_.size(); l-- > 0;) {
    if (!tape.masks[l].empty()) d = hadamard(d, tape.masks[l]);
    d = hidden_[l].backward(tape.hidden[l], d);
  }
  tape_.reset();
}

std::vector<Parameter*> DenseBaseline::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : hidden_) {
    out.push_back(&layer.weight());
    out.push_back(&layer.bias());
  }
  out.push_back(&head_.weight());
  out.push_back(&head_.bias());
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Model> make_model(const Topology& topology, Rng& init_rng) {
  switch (topology.kind) {
    case ModelKind::lstm: return std::make_unique<StackedLstm>(topology, init_rng);
    case ModelKind::rnn: return std::make_unique<StackedRnn>(topology, init_rng);
    case ModelKind::baseline: return std::make_unique<DenseBaseline>(topology, init_rng);
  }
  throw UsageError("make_model: unknown model kind");
}

std::vector<Matrix> snapshot_values(const Model& model) {
  std::vector<Matrix> out;
  for (const Parameter* p : model.parameters()) out.push_back(p->value);
  return out;
}

void restore_values(Model& model, const std::vector<Matrix>& values) {
  auto params = model.parameters();
  if (params.size() != values.size()) {
    throw DimensionError("restore: model has " + std::to_string(params.size()) +
                         " parameters, snapshot has " + std::to_string(values.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->value.same_shape(values[k])) {
      throw DimensionError("restore: parameter " + params[k]->name + " is " +
                           params[k]->value.shape_string() + ", snapshot holds " +
                           values[k].shape_string());
    }
    params[k]->value = values[k];
  }
}

double mse_loss(const Matrix& prediction, const Matrix& target) {
  if (!prediction.same_shape(target)) {
    throw DimensionError("mse: prediction " + prediction.shape_string() + " vs target " +
                         target.shape_string());
  }
  if (prediction.empty()) throw UsageError("mse: empty prediction");
  double sum = 0.0;
  for (std::size_t k = 0; k < prediction.size(); ++k) {
    const double r = prediction[k] - target[k];
    sum += r * r;
  }
  return sum / static_cast<double>(prediction.size());
}

Matrix mse_gradient(const Matrix& prediction, const Matrix& target) {
  Matrix d = prediction - target;
  d *= 2.0 / static_cast<double>(prediction.size());
  return d;
}

double bptt(Model& model, const Matrix& prediction, const Matrix& target) {
  if (!model.has_tape()) throw StateError("bptt: no forward pass recorded");
  const double loss = mse_loss(prediction, target);
  model.backward(mse_gradient(prediction, target));
  return loss;
}

}  // namespace tfcast
