#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tfcast/nn.hpp"

namespace tfcast {

enum class ModelKind { lstm, baseline, rnn };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Shape of a forecasting network. All variants end in a single-unit linear
/// dense head producing one prediction per batch column.
struct Topology {
  ModelKind kind = ModelKind::lstm;
  std::size_t input_size = 1;
  /// Steps per sample; the dense baseline flattens this many steps.
  std::size_t window_len = 12;
  /// Recurrent hidden sizes (lstm, rnn) or hidden dense widths (baseline).
  std::vector<std::size_t> hidden_sizes{32, 32};
  /// Between stacked recurrent layers, or after each hidden dense layer.
  double dropout = 0.0;
  /// Activation of the baseline's hidden dense layers.
  Activation hidden_activation = Activation::relu;

  friend bool operator==(const Topology&, const Topology&) = default;
};

class Model {
 public:
  virtual ~Model() = default;

  /// Runs the network and records the tape needed by backward().
  /// Returns a (1 x batch) prediction.
  virtual Matrix forward(const Sequence& xs, Mode mode, Rng& rng) = 0;
  /// Inference without touching any mutable state.
  virtual Matrix predict(const Sequence& xs) const = 0;
  /// Backpropagates dL/dprediction through the recorded tape, accumulating
  /// into every Parameter::grad, then clears the tape.
  virtual void backward(const Matrix& dprediction) = 0;
  virtual bool has_tape() const = 0;
  virtual void clear_tape() = 0;

  virtual std::vector<Parameter*> parameters() = 0;
  std::vector<const Parameter*> parameters() const;
  const Topology& topology() const { return topology_; }

  void zero_grad();
  std::size_t parameter_count() const;

 protected:
  explicit Model(Topology topology) : topology_(std::move(topology)) {}

  Topology topology_;
};

/// Stack of recurrent layers whose final-step top hidden state feeds the
/// dense head. Dropout sits between recurrent layers only, never on the
/// recurrent path.
template <typename Layer>
class RecurrentRegressor final : public Model {
 public:
  RecurrentRegressor(Topology topology, Rng& init_rng);

  Matrix forward(const Sequence& xs, Mode mode, Rng& rng) override;
  Matrix predict(const Sequence& xs) const override;
  void backward(const Matrix& dprediction) override;
  bool has_tape() const override { return tape_.has_value(); }
  void clear_tape() override { tape_.reset(); }
  std::vector<Parameter*> parameters() override;

  std::vector<Layer>& layers() { return layers_; }
  DenseLayer& head() { return head_; }

 private:
  struct Tape {
    std::vector<typename Layer::Tape> layers;
    std::vector<Sequence> masks;  // masks[l] applied to the output of layer l
    DenseTape head;
  };

  Matrix run(const Sequence& xs, Mode mode, Rng* rng, Tape* tape) const;

  std::vector<Layer> layers_;
  DenseLayer head_;
  std::optional<Tape> tape_;
};

using StackedLstm = RecurrentRegressor<LstmLayer>;
using StackedRnn = RecurrentRegressor<RnnLayer>;

/// Feed-forward baseline: the window is flattened time-major into one
/// vector, passed through hidden dense layers (ReLU by default) and the
/// linear head.
class DenseBaseline final : public Model {
 public:
  DenseBaseline(Topology topology, Rng& init_rng);

  Matrix forward(const Sequence& xs, Mode mode, Rng& rng) override;
  Matrix predict(const Sequence& xs) const override;
  void backward(const Matrix& dprediction) override;
  bool has_tape() const override { return tape_.has_value(); }
  void clear_tape() override { tape_.reset(); }
  std::vector<Parameter*> parameters() override;

 private:
  struct Tape {
    std::vector<DenseTape> hidden;
    std::vector<Matrix> masks;
    DenseTape head;
  };

  Matrix run(const Sequence& xs, Mode mode, Rng* rng, Tape* tape) const;

  std::vector<DenseLayer> hidden_;
  DenseLayer head_;
  std::optional<Tape> tape_;
};

std::unique_ptr<Model> make_model(const Topology& topology, Rng& init_rng);

/// Copies of every parameter value, in parameters() order.
std::vector<Matrix> snapshot_values(const Model& model);
void restore_values(Model& model, const std::vector<Matrix>& values);

double mse_loss(const Matrix& prediction, const Matrix& target);
/// dL/dprediction of mse_loss.
Matrix mse_gradient(const Matrix& prediction, const Matrix& target);

/// Backpropagation through time for the sequence whose forward pass is on
/// the model's tape: returns the MSE loss and leaves full-sequence gradients
/// in every Parameter::grad. Throws StateError when no forward pass is recorded.
double bptt(Model& model, const Matrix& prediction, const Matrix& target);

}  // namespace tfcast
