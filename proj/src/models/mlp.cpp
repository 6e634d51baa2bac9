#include "seqlab/models/mlp.hpp"

namespace seqlab::models {

namespace {

Matrix apply_activation(Activation act, const Matrix& x) {
  switch (act) {
    case Activation::kSigmoid: return num::sigmoid(x);
    case Activation::kRelu: return num::relu(x);
    case Activation::kNone: return x;
  }
  return x;
}

ValueId apply_activation(Tape& tape, Activation act, ValueId x) {
  switch (act) {
    case Activation::kSigmoid: return tape.sigmoid(x);
    case Activation::kRelu: return tape.relu(x);
    case Activation::kNone: return x;
  }
  return x;
}

std::vector<std::size_t> layer_dims(const MlpSpec& spec) {
  std::vector<std::size_t> dims;
  dims.push_back(spec.in_dim);
  for (std::size_t h : spec.hidden) dims.push_back(h);
  dims.push_back(spec.out_dim);
  return dims;
}

}  // namespace

MlpParams sample_mlp(const MlpSpec& spec, RngStream& rng, double init_mean,
                     double init_stddev) {
  MlpParams mlp{spec, {}, {}};
  const auto dims = layer_dims(spec);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    mlp.weights.push_back(rng.normal_matrix(dims[l], dims[l + 1], init_mean, init_stddev));
    if (spec.bias) mlp.biases.push_back(rng.normal_matrix(1, dims[l + 1], init_mean, init_stddev));
  }
  return mlp;
}

MlpParams zero_mlp(const MlpSpec& spec) {
  MlpParams mlp{spec, {}, {}};
  const auto dims = layer_dims(spec);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    mlp.weights.emplace_back(dims[l], dims[l + 1]);
    if (spec.bias) mlp.biases.emplace_back(1, dims[l + 1]);
  }
  return mlp;
}

Matrix mlp_eval(const MlpParams& mlp, const Matrix& x) {
  Matrix h = x;
  const std::size_t layers = mlp.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = num::matmul(h, mlp.weights[l]);
    if (mlp.spec.bias) h = num::add_row_vector(h, mlp.biases[l]);
    h = apply_activation(l + 1 < layers ? mlp.spec.hidden_act : mlp.spec.output_act, h);
  }
  return h;
}

MlpVars mlp_register(Tape& tape, const MlpParams& mlp) {
  MlpVars vars;
  for (const Matrix& w : mlp.weights) vars.weights.push_back(tape.param(w));
  for (const Matrix& b : mlp.biases) vars.biases.push_back(tape.param(b));
  return vars;
}

ValueId mlp_forward(Tape& tape, const MlpVars& vars, const MlpSpec& spec, ValueId x) {
  ValueId h = x;
  const std::size_t layers = vars.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = tape.matmul(h, vars.weights[l]);
    if (spec.bias) h = tape.add_row_vector(h, vars.biases[l]);
    h = apply_activation(tape, l + 1 < layers ? spec.hidden_act : spec.output_act, h);
  }
  return h;
}

void mlp_collect(MlpParams& mlp, std::vector<Matrix*>& out) {
  for (Matrix& w : mlp.weights) out.push_back(&w);
  for (Matrix& b : mlp.biases) out.push_back(&b);
}

void mlp_param_ids(const MlpVars& vars, std::vector<ValueId>& out) {
  for (ValueId id : vars.weights) out.push_back(id);
  for (ValueId id : vars.biases) out.push_back(id);
}

std::size_t mlp_param_count(const MlpSpec& spec) {
  std::size_t count = 0;
  const auto dims = layer_dims(spec);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    count += dims[l] * dims[l + 1] + (spec.bias ? dims[l + 1] : 0);
  }
  return count;
}

}  // namespace seqlab::models
