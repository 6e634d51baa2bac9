#ifndef SEQLAB_MODELS_MLP_HPP
#define SEQLAB_MODELS_MLP_HPP

#include <cstdint>
#include <vector>

#include "seqlab/num/matrix.hpp"
#include "seqlab/num/rng.hpp"
#include "seqlab/num/tape.hpp"

namespace seqlab::models {

using num::Matrix;
using num::RngStream;
using num::Tape;
using num::ValueId;

enum class Activation : std::uint8_t { kSigmoid, kRelu, kNone };

struct MlpSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<std::size_t> hidden;
  Activation hidden_act = Activation::kSigmoid;
  Activation output_act = Activation::kSigmoid;
  bool bias = true;

  // Single affine layer + output activation.
  static MlpSpec perceptron(std::size_t in, std::size_t out,
                            Activation act = Activation::kSigmoid, bool bias = true) {
    return MlpSpec{in, out, {}, Activation::kSigmoid, act, bias};
  }
  static MlpSpec with_hidden(std::size_t in, std::size_t out, std::size_t layers,
                             std::size_t width, Activation out_act = Activation::kSigmoid) {
    MlpSpec s{in, out, std::vector<std::size_t>(layers, width), Activation::kSigmoid, out_act,
              true};
    return s;
  }
  std::size_t layer_count() const { return hidden.size() + 1; }
};

// Weights are stored (fan_in x fan_out) so a batch (rows x fan_in) maps by
// right-multiplication; biases are 1 x fan_out row vectors.
struct MlpParams {
  MlpSpec spec;
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
};

MlpParams sample_mlp(const MlpSpec& spec, RngStream& rng, double init_mean = 0.0,
                     double init_stddev = 0.6);
MlpParams zero_mlp(const MlpSpec& spec);

Matrix mlp_eval(const MlpParams& mlp, const Matrix& x);

struct MlpVars {
  std::vector<ValueId> weights;
  std::vector<ValueId> biases;
};

MlpVars mlp_register(Tape& tape, const MlpParams& mlp);
ValueId mlp_forward(Tape& tape, const MlpVars& vars, const MlpSpec& spec, ValueId x);

void mlp_collect(MlpParams& mlp, std::vector<Matrix*>& out);
void mlp_param_ids(const MlpVars& vars, std::vector<ValueId>& out);

std::size_t mlp_param_count(const MlpSpec& spec);

}  // namespace seqlab::models

#endif  // SEQLAB_MODELS_MLP_HPP
