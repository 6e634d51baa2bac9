#ifndef SEQLAB_MODELS_FAMILIES_HPP
#define SEQLAB_MODELS_FAMILIES_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "seqlab/models/mlp.hpp"
#include "seqlab/num/matrix.hpp"
#include "seqlab/num/rng.hpp"
#include "seqlab/num/tape.hpp"

namespace seqlab::models {

enum class Family : std::uint8_t { kDeepSet, kTransformer, kSsm, kRnn };

enum class CapacityClass : std::uint8_t {
  kStructuredPerceptron,  // output head is one affine layer + sigmoid
  kStructuredDiffeo,      // output head square, invertible-style MLP
  kHighCapacity,          // no structural constraint
};

const char* family_name(Family f);
const char* capacity_name(CapacityClass c);
Family family_from_name(const std::string& name);
CapacityClass capacity_from_name(const std::string& name);

// An output/embedding map. Identity/exp/log variants carry no parameters and
// exist for closed-form teachers and the quantized theory models.
enum class HeadKind : std::uint8_t { kMlp, kIdentity, kExp, kLog };

struct Head {
  HeadKind kind = HeadKind::kMlp;
  MlpParams mlp;

  static Head identity() { return Head{HeadKind::kIdentity, {}}; }
  static Head elementwise_exp() { return Head{HeadKind::kExp, {}}; }
  static Head elementwise_log() { return Head{HeadKind::kLog, {}}; }
  static Head of(MlpParams params) { return Head{HeadKind::kMlp, std::move(params)}; }
};

Matrix head_eval(const Head& head, const Matrix& x);

struct HeadVars {
  MlpVars mlp;
};

HeadVars head_register(Tape& tape, const Head& head);
ValueId head_forward(Tape& tape, const HeadVars& vars, const Head& head, ValueId x);
void head_collect(Head& head, std::vector<Matrix*>& out);
void head_param_ids(const HeadVars& vars, std::vector<ValueId>& out);

// h(x_1..x_i) = omega(sum_{j<=i} psi(x_j)); the trace is the prefix sum.
struct DeepSet {
  std::size_t n = 0, m = 0;
  CapacityClass capacity = CapacityClass::kStructuredDiffeo;
  Head psi;
  Head omega;
  std::size_t trace_dim = 0;
};

enum class AttentionKind : std::uint8_t { kSigmoid, kRelu, kLinear, kSoftmax };
enum class AttentionNorm : std::uint8_t { kMeanOverI, kMeanOverIMinus1 };

const char* attention_name(AttentionKind k);
AttentionKind attention_from_name(const std::string& name);

struct AttentionMaps {
  Matrix wq, wk, wv;  // each k x n
};

// Single-block causal transformer: the pair kernel is
// act(q_i.k_j / sqrt(d)) v_j, aggregated as a mean over the context, then fed
// to omega. The trace is the pre-omega aggregate. The relative-position
// variant keys the kernel on i-j and is identically zero at distances >= t_max.
struct Transformer {
  std::size_t n = 0, m = 0, k = 0;
  CapacityClass capacity = CapacityClass::kStructuredDiffeo;
  AttentionKind attention = AttentionKind::kSigmoid;
  AttentionNorm norm = AttentionNorm::kMeanOverI;
  std::vector<AttentionMaps> heads;  // one entry per attention head
  Matrix mix;                        // (heads*k) x k mixing map; empty when heads == 1
  Head omega;
  bool positional = false;
  std::size_t t_max = 0;
  std::vector<AttentionMaps> position_kernels;  // one per distance 0..t_max-1
  std::size_t trace_dim = 0;
};

// Linear recurrence h_t = Lambda h_{t-1} + B x_t, label omega(h_t).
struct Ssm {
  std::size_t n = 0, m = 0, k = 0;
  CapacityClass capacity = CapacityClass::kStructuredDiffeo;
  Matrix lambda;  // k x k
  Matrix b_in;    // k x n
  Head omega;
};

// Nonlinear recurrence h_t = sigmoid(Lambda h_{t-1} + B x_t); the structured
// readout is sigmoid(A h_t), i.e. a perceptron head.
struct Rnn {
  std::size_t n = 0, m = 0, k = 0;
  CapacityClass capacity = CapacityClass::kStructuredPerceptron;
  Matrix lambda;  // k x k
  Matrix b_in;    // k x n
  Head omega;
};

using CoreModel = std::variant<DeepSet, Transformer, Ssm, Rnn>;

// Equal to the base model on prefixes up to t0 tokens and base + offset
// beyond; realizes the ERM solutions that cannot length-generalize.
struct DegenerateTeacher {
  CoreModel base;
  Matrix offset;  // 1 x m
  std::size_t t0 = 0;
};

using Teacher = std::variant<CoreModel, DegenerateTeacher>;

DegenerateTeacher make_degenerate(CoreModel base, double offset, std::size_t t0);
DegenerateTeacher make_degenerate(CoreModel base, Matrix offset, std::size_t t0);

Family family_of(const CoreModel& model);
Family base_family(const Teacher& teacher);
std::size_t token_dim(const CoreModel& model);
std::size_t label_dim(const CoreModel& model);
std::size_t trace_dim(const CoreModel& model);
std::size_t token_dim(const Teacher& teacher);
std::size_t label_dim(const Teacher& teacher);
std::size_t trace_dim(const Teacher& teacher);
// The underlying family model; for a degenerate teacher, its base.
CoreModel& core_of(Teacher& teacher);
const CoreModel& core_of(const Teacher& teacher);
bool is_degenerate(const Teacher& teacher);

// Labels and hidden traces at every prefix length. tokens[t] is the
// (batch x n) slab of position t+1; outputs index the same way.
struct ForwardResult {
  std::vector<Matrix> labels;
  std::vector<Matrix> traces;
};

ForwardResult forward(const CoreModel& model, std::span<const Matrix> tokens);
ForwardResult forward(const Teacher& teacher, std::span<const Matrix> tokens);

// Tape-side forward for training; parameter registration order matches
// collect_params so optimizer state lines up with tape gradients.
struct ModelVars {
  std::vector<ValueId> params;
  HeadVars psi, omega;
  std::vector<ValueId> matrices;  // family-specific raw matrices, in field order
};

ModelVars register_params(Tape& tape, const CoreModel& model);

struct TapeForward {
  std::vector<ValueId> labels;
  std::vector<ValueId> traces;
};

TapeForward forward_on_tape(Tape& tape, const ModelVars& vars, const CoreModel& model,
                            std::span<const Matrix> tokens);

void collect_params(CoreModel& model, std::vector<Matrix*>& out);

// Architecture-family sampling spec; defaults mirror the reference training
// setup (two-hidden-layer sigmoid MLP heads, orthogonal recurrences).
struct ModelSpec {
  Family family = Family::kDeepSet;
  std::size_t n = 0, m = 0, k = 0;
  CapacityClass capacity = CapacityClass::kStructuredDiffeo;
  std::size_t mlp_hidden_layers = 2;
  Activation output_act = Activation::kSigmoid;
  AttentionKind attention = AttentionKind::kSigmoid;
  AttentionNorm norm = AttentionNorm::kMeanOverI;
  std::size_t attention_heads = 1;
  bool positional = false;
  std::size_t t_max = 0;
  double init_mean = 0.0;
  double init_stddev = 0.6;
};

CoreModel sample_model(const ModelSpec& spec, std::uint64_t seed);
CoreModel sample_model(const ModelSpec& spec, RngStream& rng);

// Condition number estimate from the extreme singular values; used to vet
// structured recurrences at construction.
double condition_number(const Matrix& a);

void validate_structured(const CoreModel& model);

}  // namespace seqlab::models

#endif  // SEQLAB_MODELS_FAMILIES_HPP
