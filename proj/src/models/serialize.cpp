#include "seqlab/models/serialize.hpp"

#include <fstream>

namespace seqlab::models {

namespace {

constexpr int kFormatVersion = 1;

json matrix_to_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.values().begin(), m.values().end());
  return j;
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
    case Activation::kNone: return "none";
  }
  return "?";
}

Activation activation_from_name(const std::string& s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "relu") return Activation::kRelu;
  if (s == "none") return Activation::kNone;
  throw std::invalid_argument("unknown activation: " + s);
}

json mlp_to_json(const MlpParams& mlp) {
  json j;
  j["in"] = mlp.spec.in_dim;
  j["out"] = mlp.spec.out_dim;
  j["hidden"] = mlp.spec.hidden;
  j["hidden_act"] = activation_name(mlp.spec.hidden_act);
  j["output_act"] = activation_name(mlp.spec.output_act);
  j["bias"] = mlp.spec.bias;
  j["weights"] = json::array();
  j["biases"] = json::array();
  for (const Matrix& w : mlp.weights) j["weights"].push_back(matrix_to_json(w));
  for (const Matrix& b : mlp.biases) j["biases"].push_back(matrix_to_json(b));
  return j;
}

MlpParams mlp_from_json(const json& j) {
  MlpParams mlp;
  mlp.spec.in_dim = j.at("in").get<std::size_t>();
  mlp.spec.out_dim = j.at("out").get<std::size_t>();
  mlp.spec.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  mlp.spec.hidden_act = activation_from_name(j.at("hidden_act").get<std::string>());
  mlp.spec.output_act = activation_from_name(j.at("output_act").get<std::string>());
  mlp.spec.bias = j.value("bias", true);
  for (const json& w : j.at("weights")) mlp.weights.push_back(matrix_from_json(w));
  for (const json& b : j.at("biases")) mlp.biases.push_back(matrix_from_json(b));
  return mlp;
}

json head_to_json(const Head& head) {
  json j;
  switch (head.kind) {
    case HeadKind::kIdentity: j["kind"] = "identity"; break;
    case HeadKind::kExp: j["kind"] = "exp"; break;
    case HeadKind::kLog: j["kind"] = "log"; break;
    case HeadKind::kMlp:
      j["kind"] = "mlp";
      j["mlp"] = mlp_to_json(head.mlp);
      break;
  }
  return j;
}

Head head_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") return Head::identity();
  if (kind == "exp") return Head::elementwise_exp();
  if (kind == "log") return Head::elementwise_log();
  if (kind == "mlp") return Head::of(mlp_from_json(j.at("mlp")));
  throw std::invalid_argument("unknown head kind: " + kind);
}

json attention_maps_to_json(const AttentionMaps& maps) {
  json j;
  j["wq"] = matrix_to_json(maps.wq);
  j["wk"] = matrix_to_json(maps.wk);
  j["wv"] = matrix_to_json(maps.wv);
  return j;
}

AttentionMaps attention_maps_from_json(const json& j) {
  return AttentionMaps{matrix_from_json(j.at("wq")), matrix_from_json(j.at("wk")),
                       matrix_from_json(j.at("wv"))};
}

}  // namespace

json model_to_json(const CoreModel& model) {
  json j;
  j["format_version"] = kFormatVersion;
  j["family"] = family_name(family_of(model));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        j["n"] = m.n;
        j["m"] = m.m;
        j["capacity"] = capacity_name(m.capacity);
        if constexpr (std::is_same_v<T, DeepSet>) {
          j["trace_dim"] = m.trace_dim;
          j["psi"] = head_to_json(m.psi);
          j["omega"] = head_to_json(m.omega);
        } else if constexpr (std::is_same_v<T, Transformer>) {
          j["k"] = m.k;
          j["trace_dim"] = m.trace_dim;
          j["attention"] = attention_name(m.attention);
          j["norm"] = m.norm == AttentionNorm::kMeanOverI ? "mean_over_i" : "mean_over_i_minus_1";
          j["heads"] = json::array();
          for (const AttentionMaps& h : m.heads) j["heads"].push_back(attention_maps_to_json(h));
          if (!m.mix.empty()) j["mix"] = matrix_to_json(m.mix);
          j["positional"] = m.positional;
          j["t_max"] = m.t_max;
          j["position_kernels"] = json::array();
          for (const AttentionMaps& h : m.position_kernels)
            j["position_kernels"].push_back(attention_maps_to_json(h));
          j["omega"] = head_to_json(m.omega);
        } else {
          j["k"] = m.k;
          j["lambda"] = matrix_to_json(m.lambda);
          j["b_in"] = matrix_to_json(m.b_in);
          j["omega"] = head_to_json(m.omega);
        }
      },
      model);
  return j;
}

CoreModel model_from_json(const json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kFormatVersion) {
    throw std::invalid_argument("unsupported model format version " + std::to_string(version));
  }
  const Family family = family_from_name(j.at("family").get<std::string>());
  const CapacityClass capacity = capacity_from_name(j.at("capacity").get<std::string>());
  switch (family) {
    case Family::kDeepSet: {
      DeepSet m;
      m.n = j.at("n").get<std::size_t>();
      m.m = j.at("m").get<std::size_t>();
      m.capacity = capacity;
      m.trace_dim = j.at("trace_dim").get<std::size_t>();
      m.psi = head_from_json(j.at("psi"));
      m.omega = head_from_json(j.at("omega"));
      return m;
    }
    case Family::kTransformer: {
      Transformer m;
      m.n = j.at("n").get<std::size_t>();
      m.m = j.at("m").get<std::size_t>();
      m.k = j.at("k").get<std::size_t>();
      m.capacity = capacity;
      m.trace_dim = j.at("trace_dim").get<std::size_t>();
      m.attention = attention_from_name(j.at("attention").get<std::string>());
      m.norm = j.at("norm").get<std::string>() == "mean_over_i"
                   ? AttentionNorm::kMeanOverI
                   : AttentionNorm::kMeanOverIMinus1;
      for (const json& h : j.at("heads")) m.heads.push_back(attention_maps_from_json(h));
      if (j.contains("mix")) m.mix = matrix_from_json(j.at("mix"));
      m.positional = j.at("positional").get<bool>();
      m.t_max = j.at("t_max").get<std::size_t>();
      for (const json& h : j.at("position_kernels"))
        m.position_kernels.push_back(attention_maps_from_json(h));
      m.omega = head_from_json(j.at("omega"));
      return m;
    }
    case Family::kSsm: {
      Ssm m;
      m.n = j.at("n").get<std::size_t>();
      m.m = j.at("m").get<std::size_t>();
      m.k = j.at("k").get<std::size_t>();
      m.capacity = capacity;
      m.lambda = matrix_from_json(j.at("lambda"));
      m.b_in = matrix_from_json(j.at("b_in"));
      m.omega = head_from_json(j.at("omega"));
      return m;
    }
    case Family::kRnn: {
      Rnn m;
      m.n = j.at("n").get<std::size_t>();
      m.m = j.at("m").get<std::size_t>();
      m.k = j.at("k").get<std::size_t>();
      m.capacity = capacity;
      m.lambda = matrix_from_json(j.at("lambda"));
      m.b_in = matrix_from_json(j.at("b_in"));
      m.omega = head_from_json(j.at("omega"));
      return m;
    }
  }
  throw std::invalid_argument("unreachable family");
}

json teacher_to_json(const Teacher& teacher) {
  if (const auto* d = std::get_if<DegenerateTeacher>(&teacher)) {
    json j;
    j["degenerate"] = true;
    j["base"] = model_to_json(d->base);
    j["offset"] = matrix_to_json(d->offset);
    j["t0"] = d->t0;
    return j;
  }
  json j = model_to_json(std::get<CoreModel>(teacher));
  j["degenerate"] = false;
  return j;
}

Teacher teacher_from_json(const json& j) {
  if (j.value("degenerate", false)) {
    return DegenerateTeacher{model_from_json(j.at("base")), matrix_from_json(j.at("offset")),
                             j.at("t0").get<std::size_t>()};
  }
  return Teacher{model_from_json(j)};
}

void save_model(const std::string& path, const Teacher& teacher) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out << teacher_to_json(teacher).dump(2) << "\n";
}

Teacher load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  json j;
  in >> j;
  return teacher_from_json(j);
}

}  // namespace seqlab::models
