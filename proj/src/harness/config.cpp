#include "seqlab/harness/config.hpp"

#include <fstream>

namespace seqlab::harness {

ExperimentConfig preset(const std::string& experiment, const std::string& scale) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.scale = scale;
  if (experiment == "discrete") c.family = "rnn";
  if (experiment == "cot" || experiment == "nonrealizable") c.family = "ssm";
  if (scale == "smoke") {
    c.n = c.m = c.k = 4;
    c.train_t = 4;
    c.eval_lengths = {4, 8};
    c.seeds = 1;
    c.train.lr = 3e-3;
    c.train.epochs = 2;
    c.train.batches_per_epoch = 10;
    c.train.batch_size = 64;
    c.train.val_batches = 2;
    c.risk_samples = 512;
    c.r2_sequences = 128;
    c.horizon = 40;
    c.mc_samples = 2000;
    c.lipschitz_trials = 60;
    c.lipschitz_max_t = 40;
    c.cover_points_per_axis = 8;
    c.epsilon = 0.6;
  } else if (scale == "desk") {
    c.n = c.m = c.k = 8;
    c.train_t = 6;
    c.eval_lengths = {6, 12, 30, 60};
    c.seeds = 3;
    c.train.epochs = 40;
    c.train.batches_per_epoch = 100;
    c.train.batch_size = 256;
    // The shortened desk protocol needs a faster rate than the full-length
    // reference configuration; 1e-3 over 40 epochs leaves the recurrent
    // families short of identification.
    c.train.lr = 4e-3;
    c.risk_samples = 4096;
    c.r2_sequences = 1000;
    c.horizon = 200;
    c.mc_samples = 20000;
    c.lipschitz_trials = 1000;
    c.lipschitz_max_t = 100;
    c.cover_points_per_axis = 22;
    c.epsilon = 0.2;
  } else if (scale == "paper") {
    c.n = c.m = c.k = 20;
    c.train_t = 10;
    c.eval_lengths = {10, 20, 50, 100};
    c.seeds = 5;
    c.train.epochs = 100;
    c.train.batches_per_epoch = 100;
    c.train.batch_size = 256;
    c.risk_samples = 10000;
    c.r2_sequences = 1000;
    c.horizon = 200;
    c.mc_samples = 100000;
    c.lipschitz_trials = 1000;
    c.lipschitz_max_t = 100;
    c.cover_points_per_axis = 22;
    c.epsilon = 0.2;
  } else {
    throw std::invalid_argument("unknown scale: " + scale + " (use smoke|desk|paper)");
  }
  resolve(c);
  return c;
}

void resolve(ExperimentConfig& c) {
  // Curves must include the training length.
  if (c.experiment == "lengthgen" || c.experiment == "discrete" || c.experiment == "cot" ||
      c.experiment == "nonrealizable") {
    if (std::find(c.eval_lengths.begin(), c.eval_lengths.end(), c.train_t) ==
        c.eval_lengths.end()) {
      c.eval_lengths.push_back(c.train_t);
      std::sort(c.eval_lengths.begin(), c.eval_lengths.end());
    }
  }
  if (c.experiment == "failure") {
    // Reference failure constructions: deep set offsets 0.2 past length 5,
    // transformer offsets 0.1 past length 10.
    if (c.family == "transformer") {
      c.failure_offset = 0.1;
      c.failure_t0 = 10;
    } else {
      c.failure_offset = 0.2;
      c.failure_t0 = 5;
      // The trained-through arm carves the offset boundary out of
      // overlapping prefix-sum shells; at the desk budget that region is
      // still underfit, so this experiment trains longer.
      if (c.scale == "desk") c.train.epochs = 120;
    }
    if (c.scale == "smoke") c.failure_t0 = c.family == "transformer" ? 4 : 3;
  }
  if (c.out_dir.empty()) c.out_dir = "runs/" + c.experiment + "-" + c.family + "-" + c.scale;
}

json config_to_json(const ExperimentConfig& c) {
  json t;
  t["lr"] = c.train.lr;
  t["weight_decay"] = c.train.weight_decay;
  t["beta1"] = c.train.beta1;
  t["beta2"] = c.train.beta2;
  t["eps"] = c.train.eps;
  t["plateau_factor"] = c.train.plateau_factor;
  t["plateau_threshold"] = c.train.plateau_threshold;
  t["cooldown_epochs"] = c.train.cooldown_epochs;
  t["min_lr"] = c.train.min_lr;
  t["batch_size"] = c.train.batch_size;
  t["batches_per_epoch"] = c.train.batches_per_epoch;
  t["epochs"] = c.train.epochs;
  t["val_batches"] = c.train.val_batches;
  t["final_label_only"] = c.train.final_label_only;
  t["first_loss_position"] = c.train.first_loss_position;

  json j;
  j["experiment"] = c.experiment;
  j["family"] = c.family;
  j["scale"] = c.scale;
  j["out_dir"] = c.out_dir;
  j["n"] = c.n;
  j["m"] = c.m;
  j["k"] = c.k;
  j["train_T"] = c.train_t;
  j["eval_lengths"] = c.eval_lengths;
  j["seeds"] = c.seeds;
  j["base_seed"] = c.base_seed;
  j["train"] = t;
  j["risk_samples"] = c.risk_samples;
  j["r2_sequences"] = c.r2_sequences;
  j["attention"] = c.attention;
  j["norm"] = c.norm;
  j["attention_heads"] = c.attention_heads;
  j["grid_levels"] = c.grid_levels;
  j["failure_offset"] = c.failure_offset;
  j["failure_t0"] = c.failure_t0;
  j["student_family"] = c.student_family;
  j["tolerance"] = c.tolerance;
  j["horizon"] = c.horizon;
  j["mc_samples"] = c.mc_samples;
  j["epsilon"] = c.epsilon;
  j["cover_points_per_axis"] = c.cover_points_per_axis;
  j["lipschitz_trials"] = c.lipschitz_trials;
  j["lipschitz_max_t"] = c.lipschitz_max_t;
  return j;
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& slot) {
  if (j.contains(key)) slot = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const std::string& cli_scale) {
  std::string experiment = j.value("experiment", std::string("lengthgen"));
  std::string scale = !cli_scale.empty() ? cli_scale : j.value("scale", std::string("desk"));
  ExperimentConfig c = preset(experiment, scale);
  maybe(j, "family", c.family);
  maybe(j, "out_dir", c.out_dir);
  maybe(j, "n", c.n);
  maybe(j, "m", c.m);
  maybe(j, "k", c.k);
  maybe(j, "train_T", c.train_t);
  maybe(j, "eval_lengths", c.eval_lengths);
  maybe(j, "seeds", c.seeds);
  maybe(j, "base_seed", c.base_seed);
  if (j.contains("train")) {
    const json& t = j.at("train");
    maybe(t, "lr", c.train.lr);
    maybe(t, "weight_decay", c.train.weight_decay);
    maybe(t, "beta1", c.train.beta1);
    maybe(t, "beta2", c.train.beta2);
    maybe(t, "eps", c.train.eps);
    maybe(t, "plateau_factor", c.train.plateau_factor);
    maybe(t, "plateau_threshold", c.train.plateau_threshold);
    maybe(t, "cooldown_epochs", c.train.cooldown_epochs);
    maybe(t, "min_lr", c.train.min_lr);
    maybe(t, "batch_size", c.train.batch_size);
    maybe(t, "batches_per_epoch", c.train.batches_per_epoch);
    maybe(t, "epochs", c.train.epochs);
    maybe(t, "val_batches", c.train.val_batches);
    maybe(t, "final_label_only", c.train.final_label_only);
    maybe(t, "first_loss_position", c.train.first_loss_position);
  }
  maybe(j, "risk_samples", c.risk_samples);
  maybe(j, "r2_sequences", c.r2_sequences);
  maybe(j, "attention", c.attention);
  maybe(j, "norm", c.norm);
  maybe(j, "attention_heads", c.attention_heads);
  maybe(j, "grid_levels", c.grid_levels);
  maybe(j, "failure_offset", c.failure_offset);
  maybe(j, "failure_t0", c.failure_t0);
  maybe(j, "student_family", c.student_family);
  maybe(j, "tolerance", c.tolerance);
  maybe(j, "horizon", c.horizon);
  maybe(j, "mc_samples", c.mc_samples);
  maybe(j, "epsilon", c.epsilon);
  maybe(j, "cover_points_per_axis", c.cover_points_per_axis);
  maybe(j, "lipschitz_trials", c.lipschitz_trials);
  maybe(j, "lipschitz_max_t", c.lipschitz_max_t);
  if (!j.contains("out_dir")) {
    c.out_dir = "runs/" + c.experiment + "-" + c.family + "-" + c.scale;
  }
  return c;
}

ExperimentConfig load_config_file(const std::string& path, const std::string& cli_scale) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, cli_scale);
}

std::string config_hash(const ExperimentConfig& config) {
  // Canonicalize through the key-sorted json type.
  nlohmann::json sorted = nlohmann::json::parse(config_to_json(config).dump());
  const std::string dump = sorted.dump();
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json manifest_to_json(const RunManifest& manifest) {
  json j;
  j["config_hash"] = manifest.config_hash;
  j["config"] = manifest.config;
  j["artifacts"] = manifest.artifacts;
  j["provenance"] = manifest.provenance;
  j["wall_seconds"] = manifest.wall_seconds;
  j["per_seed_status"] = manifest.per_seed_status;
  return j;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << manifest_to_json(manifest).dump(2) << "\n";
}

}  // namespace seqlab::harness
