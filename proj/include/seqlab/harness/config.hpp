#ifndef SEQLAB_HARNESS_CONFIG_HPP
#define SEQLAB_HARNESS_CONFIG_HPP

#include <json.hpp>
#include <cstdint>
#include <string>
#include <vector>

#include "seqlab/train/train.hpp"

namespace seqlab::harness {

using json = nlohmann::ordered_json;

// One experiment run, fully resolved: scale presets fill the defaults, a
// config file overrides them, CLI flags override the file.
struct ExperimentConfig {
  std::string experiment = "lengthgen";
  std::string family = "deep_set";
  std::string scale = "desk";
  std::string out_dir;

  std::size_t n = 8, m = 8, k = 8;
  std::size_t train_t = 6;
  std::vector<std::size_t> eval_lengths = {6, 12, 30, 60};
  std::size_t seeds = 3;
  std::uint64_t base_seed = 0;

  train::TrainConfig train;

  std::size_t risk_samples = 4096;
  std::size_t r2_sequences = 1000;

  // transformer knobs
  std::string attention = "sigmoid";
  std::string norm = "mean_over_i";
  std::size_t attention_heads = 1;

  // discrete-token experiment
  std::size_t grid_levels = 2;

  // failure construction; family-dependent defaults applied on resolve
  double failure_offset = 0.2;
  std::size_t failure_t0 = 5;

  // nonrealizable control
  std::string student_family = "rnn";

  // theory experiments
  double tolerance = 0.0;  // 0 = derive from MC standard error
  std::size_t horizon = 200;
  std::size_t mc_samples = 20000;
  double epsilon = 0.2;
  std::size_t cover_points_per_axis = 22;
  std::size_t lipschitz_trials = 1000;
  std::size_t lipschitz_max_t = 100;
};

// Presets: smoke is the under-a-minute pipeline check, desk the acceptance
// scale, paper the full reference configuration.
ExperimentConfig preset(const std::string& experiment, const std::string& scale);

// Applies family-dependent defaults (failure constants, cot/eval lengths).
void resolve(ExperimentConfig& config);

json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const json& j, const std::string& cli_scale = "");
ExperimentConfig load_config_file(const std::string& path, const std::string& cli_scale = "");

// FNV-1a over the canonical (key-sorted) dump; stable under field reordering.
std::string config_hash(const ExperimentConfig& config);

struct RunManifest {
  std::string config_hash;
  json config;
  std::vector<std::string> artifacts;
  std::string provenance;
  double wall_seconds = 0.0;
  std::vector<std::string> per_seed_status;
};

json manifest_to_json(const RunManifest& manifest);
void write_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace seqlab::harness

#endif  // SEQLAB_HARNESS_CONFIG_HPP
