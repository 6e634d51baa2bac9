#ifndef SEQLAB_HARNESS_EXPERIMENTS_HPP
#define SEQLAB_HARNESS_EXPERIMENTS_HPP

#include <string>
#include <vector>

#include "seqlab/harness/config.hpp"

namespace seqlab::harness {

// Runs one experiment end to end and writes results.csv, report.json,
// manifest.json and the SVG charts into config.out_dir.
struct RunOutcome {
  std::string out_dir;
  std::vector<std::string> artifacts;
  json report;
};

RunOutcome run_experiment(const ExperimentConfig& config);

// Re-renders the charts embedded in existing report.json files.
std::vector<std::string> emit_plots(const std::vector<std::string>& report_paths,
                                    const std::string& out_dir);

}  // namespace seqlab::harness

#endif  // SEQLAB_HARNESS_EXPERIMENTS_HPP
