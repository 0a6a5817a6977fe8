#pragma once

#include <string>
#include <vector>

#include "experiment_config.hpp"

namespace ppdem::cli {

// Each command materializes its artifacts under config.output_dir and
// returns the paths written. Every artifact embeds the resolved config.
std::vector<std::string> cmd_graph_gen(const ExperimentConfig& config);
std::vector<std::string> cmd_em_run(const ExperimentConfig& config);
std::vector<std::string> cmd_privacy_audit(const ExperimentConfig& config);
std::vector<std::string> cmd_calibrate_mi(const ExperimentConfig& config);

}  // namespace ppdem::cli
