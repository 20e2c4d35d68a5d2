// JSON run configuration: one file drives training, evaluation, and the
// ablation sweep.  Every key is optional (absent keys keep compiled
// defaults); unknown keys are rejected so typos fail loudly instead of
// silently training with defaults.
#pragma once

#include <string>

#include "dsam/bench.hpp"
#include "dsam/trainer.hpp"

namespace dsam {

struct RunConfig {
  TrainerConfig trainer;  // includes env, plant model, and optimizer settings
  BenchmarkSpec bench;
};

// Parse failures, unknown keys, and range violations all surface as
// std::invalid_argument with the offending key in the message.
RunConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const RunConfig& cfg);

// Empty path loads compiled defaults.  Throws std::invalid_argument on
// missing files as well, so the CLI maps every config problem to one path.
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

}  // namespace dsam
