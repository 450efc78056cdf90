#pragma once

#include <cstdint>
#include <string>

#include "serlab/policy.hpp"
#include "serlab/reward_model.hpp"
#include "serlab/self_evolve.hpp"
#include "serlab/world.hpp"

namespace serlab {

// Whole-experiment configuration. One global seed fans out to per-stage
// streams (see rng.hpp stage tags); the per-module rng_seed fields are
// derived from it and never read from a config file.
struct ExperimentConfig {
  WorldConfig world;
  SplitConfig split;
  SerConfig ser;
  TrainHyper train;
  PpoHyper ppo;
  std::uint64_t seed = 42;
  std::string out_dir = "runs";
  int threads = 1;
};

// Desk-scale default profile: d=16, 3077 questions x 4 answers so the RM
// block holds 2000 pairs, 15% seed labels at noise 0.1.
ExperimentConfig default_config();

void validate(const ExperimentConfig& cfg);

// Strict flat INI: [section] + key = value lines, '#' comments. Unknown
// sections or keys are rejected by name. Values land on top of the given
// base (pass default_config() for the usual behavior).
ExperimentConfig parse_config_text(const std::string& text,
                                   ExperimentConfig base = default_config());
ExperimentConfig load_config_file(const std::string& path,
                                  ExperimentConfig base = default_config());

std::string serialize_config(const ExperimentConfig& cfg);

// "section.key=value" override, same key set as the file format.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

std::uint64_t config_hash(const ExperimentConfig& cfg);

// Stage-stream derivation from the global seed.
Rng stage_rng(const ExperimentConfig& cfg, std::uint64_t stage_tag);

}  // namespace serlab
