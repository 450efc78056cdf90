#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "serlab/policy.hpp"
#include "serlab/reward_model.hpp"

namespace serlab {

// Binary checkpoints: 8-byte magic, u32 format version, u8 kind, dims,
// little-endian f64 weights, then the 64-bit rng state. A ".manifest.txt"
// sidecar duplicates the header for inspection. load(save(x)) is bit-exact.

void save_reward_checkpoint(const std::string& path, const RewardNet& net,
                            std::uint64_t rng_state);

struct LoadedReward {
  RewardNet params;
  std::uint64_t rng_state = 0;
};

LoadedReward load_reward_checkpoint(const std::string& path,
                                    std::optional<int> expect_dim = {});

void save_policy_checkpoint(const std::string& path, const PolicyParams& policy,
                            std::uint64_t rng_state);

struct LoadedPolicy {
  PolicyParams params;
  std::uint64_t rng_state = 0;
};

LoadedPolicy load_policy_checkpoint(const std::string& path,
                                    std::optional<int> expect_dim = {});

}  // namespace serlab
