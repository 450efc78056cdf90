#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "serlab/policy.hpp"
#include "serlab/self_evolve.hpp"
#include "serlab/theory.hpp"

namespace serlab {

// Floats in CSVs carry 9 significant digits; rewrites are idempotent.
std::string fmt9(double x);

void write_loop_csv(const std::string& path, std::span<const LoopRecord> history);
void write_ppo_curve_csv(const std::string& path,
                         std::span<const PpoCurvePoint> curve);
void write_accuracy_csv(const std::string& path,
                        std::span<const Theorem1Report> reports);
void write_regret_csv(const std::string& path, const Theorem2Report& report);

nlohmann::ordered_json to_json(const LoopRecord& rec);
nlohmann::ordered_json run_summary_json(const SerRun& run);
nlohmann::ordered_json win_rate_json(const WinRate& wr);
nlohmann::ordered_json to_json(const AssumptionReport& report);
nlohmann::ordered_json to_json(const Theorem1Report& report);
nlohmann::ordered_json to_json(const Theorem2Report& report);

void write_json(const std::string& path, const nlohmann::ordered_json& j);

struct RunManifest {
  std::string tool_version;
  std::string config_hash;  // hex
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;
  std::string status;  // "success" | "error"
  std::map<std::string, std::string> artifacts;  // name -> path
};

std::string iso8601_now();

// Written whole via a temp file + rename.
void write_manifest_atomic(const std::string& path, const RunManifest& manifest);

}  // namespace serlab
