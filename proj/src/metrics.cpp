#include "serlab/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>

#include "serlab/errors.hpp"

namespace serlab {
namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw IoError("cannot write " + path);
  }
}

}  // namespace

std::string fmt9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

void write_loop_csv(const std::string& path,
                    std::span<const LoopRecord> history) {
  std::string text =
      "loop,status,status1_count,status2_count,new_filtered,"
      "cumulative_filtered,train_loss,test_accuracy\n";
  for (const LoopRecord& r : history) {
    text += std::to_string(r.loop);
    text += ",";
    text += to_string(r.status);
    text += ",";
    text += std::to_string(r.status1_count);
    text += ",";
    text += std::to_string(r.status2_count);
    text += ",";
    text += std::to_string(r.new_filtered);
    text += ",";
    text += std::to_string(r.cumulative_filtered);
    text += ",";
    text += fmt9(r.train_loss);
    text += ",";
    text += fmt9(r.test_accuracy);
    text += "\n";
  }
  write_text(path, text);
}

void write_ppo_curve_csv(const std::string& path,
                         std::span<const PpoCurvePoint> curve) {
  std::string text = "step,mean_scaled_reward,approx_kl,clip_frac,kl_coeff\n";
  for (const PpoCurvePoint& p : curve) {
    text += std::to_string(p.step);
    text += ",";
    text += fmt9(p.mean_scaled_reward);
    text += ",";
    text += fmt9(p.approx_kl);
    text += ",";
    text += fmt9(p.clip_frac);
    text += ",";
    text += fmt9(p.kl_coeff);
    text += "\n";
  }
  write_text(path, text);
}

void write_accuracy_csv(const std::string& path,
                        std::span<const Theorem1Report> reports) {
  std::string text = "seed_index,loop,test_accuracy,alpha_hat\n";
  for (std::size_t s = 0; s < reports.size(); ++s) {
    const Theorem1Report& r = reports[s];
    for (std::size_t t = 0; t < r.accuracy.size(); ++t) {
      text += std::to_string(s);
      text += ",";
      text += std::to_string(t);
      text += ",";
      text += fmt9(r.accuracy[t]);
      text += ",";
      text += fmt9(t < r.alpha_hat.size()
                       ? r.alpha_hat[t]
                       : std::numeric_limits<double>::quiet_NaN());
      text += "\n";
    }
  }
  write_text(path, text);
}

void write_regret_csv(const std::string& path, const Theorem2Report& report) {
  std::string text = "eps_r,seed_index,regret\n";
  for (std::size_t s = 0; s < report.regret.size(); ++s) {
    for (std::size_t li = 0; li < report.eps_levels.size(); ++li) {
      text += fmt9(report.eps_levels[li]);
      text += ",";
      text += std::to_string(s);
      text += ",";
      text += fmt9(report.regret[s][li]);
      text += "\n";
    }
  }
  write_text(path, text);
}

nlohmann::ordered_json to_json(const LoopRecord& r) {
  nlohmann::ordered_json j;
  j["loop"] = r.loop;
  j["status"] = to_string(r.status);
  j["status1_count"] = r.status1_count;
  j["status2_count"] = r.status2_count;
  j["new_filtered"] = r.new_filtered;
  j["cumulative_filtered"] = r.cumulative_filtered;
  j["train_loss"] = r.train_loss;
  j["test_accuracy"] = r.test_accuracy;
  return j;
}

nlohmann::ordered_json run_summary_json(const SerRun& run) {
  nlohmann::ordered_json j;
  j["loops"] = nlohmann::ordered_json::array();
  for (const LoopRecord& r : run.history) j["loops"].push_back(to_json(r));
  j["terminal_status"] = to_string(run.terminal_status);
  j["cumulative_filtered"] = run.cumulative_filtered.size();
  j["final_test_accuracy"] =
      run.history.empty() ? 0.0 : run.history.back().test_accuracy;
  return j;
}

nlohmann::ordered_json win_rate_json(const WinRate& wr) {
  const double n = static_cast<double>(wr.win + wr.tie + wr.lose);
  nlohmann::ordered_json j;
  j["win"] = wr.win;
  j["tie"] = wr.tie;
  j["lose"] = wr.lose;
  j["win_frac"] = n > 0 ? wr.win / n : 0.0;
  j["tie_frac"] = n > 0 ? wr.tie / n : 0.0;
  j["lose_frac"] = n > 0 ? wr.lose / n : 0.0;
  return j;
}

nlohmann::ordered_json to_json(const AssumptionReport& r) {
  nlohmann::ordered_json j;
  j["acc0"] = r.acc0;
  j["delta_p"] = r.delta_p;
  if (r.alpha_hat) {
    j["alpha_hat"] = *r.alpha_hat;
  } else {
    j["alpha_hat"] = nullptr;
  }
  j["n_confident"] = r.n_confident;
  j["n_total"] = r.n_total;
  j["lipschitz_hat"] = r.lipschitz_hat;
  return j;
}

nlohmann::ordered_json to_json(const Theorem1Report& r) {
  nlohmann::ordered_json j;
  j["verdict"] = to_string(r.verdict);
  j["accuracy"] = r.accuracy;
  auto alphas = nlohmann::ordered_json::array();
  for (double a : r.alpha_hat) {
    if (std::isnan(a)) {
      alphas.push_back(nullptr);
    } else {
      alphas.push_back(a);
    }
  }
  j["alpha_hat"] = alphas;
  j["alpha_above_half"] = r.alpha_above_half;
  auto statuses = nlohmann::ordered_json::array();
  for (LearningStatus s : r.statuses) statuses.push_back(to_string(s));
  j["statuses"] = statuses;
  j["eps_stat"] = r.eps_stat;
  j["n_test"] = r.n_test;
  j["worst_drop"] = r.worst_drop;
  return j;
}

nlohmann::ordered_json to_json(const Theorem2Report& r) {
  nlohmann::ordered_json j;
  j["verdict"] = to_string(r.verdict);
  j["eps_levels"] = r.eps_levels;
  j["regret_per_seed"] = r.regret;
  j["mean_regret"] = r.mean_regret;
  j["mean_optimal_value"] = r.mean_optimal_value;
  j["regret_at_zero"] = r.regret_at_zero;
  j["spearman"] = r.spearman;
  j["k_hat"] = r.k_hat;
  return j;
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string iso8601_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest_atomic(const std::string& path,
                           const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["tool_version"] = manifest.tool_version;
  j["config_hash"] = manifest.config_hash;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  j["status"] = manifest.status;
  j["artifacts"] = manifest.artifacts;
  const std::string tmp = path + ".tmp";
  write_text(tmp, j.dump(2) + "\n");
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot move " + tmp + " into place");
  }
}

}  // namespace serlab
