#include "serlab/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "serlab/checkpoint.hpp"
#include "serlab/config.hpp"
#include "serlab/cost_model.hpp"
#include "serlab/errors.hpp"
#include "serlab/metrics.hpp"
#include "serlab/pair_io.hpp"
#include "serlab/policy.hpp"
#include "serlab/self_evolve.hpp"
#include "serlab/theory.hpp"
#include "serlab/version.hpp"

namespace serlab {
namespace {

namespace fs = std::filesystem;

struct CommonOpts {
  std::string config_path = "default";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path,
                  "Config file path, or 'default' for the built-in profile");
  cmd->add_option("--seed", o.seed, "Global seed (overrides the config)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads for pool scoring");
  cmd->add_option("--set", o.overrides,
                  "Config override as section.key=value (repeatable)");
}

ExperimentConfig resolve_config(const CommonOpts& o) {
  ExperimentConfig cfg = o.config_path == "default"
                             ? default_config()
                             : load_config_file(o.config_path);
  for (const std::string& ov : o.overrides) apply_override(cfg, ov);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) {
    cfg.out_dir = *o.out;
  } else if (const char* env = std::getenv("SERLAB_OUT")) {
    cfg.out_dir = (fs::path(env) / cfg.out_dir).string();
  }
  if (o.threads) cfg.threads = *o.threads;
  validate(cfg);
  return cfg;
}

World build_world(const ExperimentConfig& cfg) {
  WorldConfig wc = cfg.world;
  wc.rng_seed = stage_rng(cfg, stage::kWorld).state();
  return generate_world(wc);
}

Splits build_splits(const ExperimentConfig& cfg, const World& world) {
  SplitConfig sc = cfg.split;
  sc.rng_seed = stage_rng(cfg, stage::kSplits).state();
  return make_splits(world, sc);
}

char hash_hex_digit(std::uint64_t v) {
  return "0123456789abcdef"[v & 0xF];
}

std::string hash_hex(std::uint64_t h) {
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = hash_hex_digit(h);
    h >>= 4;
  }
  return s;
}

// Collects artifact paths as a run produces them and lands the manifest at
// the end, success or not.
class ManifestScope {
 public:
  ManifestScope(const ExperimentConfig& cfg, const fs::path& dir)
      : dir_(dir) {
    fs::create_directories(dir);
    manifest_.tool_version = kToolVersion;
    manifest_.config_hash = hash_hex(config_hash(cfg));
    manifest_.started_at = iso8601_now();
  }

  fs::path dir() const { return dir_; }

  std::string add(const std::string& name, const fs::path& path) {
    // Manifest-relative paths keep the run directory relocatable.
    manifest_.artifacts[name] = path.lexically_relative(dir_).string();
    return path.string();
  }

  void finish(const std::string& status) {
    manifest_.finished_at = iso8601_now();
    manifest_.status = status;
    write_manifest_atomic((dir_ / "run_manifest.json").string(), manifest_);
  }

 private:
  fs::path dir_;
  RunManifest manifest_;
};

SerConfig ser_config_for(const ExperimentConfig& cfg, int max_loops) {
  SerConfig sc = cfg.ser;
  sc.thresholds.max_loops = max_loops;
  return sc;
}

SerRun run_ser_stage(const ExperimentConfig& cfg, const World& world,
                     const Splits& splits, const SerConfig& ser,
                     const LoopObserver& observer = {}) {
  return run_ser(world, splits.seed_labeled, splits.unlabeled, splits.test,
                 ser, cfg.train, stage_rng(cfg, stage::kSerLoop).state(),
                 observer, cfg.threads);
}

int cmd_gen_data(const CommonOpts& opts) {
  const ExperimentConfig cfg = resolve_config(opts);
  const World world = build_world(cfg);
  const Splits splits = build_splits(cfg, world);
  ManifestScope scope(cfg, cfg.out_dir);

  export_pairs_jsonl(scope.add("seed_labeled", scope.dir() / "seed_labeled.jsonl"),
                     world, splits.seed_labeled);
  export_pairs_jsonl(scope.add("unlabeled", scope.dir() / "unlabeled.jsonl"),
                     world, splits.unlabeled);
  export_pairs_jsonl(scope.add("test", scope.dir() / "test.jsonl"), world,
                     splits.test);

  DatasetManifest dm;
  dm.dimension = world.dim();
  dm.n_pairs = static_cast<std::int64_t>(
      splits.seed_labeled.size() + splits.unlabeled.size() + splits.test.size());
  dm.n_labeled =
      static_cast<std::int64_t>(splits.seed_labeled.size() + splits.test.size());
  dm.seed = cfg.seed;
  dm.oracle_spec = world.oracle_spec();
  dm.oracle_spec_hash = world.oracle_hash();
  write_dataset_manifest(scope.add("dataset_manifest",
                                   scope.dir() / "dataset_manifest.json"),
                         dm);

  nlohmann::ordered_json prompts = splits.ppo_prompts;
  write_json(scope.add("ppo_prompts", scope.dir() / "ppo_prompts.json"), prompts);
  scope.finish("success");
  std::printf("gen-data: %zu seed / %zu unlabeled / %zu test pairs, %zu prompts -> %s\n",
              splits.seed_labeled.size(), splits.unlabeled.size(),
              splits.test.size(), splits.ppo_prompts.size(),
              scope.dir().string().c_str());
  return 0;
}

int cmd_train_seed(const CommonOpts& opts) {
  const ExperimentConfig cfg = resolve_config(opts);
  const World world = build_world(cfg);
  const Splits splits = build_splits(cfg, world);
  ManifestScope scope(cfg, cfg.out_dir);

  const SerRun run = run_ser_stage(cfg, world, splits, ser_config_for(cfg, 0));
  save_reward_checkpoint(scope.add("seed_rm", scope.dir() / "seed_rm.ckpt"),
                         run.final_params,
                         stage_rng(cfg, stage::kSeedTrain).state());
  write_loop_csv(scope.add("metrics", scope.dir() / "ser_loops.csv"),
                 run.history);
  scope.finish("success");
  std::printf("train-seed: accuracy %.4f on %zu test pairs, train loss %.6f\n",
              run.history.front().test_accuracy, splits.test.size(),
              run.history.front().train_loss);
  return 0;
}

int cmd_ser_loop(const CommonOpts& opts) {
  const ExperimentConfig cfg = resolve_config(opts);
  const World world = build_world(cfg);
  const Splits splits = build_splits(cfg, world);
  ManifestScope scope(cfg, cfg.out_dir);

  LoopObserver save_loop = [&](int loop, const RewardNet& params) {
    const fs::path path =
        scope.dir() / ("rm_loop_" + std::to_string(loop) + ".ckpt");
    save_reward_checkpoint(
        scope.add("rm_loop_" + std::to_string(loop), path), params,
        stage_rng(cfg, stage::kSerLoop).split(static_cast<std::uint64_t>(loop)).state());
  };
  const SerRun run = run_ser_stage(
      cfg, world, splits, ser_config_for(cfg, cfg.ser.thresholds.max_loops),
      save_loop);

  write_loop_csv(scope.add("metrics", scope.dir() / "ser_loops.csv"),
                 run.history);
  write_json(scope.add("run_summary", scope.dir() / "run_summary.json"),
             run_summary_json(run));
  save_reward_checkpoint(scope.add("rm_final", scope.dir() / "rm_final.ckpt"),
                         run.final_params,
                         stage_rng(cfg, stage::kSerLoop).state());
  scope.finish("success");
  for (const LoopRecord& rec : run.history) {
    std::printf(
        "loop %d: status=%s s1=%lld s2=%lld new=%lld cum=%lld loss=%.6f acc=%.4f\n",
        rec.loop, to_string(rec.status),
        static_cast<long long>(rec.status1_count),
        static_cast<long long>(rec.status2_count),
        static_cast<long long>(rec.new_filtered),
        static_cast<long long>(rec.cumulative_filtered), rec.train_loss,
        rec.test_accuracy);
  }
  std::printf("ser-loop: terminal=%s final accuracy %.4f\n",
              to_string(run.terminal_status),
              run.history.back().test_accuracy);
  return 0;
}

int cmd_ppo(const CommonOpts& opts, const std::string& rm_path,
            bool oracle_reward) {
  const ExperimentConfig cfg = resolve_config(opts);
  const World world = build_world(cfg);
  const Splits splits = build_splits(cfg, world);
  ManifestScope scope(cfg, cfg.out_dir);

  PpoHyper hyper = cfg.ppo;
  hyper.rng_seed = stage_rng(cfg, stage::kPpo).state();
  const PolicyParams init = PolicyParams::zeros(world.dim());

  PpoRun run{init, {}};
  if (oracle_reward) {
    const RewardFn oracle = [&world](std::int64_t qid, std::int64_t aid) {
      return world.true_quality(qid, aid);
    };
    run = train_ppo(init, world, oracle, splits.ppo_prompts, hyper);
  } else {
    const std::string path =
        rm_path.empty() ? (scope.dir() / "rm_final.ckpt").string() : rm_path;
    const LoadedReward rm = load_reward_checkpoint(path, world.dim());
    run = train_ppo(init, world, rm.params, splits.ppo_prompts, hyper);
  }

  write_ppo_curve_csv(scope.add("curve", scope.dir() / "ppo_curve.csv"),
                      run.curve);
  save_policy_checkpoint(scope.add("policy", scope.dir() / "policy.ckpt"),
                         run.policy, hyper.rng_seed);
  scope.finish("success");
  const double final_reward =
      run.curve.empty() ? 0.0 : run.curve.back().mean_scaled_reward;
  std::printf("ppo: %d steps over %zu prompts, final mean scaled reward %.4f\n",
              hyper.steps, splits.ppo_prompts.size(), final_reward);
  return 0;
}

int cmd_eval_winrate(const CommonOpts& opts, const std::string& policy_a_path,
                     const std::string& policy_b_path, int n_prompts) {
  const ExperimentConfig cfg = resolve_config(opts);
  if (n_prompts < 1) throw ArgumentError("--n-prompts must be >= 1");
  const World world = build_world(cfg);
  const Splits splits = build_splits(cfg, world);
  ManifestScope scope(cfg, cfg.out_dir);

  const std::string a_path = policy_a_path.empty()
                                 ? (scope.dir() / "policy.ckpt").string()
                                 : policy_a_path;
  const PolicyParams policy_a =
      load_policy_checkpoint(a_path, world.dim()).params;
  const PolicyParams policy_b =
      policy_b_path.empty()
          ? PolicyParams::zeros(world.dim())
          : load_policy_checkpoint(policy_b_path, world.dim()).params;

  Rng eval_rng = stage_rng(cfg, stage::kEval);
  std::vector<std::int64_t> prompts(static_cast<std::size_t>(n_prompts));
  Rng pick = eval_rng.split(1);
  for (auto& q : prompts) {
    q = splits.ppo_prompts[static_cast<std::size_t>(
        pick.below(splits.ppo_prompts.size()))];
  }
  Rng judge_rng = eval_rng.split(2);
  const WinRate wr =
      judge_win_rate(policy_a, policy_b, world, prompts, judge_rng);

  write_json(scope.add("win_rate", scope.dir() / "win_rate.json"),
             win_rate_json(wr));
  scope.finish("success");
  std::printf("eval-winrate: win %lld tie %lld lose %lld over %d prompts\n",
              static_cast<long long>(wr.win), static_cast<long long>(wr.tie),
              static_cast<long long>(wr.lose), n_prompts);
  return 0;
}

int cmd_validate_theorems(const CommonOpts& opts, int theorem, int seeds,
                          std::vector<double> eps_levels) {
  const ExperimentConfig cfg = resolve_config(opts);
  if (seeds < 1) throw ArgumentError("--seeds must be >= 1");
  ManifestScope scope(cfg, cfg.out_dir);

  if (theorem == 1) {
    std::vector<Theorem1Report> reports;
    int pass = 0;
    for (int s = 0; s < seeds; ++s) {
      ExperimentConfig run_cfg = cfg;
      run_cfg.seed = Rng(cfg.seed).split(stage::kTheory)
                         .split(static_cast<std::uint64_t>(s)).state();
      reports.push_back(validate_theorem1(run_cfg));
      if (reports.back().verdict == Verdict::Pass) ++pass;
      std::printf("theorem-1 seed %d: %s (acc %.4f -> %.4f)\n", s,
                  to_string(reports.back().verdict),
                  reports.back().accuracy.front(),
                  reports.back().accuracy.back());
    }
    const int needed = (seeds * 4 + 4) / 5;  // >= 4/5 of the seeds
    nlohmann::ordered_json j;
    j["theorem"] = 1;
    j["seeds"] = seeds;
    j["pass_count"] = pass;
    j["required"] = needed;
    j["verdict"] = pass >= needed ? "PASS" : "FAIL";
    j["reports"] = nlohmann::ordered_json::array();
    for (const auto& r : reports) j["reports"].push_back(to_json(r));
    write_json(scope.add("report", scope.dir() / "theorem1_report.json"), j);
    write_accuracy_csv(scope.add("accuracy", scope.dir() / "theorem1_accuracy.csv"),
                       reports);
    scope.finish("success");
    std::printf("theorem-1: %d/%d seeds pass -> %s\n", pass, seeds,
                j["verdict"].get<std::string>().c_str());
    return pass >= needed ? 0 : 1;
  }
  if (theorem == 2) {
    if (eps_levels.empty()) eps_levels = {0.0, 0.1, 0.2, 0.4};
    ExperimentConfig t2_cfg = cfg;
    const Theorem2Report report =
        validate_theorem2(eps_levels, t2_cfg, seeds);
    write_json(scope.add("report", scope.dir() / "theorem2_report.json"),
               to_json(report));
    write_regret_csv(scope.add("regret", scope.dir() / "theorem2_regret.csv"),
                     report);
    scope.finish("success");
    std::printf(
        "theorem-2: regret@0 %.5f (optimal %.5f), spearman %.3f, k_hat %.3f -> %s\n",
        report.regret_at_zero, report.mean_optimal_value, report.spearman,
        report.k_hat, to_string(report.verdict));
    return report.verdict == Verdict::Pass ? 0 : 1;
  }
  throw ArgumentError("--theorem must be 1 or 2");
}

int cmd_cost_model(const CostInputs& inputs, const std::string& out_dir) {
  const AnnotationCosts ann = annotation_costs(inputs);
  const PipelineCosts pipe = pipeline_cost(inputs);
  const double ratio = ann.human_usd_per_sample / pipe.ser_usd_per_sample;

  std::printf("labeling cost per sample (USD)\n");
  std::printf("  human annotation   %.6g\n", ann.human_usd_per_sample);
  std::printf("  llm judge          %.6g\n", ann.llm_usd_per_sample);
  std::printf("  self-label pass    %.4e\n", pipe.inference_usd_per_sample);
  std::printf("  seed + self-label  %.6g\n", pipe.ser_usd_per_sample);
  std::printf("  human / composite  %.3fx\n", ratio);

  nlohmann::ordered_json j;
  j["human_usd_per_sample"] = ann.human_usd_per_sample;
  j["llm_usd_per_sample"] = ann.llm_usd_per_sample;
  j["inference_usd_per_sample"] = pipe.inference_usd_per_sample;
  j["ser_usd_per_sample"] = pipe.ser_usd_per_sample;
  j["human_over_ser"] = ratio;
  std::printf("%s\n", j.dump().c_str());
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_json((fs::path(out_dir) / "cost_model.json").string(), j);
  }
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"Self-evolving reward-model laboratory"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonOpts gen_opts;
  add_common(app.add_subcommand("gen-data",
                                "Generate the synthetic world and JSONL pools"),
             gen_opts);

  CommonOpts seed_opts;
  add_common(app.add_subcommand("train-seed",
                                "Train the warm-up reward model on seed labels"),
             seed_opts);

  CommonOpts ser_opts;
  add_common(app.add_subcommand("ser-loop",
                                "Run the full self-evolution loop"),
             ser_opts);

  CommonOpts ppo_opts;
  std::string rm_path;
  bool oracle_reward = false;
  {
    CLI::App* cmd = app.add_subcommand("ppo", "Optimize the bandit policy");
    add_common(cmd, ppo_opts);
    cmd->add_option("--rm", rm_path,
                    "Reward checkpoint (default <out>/rm_final.ckpt)");
    cmd->add_flag("--oracle-reward", oracle_reward,
                  "Use the hidden true-quality scorer instead of a checkpoint");
  }

  CommonOpts eval_opts;
  std::string policy_a, policy_b;
  int n_prompts = 1000;
  {
    CLI::App* cmd = app.add_subcommand(
        "eval-winrate", "Judge two policies with the true-quality oracle");
    add_common(cmd, eval_opts);
    cmd->add_option("--policy-a", policy_a,
                    "Policy checkpoint (default <out>/policy.ckpt)");
    cmd->add_option("--policy-b", policy_b,
                    "Opponent checkpoint (default: untrained zero policy)");
    cmd->add_option("--n-prompts", n_prompts, "Prompt draws for judging");
  }

  CommonOpts theorem_opts;
  int theorem = 0;
  int seeds = 5;
  std::vector<double> eps_levels;
  {
    CLI::App* cmd = app.add_subcommand("validate-theorems",
                                       "Empirical convergence checks");
    add_common(cmd, theorem_opts);
    cmd->add_option("--theorem", theorem, "1 or 2")->required();
    cmd->add_option("--seeds", seeds, "Independent seeds");
    cmd->add_option("--eps", eps_levels,
                    "Perturbation levels for theorem 2 (default 0 0.1 0.2 0.4)");
  }

  CostInputs cost;
  std::string cost_out;
  {
    CLI::App* cmd = app.add_subcommand("cost-model",
                                       "Print the labeling-cost table");
    cmd->add_option("--words-per-task", cost.words_per_task);
    cmd->add_option("--usd-per-50-words", cost.usd_per_50_words);
    cmd->add_option("--llm-in-tokens", cost.llm_in_tokens);
    cmd->add_option("--llm-out-tokens", cost.llm_out_tokens);
    cmd->add_option("--usd-per-1k-in", cost.usd_per_1k_in);
    cmd->add_option("--usd-per-1k-out", cost.usd_per_1k_out);
    cmd->add_option("--calls-per-pair", cost.calls_per_pair);
    cmd->add_option("--gpu-usd-per-hour", cost.gpu_usd_per_hour);
    cmd->add_option("--gpus", cost.gpus);
    cmd->add_option("--samples-per-slot", cost.samples_per_slot);
    cmd->add_option("--slot-minutes", cost.slot_minutes);
    cmd->add_option("--seed-fraction", cost.seed_fraction);
    cmd->add_option("--extra-inferences", cost.extra_inferences);
    cmd->add_flag("--exact-human,!--rounded-human",
                  [&cost](std::int64_t count) {
                    cost.rounded_human_in_composite = count <= 0;
                  },
                  "Use the exact human cost in the composite");
    cmd->add_option("--composite-inference-scale",
                    cost.composite_inference_scale);
    cmd->add_option("--out", cost_out, "Also write cost_model.json here");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand("gen-data")) return cmd_gen_data(gen_opts);
    if (app.got_subcommand("train-seed")) return cmd_train_seed(seed_opts);
    if (app.got_subcommand("ser-loop")) return cmd_ser_loop(ser_opts);
    if (app.got_subcommand("ppo")) return cmd_ppo(ppo_opts, rm_path, oracle_reward);
    if (app.got_subcommand("eval-winrate")) {
      return cmd_eval_winrate(eval_opts, policy_a, policy_b, n_prompts);
    }
    if (app.got_subcommand("validate-theorems")) {
      return cmd_validate_theorems(theorem_opts, theorem, seeds, eps_levels);
    }
    if (app.got_subcommand("cost-model")) return cmd_cost_model(cost, cost_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace serlab
