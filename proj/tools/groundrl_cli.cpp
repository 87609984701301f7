// groundrl: reward scoring, grounding evaluation, dataset validation, toy
// SFT/GRPO training and a line-protocol scoring service.
//
// Exit codes: 0 success, 1 usage error, 2 input-file error, 3 validation
// failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "groundrl/batch.hpp"
#include "groundrl/dataset.hpp"
#include "groundrl/evaluation.hpp"
#include "groundrl/protocol.hpp"
#include "groundrl/toy_task.hpp"

namespace {

using namespace groundrl;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitInvalid = 3;

// Carries an exit code out of a subcommand.
struct CommandError {
  int code;
  std::string message;
};

std::vector<GroundingInstance> load_or_fail(const std::string& path) {
  LoadedDataset loaded;
  try {
    loaded = load_dataset(path);
  } catch (const DatasetFileError& e) {
    throw CommandError{kExitInput, e.what()};
  }
  for (const auto& err : loaded.report.errors) {
    std::cerr << "warning: " << path << ":" << err.line << ": "
              << validation_code_name(err.code) << ": " << err.message << '\n';
  }
  return std::move(loaded.instances);
}

RewardConfig reward_config_or_fail(const std::string& path) {
  if (path.empty()) return RewardConfig{};
  try {
    return load_reward_config(path);
  } catch (const DatasetFileError& e) {
    throw CommandError{kExitInput, e.what()};
  } catch (const std::invalid_argument& e) {
    throw CommandError{kExitUsage, e.what()};
  }
}

CompletionFile completions_or_fail(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CommandError{kExitInput, "cannot open completion file: " + path};
  CompletionFile file = read_completion_records(in);
  for (const auto& w : file.warnings) std::cerr << "warning: " << path << ": " << w << '\n';
  return file;
}

struct ScoreOptions {
  std::string completions;
  std::string dataset;
  std::string config;
  std::string format = "text";
};

int run_score(const ScoreOptions& opt) {
  const RewardConfig config = reward_config_or_fail(opt.config);
  const auto instances = load_or_fail(opt.dataset);
  const CompletionFile file = completions_or_fail(opt.completions);
  const InstanceIndex index = index_instances(instances);

  std::vector<ScoreRequest> requests;
  std::vector<const CompletionRecord*> kept;
  for (const auto& record : file.records) {
    const auto it = index.find(record.id);
    if (it == index.end()) {
      std::cerr << "warning: line " << record.line << ": unknown instance id '"
                << record.id << "', skipped\n";
      continue;
    }
    requests.push_back({it->second, record.completion});
    kept.push_back(&record);
  }
  const auto scores = score_batch(requests, config);

  RewardBreakdown mean;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& id = kept[i]->id;
    std::cout << (opt.format == "record" ? score_record_json(id, scores[i])
                                         : score_record_text(id, scores[i]))
              << '\n';
    mean.r_fmt += scores[i].r_fmt;
    mean.r_ent += scores[i].r_ent;
    mean.r_rel += scores[i].r_rel;
    mean.r_total += scores[i].r_total;
  }
  if (!scores.empty()) {
    const double n = static_cast<double>(scores.size());
    const std::string f = format_number(mean.r_fmt / n);
    const std::string e = format_number(mean.r_ent / n);
    const std::string r = format_number(mean.r_rel / n);
    const std::string t = format_number(mean.r_total / n);
    if (opt.format == "record") {
      std::cout << R"({"summary":{"count":)" << scores.size() << R"(,"r_fmt_mean":)" << f
                << R"(,"r_ent_mean":)" << e << R"(,"r_rel_mean":)" << r
                << R"(,"r_total_mean":)" << t << "}}\n";
    } else {
      std::cout << "count: " << scores.size() << "\nmean r_fmt: " << f
                << "\nmean r_ent: " << e << "\nmean r_rel: " << r
                << "\nmean r_total: " << t << '\n';
    }
  }
  return kExitOk;
}

struct EvaluateOptions {
  std::string predictions;
  std::string dataset;
  double threshold = kDefaultAccuracyThreshold;
  std::string out;
  std::string split = "all";
  std::string format = "text";
  bool verbose = false;
};

int run_evaluate(const EvaluateOptions& opt) {
  if (!(opt.threshold > 0.0 && opt.threshold < 1.0)) {
    throw CommandError{kExitUsage, "--threshold must lie in (0, 1)"};
  }
  auto instances = load_or_fail(opt.dataset);
  if (opt.split != "all") {
    const auto wanted = parse_split(opt.split);
    std::erase_if(instances, [&](const GroundingInstance& g) { return g.split() != *wanted; });
  }
  const CompletionFile file = completions_or_fail(opt.predictions);
  std::map<std::string, std::string> predictions;
  for (const auto& record : file.records) {
    if (!predictions.insert_or_assign(record.id, record.completion).second) {
      std::cerr << "warning: line " << record.line << ": duplicate prediction for '"
                << record.id << "', last one kept\n";
    }
  }
  const MetricsReport report =
      evaluate_dataset(predictions, instances, opt.threshold, opt.verbose);
  for (const auto& id : report.unknown_ids) {
    std::cerr << "warning: prediction for unknown instance id '" << id << "' excluded\n";
  }
  std::cout << (opt.format == "record" ? metrics_json(report, opt.verbose) + "\n"
                                       : metrics_text(report, opt.verbose));
  if (!opt.out.empty()) {
    std::ofstream out(opt.out);
    if (!out) throw CommandError{kExitInput, "cannot write report: " + opt.out};
    out << metrics_json(report, opt.verbose) << '\n';
  }
  return kExitOk;
}

int run_validate(const std::string& path) {
  LoadedDataset loaded;
  try {
    loaded = load_dataset(path);
  } catch (const DatasetFileError& e) {
    throw CommandError{kExitInput, e.what()};
  }
  const auto& report = loaded.report;
  std::cout << "records: " << report.total() << '\n'
            << "accepted: " << report.accepted << '\n'
            << "rejected: " << report.rejected << '\n';
  for (const auto& err : report.errors) {
    std::cout << "error: line " << err.line << ": " << validation_code_name(err.code)
              << ": " << err.message << '\n';
  }
  const StatsReport stats = dataset_stats(loaded.instances);
  std::cout << "total_images: " << stats.total_images << '\n'
            << "total_instances: " << stats.total_instances << '\n'
            << "train_instances: " << stats.train_instances << '\n'
            << "test_instances: " << stats.test_instances << '\n'
            << "train_images: " << stats.train_images << '\n'
            << "test_images: " << stats.test_images << '\n'
            << "cot_annotated: " << stats.cot_annotated << '\n';
  for (const auto& [objects, count] : stats.objects_per_instance) {
    std::cout << "objects_per_instance[" << objects << "]: " << count << '\n';
  }
  return report.rejected == 0 ? kExitOk : kExitInvalid;
}

struct TrainOptions {
  std::string dataset;
  std::string config;
  std::string trace_out;
  bool grpo_only = false;
  bool sft_only = false;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> sft_steps;
  std::optional<double> learning_rate;
  std::optional<double> sft_learning_rate;
  std::optional<double> kl_beta;
  std::optional<std::size_t> group_size;
  std::optional<double> prior_strength;
  std::string world;
  std::uint64_t seed = 20240601;
};

int run_train_toy(const TrainOptions& opt) {
  if (opt.grpo_only && opt.sft_only) {
    throw CommandError{kExitUsage, "--grpo-only and --sft-only are exclusive"};
  }
  ToyTrainingConfig config =
      opt.grpo_only ? ToyTrainingConfig::grpo_only() : ToyTrainingConfig::two_stage();
  if (!opt.config.empty()) {
    config.reward = reward_config_or_fail(opt.config);
    if (opt.grpo_only) {
      config.reward.lambda1 += 0.2;
      config.reward.lambda2 += 0.2;
    }
  }
  if (opt.sft_only) config.run_grpo = false;
  if (opt.steps) config.grpo.steps = *opt.steps;
  if (opt.sft_steps) config.sft_steps = *opt.sft_steps;
  if (opt.learning_rate) config.grpo.learning_rate = *opt.learning_rate;
  if (opt.sft_learning_rate) config.sft_learning_rate = *opt.sft_learning_rate;
  if (opt.kl_beta) config.grpo.kl_beta = *opt.kl_beta;
  if (opt.group_size) config.grpo.group_size = *opt.group_size;
  if (opt.prior_strength) config.prior_strength = *opt.prior_strength;
  config.seed = opt.seed;
  try {
    config.grpo.validate();
  } catch (const std::invalid_argument& e) {
    throw CommandError{kExitUsage, e.what()};
  }

  // The synthetic fixture is the two-completion world unless told otherwise.
  config.world = opt.dataset.empty() ? ToyWorld::TwoCompletion : ToyWorld::Chunks;
  if (!opt.world.empty()) config.world = *parse_toy_world(opt.world);

  std::vector<GroundingInstance> instances;
  if (opt.dataset.empty()) {
    instances.push_back(synthetic_instance());
  } else {
    instances = load_or_fail(opt.dataset);
    if (instances.empty()) throw CommandError{kExitInput, "dataset has no valid instance"};
  }

  const ToyTrainingResult result = train_two_stage(instances, config);
  const char* mode = opt.grpo_only ? "grpo-only" : opt.sft_only ? "sft-only" : "two-stage";
  std::cout << "mode: " << mode << '\n'
            << "world: " << toy_world_name(config.world) << '\n'
            << "lambda1: " << format_number(config.reward.lambda1) << '\n'
            << "lambda2: " << format_number(config.reward.lambda2) << '\n'
            << "seed: " << config.seed << '\n'
            << "records: " << result.trace.size() << '\n';
  if (!result.trace.empty()) {
    const auto& last = result.trace.back();
    std::cout << "final_mean_reward: " << format_number(last.mean_reward) << '\n'
              << "final_p_best: " << format_number(last.p_best) << '\n';
  }
  if (config.run_grpo) {
    std::cout << "grpo_steps_to_p_best_0.9: " << steps_to_threshold(result.trace, 0.9) << '\n';
  }
  if (!opt.trace_out.empty()) {
    std::ofstream out(opt.trace_out);
    if (!out) throw CommandError{kExitInput, "cannot write trace: " + opt.trace_out};
    write_trace_csv(out, result.trace);
  }
  return kExitOk;
}

int run_serve(const std::string& dataset, const std::string& config_path) {
  const RewardConfig config = reward_config_or_fail(config_path);
  const auto instances = load_or_fail(dataset);
  const InstanceIndex index = index_instances(instances);
  serve_loop(std::cin, std::cout, index, config);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity-aware grounding reward engine and toy GRPO harness"};
  app.require_subcommand(1);

  ScoreOptions score;
  auto* score_cmd = app.add_subcommand("score", "Score completions against a dataset");
  score_cmd->add_option("completions", score.completions, "JSONL {id, completion}")->required();
  score_cmd->add_option("dataset", score.dataset, "Dataset JSONL")->required();
  score_cmd->add_option("--config", score.config, "Reward config JSON");
  score_cmd->add_option("--format", score.format, "Output format")
      ->check(CLI::IsMember({"text", "record"}));

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Acc@t for subjects and objects");
  eval_cmd->add_option("predictions", eval.predictions, "JSONL {id, completion}")->required();
  eval_cmd->add_option("dataset", eval.dataset, "Dataset JSONL")->required();
  eval_cmd->add_option("--threshold", eval.threshold, "IoU threshold (strict)");
  eval_cmd->add_option("--out", eval.out, "Also write the report as a JSON record");
  eval_cmd->add_option("--split", eval.split, "Instances to evaluate")
      ->check(CLI::IsMember({"all", "train", "test"}));
  eval_cmd->add_option("--format", eval.format, "Output format")
      ->check(CLI::IsMember({"text", "record"}));
  eval_cmd->add_flag("-v,--verbose", eval.verbose, "Per-instance detail");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a dataset file");
  validate_cmd->add_option("dataset", validate_path, "Dataset JSONL")->required();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train-toy", "SFT + GRPO on the tabular toy policy");
  train_cmd->add_option("dataset", train.dataset, "Dataset JSONL (synthetic task if omitted)");
  train_cmd->add_option("--config", train.config, "Reward config JSON");
  train_cmd->add_option("--trace-out", train.trace_out, "CSV training trace");
  train_cmd->add_flag("--grpo-only", train.grpo_only, "Skip SFT; format weights 0.5/0.5");
  train_cmd->add_flag("--sft-only", train.sft_only, "Run stage I only");
  train_cmd->add_option("--steps", train.steps, "GRPO steps");
  train_cmd->add_option("--sft-steps", train.sft_steps, "SFT steps");
  train_cmd->add_option("--lr", train.learning_rate, "GRPO initial step size");
  train_cmd->add_option("--sft-lr", train.sft_learning_rate, "SFT step size");
  train_cmd->add_option("--kl-beta", train.kl_beta, "KL weight");
  train_cmd->add_option("--group-size", train.group_size, "Completions per group");
  train_cmd->add_option("--prior", train.prior_strength, "Grammar prior of the base policy");
  train_cmd->add_option("--world", train.world,
                        "Token world (default: two-completion without a dataset, "
                        "chunks with one)")
      ->check(CLI::IsMember({"chunks", "two-completion"}));
  train_cmd->add_option("--seed", train.seed, "Random seed");

  std::string serve_dataset;
  std::string serve_config;
  auto* serve_cmd = app.add_subcommand("serve", "Score requests read line by line from stdin");
  serve_cmd->add_option("dataset", serve_dataset, "Dataset JSONL")->required();
  serve_cmd->add_option("--config", serve_config, "Reward config JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (score_cmd->parsed()) return run_score(score);
    if (eval_cmd->parsed()) return run_evaluate(eval);
    if (validate_cmd->parsed()) return run_validate(validate_path);
    if (train_cmd->parsed()) return run_train_toy(train);
    if (serve_cmd->parsed()) return run_serve(serve_dataset, serve_config);
  } catch (const CommandError& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}
