#include "ksgrank/pipeline.hpp"
#include "ksgrank/selfcheck.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config, "pipeline config file (JSON)")->required();
  cmd->add_option("--set", opts.overrides,
                  "override a config entry, e.g. --set train.lr=0.001 (repeatable)");
  cmd->add_option("--seed", opts.seed, "override the run seed");
}

ksgrank::PipelineConfig make_config(const CommonOpts& opts) {
  return ksgrank::PipelineConfig::from_file(opts.config, opts.overrides, opts.seed);
}

int print_results(const std::vector<ksgrank::selfcheck::CheckResult>& results) {
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("[%s] %-22s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-subgraph partitioning, ranking and answer selection"};
  app.require_subcommand(1);

  CommonOpts opts;
  using Stage = std::function<void(const ksgrank::PipelineConfig&)>;
  const std::vector<std::pair<const char*, Stage>> stage_commands = {
      {"ingest", ksgrank::stages::ingest},
      {"retrieve", ksgrank::stages::retrieve},
      {"partition", ksgrank::stages::partition},
      {"make-pairs", ksgrank::stages::make_pairs},
      {"train-ranker", ksgrank::stages::train_ranker},
      {"rank", ksgrank::stages::rank},
      {"merge", ksgrank::stages::merge},
      {"train-answerer", ksgrank::stages::train_answerer},
      {"evaluate", ksgrank::stages::evaluate},
  };
  const char* const stage_help[] = {
      "load and index the knowledge graph and questions",
      "k-hop retrieval of question-specific KSGs",
      "partition KSGs into labeled sub-KSGs",
      "build training pairs with negative sampling",
      "train the ranking model",
      "score and rank every sub-KSG",
      "merge top-ranked sub-KSGs per question",
      "train the answer-selection classifier",
      "compute ranking and answer metrics",
  };

  Stage selected;
  std::size_t help_idx = 0;
  for (const auto& [name, fn] : stage_commands) {
    CLI::App* cmd = app.add_subcommand(name, stage_help[help_idx++]);
    add_common(cmd, opts);
    cmd->callback([&selected, fn = fn]() { selected = fn; });
  }
  CLI::App* run_cmd = app.add_subcommand("run", "run every stage in order");
  add_common(run_cmd, opts);
  run_cmd->callback([&selected]() { selected = ksgrank::run_pipeline; });

  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference verification of every differentiable op");

  std::string source_dir = ".";
  std::string scratch_dir;
  bool quick = false;
  CLI::App* selftest_cmd = app.add_subcommand("selftest", "run the full oracle suite");
  selftest_cmd->add_option("--source-dir", source_dir, "repository root holding data/ and configs/");
  selftest_cmd->add_option("--scratch", scratch_dir, "scratch directory for pipeline runs");
  selftest_cmd->add_flag("--quick", quick, "skip the end-to-end pipeline checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gradcheck_cmd->parsed()) {
      return print_results({ksgrank::selfcheck::check_gradients()});
    }
    if (selftest_cmd->parsed()) {
      const fs::path root = fs::absolute(source_dir);
      fs::path scratch = scratch_dir.empty() ? fs::temp_directory_path() / "ksgrank-selftest"
                                             : fs::path(scratch_dir);
      fs::remove_all(scratch);
      fs::create_directories(scratch);
      return print_results(ksgrank::selfcheck::run_all(root, scratch, quick));
    }
    selected(make_config(opts));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
