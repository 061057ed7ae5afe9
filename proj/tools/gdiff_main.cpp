// Command-line front end: dataset generation, labeling, training, solving,
// evaluation and sweeps.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gdiff/checkpoint.hpp"
#include "gdiff/decoding.hpp"
#include "gdiff/harness.hpp"
#include "gdiff/instances.hpp"
#include "gdiff/oracle.hpp"
#include "gdiff/training.hpp"

namespace {

using namespace gdiff;

struct DecodeFlags {
  int steps = 50;
  int samples = 1;
  std::string schedule = "cosine";
  bool two_opt = false;
  int sparse_k = 0;
  std::string continuous_mode = "ddim";
  bool argmax_chain = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("--steps", steps, "Inference steps M")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--samples", samples, "Independent chains K per instance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd.add_option("--schedule", schedule, "Inference schedule")
        ->check(CLI::IsMember({"linear", "cosine"}))
        ->capture_default_str();
    cmd.add_flag("--two-opt", two_opt, "Refine TSP tours with 2-opt");
    cmd.add_option("--sparse-k", sparse_k, "TSP k-nearest-neighbour sparsification (0 = dense)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd.add_option("--continuous-mode", continuous_mode, "Reverse update of the continuous branch")
        ->check(CLI::IsMember({"ddim", "ddpm"}))
        ->capture_default_str();
    cmd.add_flag("--argmax-chain", argmax_chain, "Discrete branch: take the posterior mode at every hop");
  }

  DecodeConfig config(std::uint64_t seed) const {
    DecodeConfig cfg;
    cfg.steps = steps;
    cfg.samples = samples;
    cfg.schedule = parse_schedule_kind(schedule);
    cfg.two_opt = two_opt;
    cfg.sparse_k = sparse_k;
    cfg.chain.continuous_mode = continuous_mode == "ddpm" ? ContinuousMode::Ddpm : ContinuousMode::Ddim;
    cfg.chain.discrete_mode = argmax_chain ? StepMode::Argmax : StepMode::Sample;
    cfg.seed = seed;
    return cfg;
  }
};

struct ModelFlags {
  std::string model;
  std::string task;
  std::string branch;

  void attach(CLI::App& cmd) {
    cmd.add_option("--model", model, "Checkpoint file")->required()->check(CLI::ExistingFile);
    cmd.add_option("--task", task, "Expected task of the checkpoint")->check(CLI::IsMember({"tsp", "mis"}));
    cmd.add_option("--branch", branch, "Expected branch of the checkpoint")
        ->check(CLI::IsMember({"discrete", "continuous"}));
  }

  DenoiserParams load() const {
    DenoiserParams params = load_checkpoint(model);
    if (!task.empty() && parse_task(task) != params.config.task)
      throw std::invalid_argument("checkpoint task is " + std::string(to_string(params.config.task)));
    if (!branch.empty() && parse_branch(branch) != params.config.branch)
      throw std::invalid_argument("checkpoint branch is " + std::string(to_string(params.config.branch)));
    return params;
  }
};

std::vector<int> parse_int_list(const std::string& text, const char* flag) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || value < 1)
      throw CLI::ValidationError(flag, "expected a comma-separated list of positive integers");
    out.push_back(value);
    pos = comma + 1;
  }
  return out;
}

void print_summary(const EvalReport& report) {
  std::printf("instances=%zu mean_%s=%.6f", report.records.size(), report.task == Task::Tsp ? "length" : "size",
              report.mean_objective);
  if (report.mean_gap) std::printf(" mean_gap_percent=%.6f", *report.mean_gap);
  std::printf("\n");
  std::fprintf(stderr, "total_seconds=%.3f\n", report.total_seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph diffusion solver for TSP and MIS"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::uint64_t seed = 0;
  std::string in_path, out_path;

  // generate
  auto* generate = app.add_subcommand("generate", "Write random instances");
  std::string gen_task = "tsp";
  int gen_count = 100, gen_nodes = 10, gen_nodes_max = 0;
  double gen_p = 0.3;
  generate->add_option("--task", gen_task, "Problem")->check(CLI::IsMember({"tsp", "mis"}))->capture_default_str();
  generate->add_option("--count", gen_count, "Number of instances")->check(CLI::PositiveNumber)->capture_default_str();
  generate->add_option("--nodes", gen_nodes, "Node count (MIS: minimum)")->check(CLI::PositiveNumber)->capture_default_str();
  generate->add_option("--nodes-max", gen_nodes_max, "MIS maximum node count (default: --nodes)");
  generate->add_option("--p", gen_p, "MIS edge probability")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  generate->add_option("--seed", seed, "Root seed")->capture_default_str();
  generate->add_option("--out", out_path, "Output instance file")->required();

  // label
  auto* label = app.add_subcommand("label", "Attach reference solutions (exact when small enough)");
  int label_restarts = 16;
  label->add_option("--in", in_path, "Instance file")->required()->check(CLI::ExistingFile);
  label->add_option("--out", out_path, "Labeled instance file")->required();
  label->add_option("--restarts", label_restarts, "TSP heuristic restarts above the exact size cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  label->add_option("--seed", seed, "Root seed")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a denoiser from a key = value config");
  std::string config_path, train_task, train_branch;
  std::optional<std::uint64_t> train_seed;
  train_cmd->add_option("--config", config_path, "Training config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--task", train_task, "Override the config task")->check(CLI::IsMember({"tsp", "mis"}));
  train_cmd->add_option("--branch", train_branch, "Override the config branch")
      ->check(CLI::IsMember({"discrete", "continuous"}));
  train_cmd->add_option("--seed", train_seed, "Override the config seed");
  train_cmd->add_option("--in", in_path, "Override the training set path")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_path, "Override the checkpoint path");

  // solve
  auto* solve = app.add_subcommand("solve", "Decode every instance with a trained model");
  ModelFlags solve_model;
  DecodeFlags solve_decode;
  solve_model.attach(*solve);
  solve_decode.attach(*solve);
  solve->add_option("--in", in_path, "Instance file")->required()->check(CLI::ExistingFile);
  solve->add_option("--out", out_path, "Solution file")->required();
  solve->add_option("--seed", seed, "Root seed")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Solve a labeled set and report gaps");
  ModelFlags eval_model;
  DecodeFlags eval_decode;
  int eval_seeds = 1;
  std::string plot_path, timing_path;
  eval_model.attach(*eval);
  eval_decode.attach(*eval);
  eval->add_option("--in", in_path, "Instance file")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out_path, "Report CSV (id,seed,objective,gap)")->required();
  eval->add_option("--seeds", eval_seeds, "Evaluation seeds per instance")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--plot", plot_path, "Plot CSV (x,series,value)");
  eval->add_option("--timing", timing_path, "Per-phase wall-clock CSV");
  eval->add_option("--seed", seed, "Root seed")->capture_default_str();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid of inference steps x samples");
  ModelFlags sweep_model;
  DecodeFlags sweep_decode;
  std::string sweep_steps = "1,2,5,10", sweep_samples = "1,4,16";
  int sweep_seeds = 1;
  sweep_model.attach(*sweep_cmd);
  sweep_decode.attach(*sweep_cmd);
  sweep_cmd->remove_option(sweep_cmd->get_option("--steps"));
  sweep_cmd->remove_option(sweep_cmd->get_option("--samples"));
  sweep_cmd->add_option("--steps", sweep_steps, "Comma-separated inference step counts")->capture_default_str();
  sweep_cmd->add_option("--samples", sweep_samples, "Comma-separated sample counts")->capture_default_str();
  sweep_cmd->add_option("--seeds", sweep_seeds, "Evaluation seeds per cell")->check(CLI::PositiveNumber)->capture_default_str();
  sweep_cmd->add_option("--in", in_path, "Labeled instance file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", out_path, "Grid CSV (x=steps, series=samples, value=mean gap)")->required();
  sweep_cmd->add_option("--seed", seed, "Root seed")->capture_default_str();

  // export-heatmap
  auto* heat = app.add_subcommand("export-heatmap", "Write one reverse-chain heatmap per instance");
  ModelFlags heat_model;
  DecodeFlags heat_decode;
  heat_model.attach(*heat);
  heat_decode.attach(*heat);
  heat->add_option("--in", in_path, "Instance file")->required()->check(CLI::ExistingFile);
  heat->add_option("--out", out_path, "Heatmap file")->required();
  heat->add_option("--seed", seed, "Root seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*generate) {
      std::vector<Instance> instances;
      const Task task = parse_task(gen_task);
      for (int i = 0; i < gen_count; ++i) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
        if (task == Task::Tsp) {
          TspInstance inst = generate_tsp(gen_nodes, s);
          inst.id = std::to_string(i);
          instances.emplace_back(std::move(inst));
        } else {
          const int hi = gen_nodes_max > 0 ? gen_nodes_max : gen_nodes;
          if (hi < gen_nodes) throw std::invalid_argument("--nodes-max must be >= --nodes");
          MisInstance inst = generate_er(gen_nodes, hi, gen_p, s);
          inst.id = std::to_string(i);
          instances.emplace_back(std::move(inst));
        }
      }
      save_instances(out_path, instances);
    } else if (*label) {
      auto instances = load_instances(in_path);
      int exact = 0;
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const std::uint64_t s = derive_seed(seed, i);
        if (auto* tsp = std::get_if<TspInstance>(&instances[i])) {
          const OracleReport r = label_tsp(*tsp, label_restarts, s);
          tsp->label = r.tour();
          exact += r.exact;
        } else {
          auto& mis = std::get<MisInstance>(instances[i]);
          const OracleReport r = label_mis(mis, s);
          mis.label = r.independent_set();
          exact += r.exact;
        }
      }
      save_instances(out_path, instances);
      std::fprintf(stderr, "labeled %zu instances (%d exact)\n", instances.size(), exact);
    } else if (*train_cmd) {
      TrainConfig cfg = load_train_config(config_path);
      if (!train_task.empty()) cfg.task = parse_task(train_task);
      if (!train_branch.empty()) cfg.branch = parse_branch(train_branch);
      if (train_seed) cfg.seed = *train_seed;
      if (!in_path.empty()) cfg.train_path = in_path;
      if (!out_path.empty()) cfg.checkpoint_path = out_path;
      if (cfg.checkpoint_path.empty()) throw std::invalid_argument("no checkpoint path (config checkpoint_path or --out)");
      const TrainResult result = train(cfg);
      for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        std::fprintf(stderr, "epoch %zu mean_loss=%.6f\n", e + 1, result.epoch_loss[e]);
    } else if (*solve) {
      const DenoiserParams params = solve_model.load();
      const NetworkDenoiser model(params);
      const NoiseSchedule sched = params.config.noise_schedule();
      const auto instances = load_instances(in_path);
      std::string text;
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const DecodeConfig cfg = solve_decode.config(derive_seed(derive_seed(seed, 0), i));
        const SolveResult r = multi_sample_solve(model, sched, instances[i], cfg);
        validate_solution(instances[i], r.best);
        const std::string& id = std::visit([](const auto& inst) -> const std::string& { return inst.id; }, instances[i]);
        text += format_solution(id, r.best) + '\n';
      }
      write_text(out_path, text);
    } else if (*eval) {
      const DenoiserParams params = eval_model.load();
      const NetworkDenoiser model(params);
      const NoiseSchedule sched = params.config.noise_schedule();
      const auto instances = load_instances(in_path);
      const EvalReport report =
          evaluate(model_solver(model, sched, eval_decode.config(seed)), instances, eval_seeds, seed);
      write_text(out_path, report_csv(report));
      if (!plot_path.empty()) emit_plot_data(report, plot_path);
      if (!timing_path.empty()) write_text(timing_path, timing_csv(report));
      print_summary(report);
    } else if (*sweep_cmd) {
      const auto steps = parse_int_list(sweep_steps, "--steps");
      const auto samples = parse_int_list(sweep_samples, "--samples");
      const DenoiserParams params = sweep_model.load();
      const NetworkDenoiser model(params);
      const NoiseSchedule sched = params.config.noise_schedule();
      const auto instances = load_instances(in_path);
      const auto cells = sweep(model, sched, instances, sweep_decode.config(seed), steps, samples, sweep_seeds);
      emit_plot_data(cells, out_path);
    } else if (*heat) {
      const DenoiserParams params = heat_model.load();
      const NetworkDenoiser model(params);
      const NoiseSchedule sched = params.config.noise_schedule();
      const auto instances = load_instances(in_path);
      const DecodeConfig cfg = heat_decode.config(seed);
      const InferenceSchedule inf = make_inference_schedule(cfg.steps, sched.steps(), cfg.schedule);
      std::string text;
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const ProblemGraph graph = problem_graph(instances[i], cfg.sparse_k);
        Rng rng(derive_seed(derive_seed(seed, 0), i));
        const ChainResult chain = run_reverse_chain(model, sched, inf, graph, rng, cfg.chain);
        const std::string& id = std::visit([](const auto& inst) -> const std::string& { return inst.id; }, instances[i]);
        text += format_heatmap(id, chain.heatmap, graph) + '\n';
      }
      write_text(out_path, text);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gdiff: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
