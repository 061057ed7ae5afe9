// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "gdiff/checkpoint.hpp"
#include "gdiff/decoding.hpp"
#include "gdiff/denoiser.hpp"
#include "gdiff/diffusion.hpp"
#include "gdiff/harness.hpp"
#include "gdiff/oracle.hpp"
#include "gdiff/training.hpp"
#include "support.hpp"

#ifndef GDIFF_CLI_PATH
#error "GDIFF_CLI_PATH must name the gdiff executable"
#endif

using namespace gdiff;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- criterion 1

// Probability of the single-variable path x0 -> ... -> x_t with x_{t_prev} = k
// and x_t = s, summed over all 2^t intermediate state sequences.
double path_joint(const NoiseSchedule& sched, int x0, int t_prev, int k, int t, int s) {
  double total = 0.0;
  for (std::uint32_t bits = 0; bits < (1u << t); ++bits) {
    if (static_cast<int>(bits >> (t - 1) & 1u) != s) continue;
    if (t_prev > 0 && static_cast<int>(bits >> (t_prev - 1) & 1u) != k) continue;
    if (t_prev == 0 && x0 != k) continue;
    double p = 1.0;
    int prev = x0;
    for (int step = 1; step <= t; ++step) {
      const int cur = static_cast<int>(bits >> (step - 1) & 1u);
      p *= cur == prev ? 1.0 - sched.beta(step) : sched.beta(step);
      prev = cur;
    }
    total += p;
  }
  return total;
}

Outcome diffusion_math() {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> beta(0.02, 0.6);
  std::vector<double> betas(12);
  for (auto& b : betas) b = beta(gen);
  const auto sched = NoiseSchedule::from_betas(betas);

  double posterior_err = 0.0, ck_err = 0.0;
  Rng rng(2);
  for (int t = 1; t <= 12; ++t) {
    for (int x0 = 0; x0 < 2; ++x0) {
      const std::uint8_t bit = static_cast<std::uint8_t>(x0);
      const auto row = discrete_forward_marginal(std::span(&bit, 1), t, sched)[0];
      for (int s = 0; s < 2; ++s) ck_err = std::max(ck_err, std::abs(row[s] - path_joint(sched, x0, 0, x0, t, s)));
      // Composition through every intermediate time.
      for (int mid = 1; mid < t; ++mid) {
        const Mat2 composed = sched.q_bar(mid) * sched.q_bar_between(mid, t);
        for (int s = 0; s < 2; ++s) ck_err = std::max(ck_err, std::abs(composed[x0][s] - sched.q_bar(t)[x0][s]));
      }
    }
    for (int t_prev = 0; t_prev < t; ++t_prev) {
      for (int trial = 0; trial < 4; ++trial) {
        const double p1 = trial == 0 ? 0.0 : trial == 1 ? 1.0 : uniform01(rng);
        const std::vector<CatRow> probs = {{1.0 - p1, p1}};
        for (int s = 0; s < 2; ++s) {
          const std::vector<std::uint8_t> xt = {static_cast<std::uint8_t>(s)};
          const auto post = discrete_posterior(xt, probs, t_prev, t, sched)[0];
          for (int k = 0; k < 2; ++k) {
            double expect = 0.0;
            for (int x0 = 0; x0 < 2; ++x0) {
              if (probs[0][x0] == 0.0) continue;
              expect += probs[0][x0] * path_joint(sched, x0, t_prev, k, t, s) / path_joint(sched, x0, 0, x0, t, s);
            }
            posterior_err = std::max(posterior_err, std::abs(post[k] - expect));
          }
        }
      }
    }
  }

  const auto full = NoiseSchedule::linear(1000, 1e-4, 0.02);
  double ddim_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int t = 1 + static_cast<int>(rng() % 1000);
    std::vector<double> x0(64);
    for (auto& v : x0) v = 2.0 * uniform01(rng) - 1.0;
    const auto noised = continuous_forward_sample(std::span<const double>(x0), t, full, rng);
    const auto out = continuous_reverse_step(noised.xt, noised.eps, 0, t, full, ContinuousMode::Ddim, rng);
    for (std::size_t i = 0; i < x0.size(); ++i) ddim_err = std::max(ddim_err, std::abs(out[i] - x0[i]));
  }
  return {posterior_err < 1e-10 && ck_err < 1e-10 && ddim_err < 1e-9,
          "posterior max err " + fmt(posterior_err) + ", composition max err " + fmt(ck_err) + ", DDIM max err " +
              fmt(ddim_err)};
}

// ---------------------------------------------------------------- criterion 2

std::set<std::pair<int, int>> tour_edges(const std::vector<int>& order) {
  std::set<std::pair<int, int>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int a = order[i], b = order[(i + 1) % order.size()];
    out.insert({std::min(a, b), std::max(a, b)});
  }
  return out;
}

Outcome oracle_denoiser() {
  const auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Rng rng(3);
  int chains = 0, exact = 0;
  for (int i = 0; i < 1000; ++i) {
    const bool tsp = i % 2 == 0;
    Instance inst;
    std::vector<std::uint8_t> label;
    ProblemGraph graph;
    if (tsp) {
      auto t = generate_tsp(4 + static_cast<int>(rng() % 9), derive_seed(30, i));
      t.label = solve_tsp_exact(t).tour();
      graph = problem_graph(t, 0);
      label = tsp_label_bits(graph, *t.label);
      inst = t;
    } else {
      auto m = generate_er(5, 25, 0.1 + 0.3 * uniform01(rng), derive_seed(31, i));
      m.label = solve_mis_exact(m).independent_set();
      graph = problem_graph(m, 0);
      label = mis_label_bits(m.n, *m.label);
      inst = m;
    }
    for (Branch branch : {Branch::Discrete, Branch::Continuous}) {
      const LabelDenoiser model(graph.task, branch, label, sched);
      for (ScheduleKind kind : {ScheduleKind::Linear, ScheduleKind::Cosine})
        for (int m : {1, 5, 10, 50}) {
          Rng chain_rng(derive_seed(32, static_cast<std::uint64_t>(chains)));
          const auto chain = run_reverse_chain(model, sched, make_inference_schedule(m, 1000, kind), graph, chain_rng);
          bool ok = chain.x0 == label;
          if (tsp) {
            const auto& t = std::get<TspInstance>(inst);
            ok = ok && tour_edges(tsp_greedy_decode(chain.heatmap, t, graph).order) == tour_edges(t.label->order);
          } else {
            const auto& g = std::get<MisInstance>(inst);
            ok = ok && mis_greedy_decode(chain.heatmap, g).nodes == g.label->nodes;
          }
          ++chains;
          if (ok) ++exact;
        }
    }
  }
  return {exact == chains, std::to_string(exact) + "/" + std::to_string(chains) +
                               " chains recovered the label (1000 instances x 16 settings)"};
}

// ---------------------------------------------------------------- criterion 3

Outcome gradient_check() {
  int good = 0, total = 0;
  double worst = 0.0;
  for (Task task : {Task::Tsp, Task::Mis})
    for (Branch branch : {Branch::Discrete, Branch::Continuous}) {
      ModelConfig cfg;
      cfg.task = task;
      cfg.branch = branch;
      cfg.layers = 2;
      cfg.width = 8;
      auto p = init_params(cfg, 41);
      const ProblemGraph g = task == Task::Tsp ? problem_graph(generate_tsp(6, 41), 0)
                                               : problem_graph(generate_er(8, 8, 0.4, 41), 0);
      const GraphBatch batch = make_batch(g, 300);
      Rng rng(42);
      std::vector<double> xt(g.num_variables());
      for (auto& v : xt) v = branch == Branch::Discrete ? (uniform01(rng) < 0.5 ? 0.0 : 1.0) : 2.0 * uniform01(rng) - 1.0;
      std::vector<double> w(static_cast<std::size_t>(g.num_variables()) * cfg.output_width());
      for (auto& v : w) v = 2.0 * uniform01(rng) - 1.0;
      auto objective = [&](const DenoiserParams& params) {
        const auto out = forward(params, batch, xt, true, kernels::Backend::Serial).outputs;
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
        return s;
      };
      const auto fr = forward(p, batch, xt, true, kernels::Backend::Serial);
      const auto grad = backward(p, fr.cache, w);
      const double h = 1e-4;
      for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double saved = p.values[i];
        p.values[i] = saved + h;
        const double up = objective(p);
        p.values[i] = saved - h;
        const double down = objective(p);
        p.values[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double rel = std::abs(numeric - grad[i]) / std::max(1e-6, std::abs(numeric) + std::abs(grad[i]));
        worst = std::max(worst, rel);
        ++total;
        if (rel < 1e-4) ++good;
      }
    }
  const double fraction = static_cast<double>(good) / total;
  return {fraction >= 0.99, std::to_string(good) + "/" + std::to_string(total) +
                                " coordinates within 1e-4 relative error (worst " + fmt(worst, 3) + ")"};
}

// ---------------------------------------------------------------- criterion 4

Outcome decoder_fuzz() {
  Rng rng(5);
  auto scores = [&](std::size_t count, int mode) {
    std::vector<double> s(count);
    for (auto& v : s) {
      switch (mode) {
        case 0: v = 0.0; break;
        case 1: v = 1.0; break;
        case 2: v = 0.5; break;
        case 3: v = std::floor(uniform01(rng) * 4.0) / 3.0; break;
        default: v = uniform01(rng); break;
      }
    }
    return s;
  };
  int tsp_bad = 0, two_opt_worse = 0, mis_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto inst = generate_tsp(3 + static_cast<int>(rng() % 28), derive_seed(50, i));
    const int k = i % 3 == 0 ? 0 : 1 + static_cast<int>(rng() % 5);
    const auto graph = problem_graph(inst, k);
    const Tour tour = tsp_greedy_decode({Task::Tsp, scores(graph.num_edges(), i % 5)}, inst, graph);
    if (!is_valid_tour(inst.n, tour.order) || std::abs(tour.length - tour_length(inst.coords, tour.order)) > 1e-9)
      ++tsp_bad;
    if (two_opt(tour, inst).length > tour.length + 1e-12) ++two_opt_worse;

    const auto mis = generate_er(2, 60, 0.02 + 0.5 * uniform01(rng), derive_seed(51, i));
    const auto set = mis_greedy_decode({Task::Mis, scores(mis.n, i % 5)}, mis);
    if (!is_maximal_independent_set(mis, set.nodes)) ++mis_bad;
  }
  int one_hot_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = generate_tsp(4 + i % 9, derive_seed(52, i));
    const auto graph = problem_graph(inst, 0);
    const Tour label = solve_tsp_exact(inst).tour();
    const auto bits = tsp_label_bits(graph, label);
    const Tour decoded = tsp_greedy_decode({Task::Tsp, std::vector<double>(bits.begin(), bits.end())}, inst, graph);
    if (tour_edges(decoded.order) != tour_edges(label.order)) ++one_hot_bad;
  }
  return {tsp_bad == 0 && two_opt_worse == 0 && mis_bad == 0 && one_hot_bad == 0,
          "infeasible tours " + std::to_string(tsp_bad) + "/10000, 2-opt increases " + std::to_string(two_opt_worse) +
              ", infeasible sets " + std::to_string(mis_bad) + "/10000, one-hot mismatches " +
              std::to_string(one_hot_bad) + "/1000"};
}

// ------------------------------------------------------------ criteria 5 to 7

constexpr int kToyLayers = 8;
constexpr int kToyWidth = 64;

std::vector<Instance> labeled_set(Task task, int count, std::uint64_t root) {
  std::vector<Instance> out(count);
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < count; ++i) {
    if (task == Task::Tsp) {
      auto inst = generate_tsp(10, derive_seed(root, i));
      inst.id = std::to_string(i);
      inst.label = solve_tsp_exact(inst).tour();
      out[i] = inst;
    } else {
      auto inst = generate_er(20, 20, 0.3, derive_seed(root, i));
      inst.id = std::to_string(i);
      inst.label = solve_mis_exact(inst).independent_set();
      out[i] = inst;
    }
  }
  return out;
}

std::vector<TrainingExample> examples_of(const std::vector<Instance>& set) {
  std::vector<TrainingExample> out;
  for (const auto& inst : set) {
    if (const auto* t = std::get_if<TspInstance>(&inst))
      out.push_back(make_example(*t, 0));
    else
      out.push_back(make_example(std::get<MisInstance>(inst)));
  }
  return out;
}

TrainConfig toy_config(Task task) {
  TrainConfig cfg;
  cfg.task = task;
  cfg.branch = Branch::Discrete;
  cfg.diffusion_steps = 1000;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.learning_rate = 2e-3;
  cfg.layers = kToyLayers;
  cfg.width = kToyWidth;
  cfg.seed = 7;
  return cfg;
}

double mean_gap(const DenoiserParams& params, const std::vector<Instance>& set, int steps, int samples, bool refine) {
  const NetworkDenoiser model(params);
  const NoiseSchedule sched = params.config.noise_schedule();
  DecodeConfig dc;
  dc.steps = steps;
  dc.samples = samples;
  dc.two_opt = refine;
  return *evaluate(model_solver(model, sched, dc), set, 1, 11).mean_gap;
}

struct ToyModels {
  DenoiserParams trained;
  DenoiserParams untrained;
  std::vector<Instance> held_out;
  std::string training_note;
};

ToyModels train_toy(Task task, std::uint64_t train_root, std::uint64_t test_root) {
  const auto train_set = labeled_set(task, 5000, train_root);
  ToyModels out;
  out.held_out = labeled_set(task, 256, test_root);
  const auto examples = examples_of(train_set);
  auto cfg = toy_config(task);
  const auto start = std::chrono::steady_clock::now();
  auto result = train(cfg, examples);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.trained = std::move(result.state.params);
  out.untrained = init_params(cfg.model(), derive_seed(cfg.seed, 1));
  out.training_note = "epoch loss " + fmt(result.epoch_loss.front()) + " -> " + fmt(result.epoch_loss.back()) +
                      ", training " + fmt(seconds, 3) + " s";
  return out;
}

std::optional<ToyModels> tsp_models;

Outcome toy_tsp() {
  tsp_models = train_toy(Task::Tsp, 60, 61);
  const double trained = mean_gap(tsp_models->trained, tsp_models->held_out, 50, 1, true);
  const double untrained = mean_gap(tsp_models->untrained, tsp_models->held_out, 50, 1, true);
  return {trained <= 5.0 && trained < untrained, "gap " + fmt(trained) + "% vs untrained " + fmt(untrained) +
                                                     "% (256 held-out, M=50 K=1 + 2-opt); " + tsp_models->training_note};
}

Outcome steps_vs_samples() {
  if (!tsp_models) tsp_models = train_toy(Task::Tsp, 60, 61);
  const std::vector<Instance> subset(tsp_models->held_out.begin(), tsp_models->held_out.begin() + 100);
  const auto& p = tsp_models->trained;
  const double m10k16 = mean_gap(p, subset, 10, 16, true);
  const double m1k16 = mean_gap(p, subset, 1, 16, true);
  const double m50k1 = mean_gap(p, subset, 50, 1, true);
  const double m1k1 = mean_gap(p, subset, 1, 1, true);
  // Decided on the 2-opt numbers; the raw greedy pair is reported for context only.
  const double raw50 = mean_gap(p, subset, 50, 1, false);
  const double raw1 = mean_gap(p, subset, 1, 1, false);
  return {m10k16 <= m1k16 && m50k1 <= m1k1, "(M=10,K=16) " + fmt(m10k16) + "% vs (M=1,K=16) " + fmt(m1k16) +
                                                "%; (M=50,K=1) " + fmt(m50k1) + "% vs (M=1,K=1) " + fmt(m1k1) +
                                                "% [greedy only: M=50 " + fmt(raw50) + "%, M=1 " + fmt(raw1) + "%]"};
}

Outcome toy_mis() {
  const auto models = train_toy(Task::Mis, 70, 71);
  const double trained = mean_gap(models.trained, models.held_out, 50, 1, false);
  const double untrained = mean_gap(models.untrained, models.held_out, 50, 1, false);
  return {trained <= 10.0 && trained < untrained, "gap " + fmt(trained) + "% vs untrained " + fmt(untrained) +
                                                      "% (256 held-out, M=50 K=1 greedy); " + models.training_note};
}

// ---------------------------------------------------------------- criterion 8

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome cli_determinism() {
  testing::TempPath root("determinism");
  const std::string cli = GDIFF_CLI_PATH;
  std::vector<std::string> compared;
  std::string failures;
  for (int run = 0; run < 2; ++run) {
    const auto dir = root.path() / ("run" + std::to_string(run));
    std::filesystem::create_directories(dir);
    {
      std::ofstream cfg(dir / "train.cfg");
      cfg << "task = tsp\nepochs = 1\nbatch_size = 8\nlayers = 2\nwidth = 16\nlearning_rate = 1e-3\n"
             "train_path = tsp_l.txt\ncheckpoint_path = model.ckpt\n";
    }
    const std::vector<std::string> commands = {
        "generate --task tsp --count 40 --nodes 8 --seed 9 --out tsp.txt",
        "generate --task mis --count 10 --nodes 12 --nodes-max 16 --p 0.3 --seed 9 --out mis.txt",
        "label --in tsp.txt --out tsp_l.txt --seed 9",
        "label --in mis.txt --out mis_l.txt --seed 9",
        "train --config train.cfg --seed 9",
        "solve --model model.ckpt --in tsp_l.txt --out solve.txt --steps 10 --samples 3 --two-opt --seed 9",
        "solve --model model.ckpt --in tsp_l.txt --out solve_argmax.txt --steps 5 --argmax-chain --seed 9",
        "eval --model model.ckpt --in tsp_l.txt --out report.csv --plot plot.csv --steps 5 --samples 2 --seeds 2 --seed 9",
        "sweep --model model.ckpt --in tsp_l.txt --out sweep.csv --steps 1,5 --samples 1,4 --seed 9",
        "export-heatmap --model model.ckpt --in tsp_l.txt --out heat.txt --steps 5 --seed 9",
    };
    for (const auto& c : commands) {
      const std::string line = "cd '" + dir.string() + "' && '" + cli + "' " + c + " >/dev/null 2>&1";
      if (std::system(line.c_str()) != 0) failures += " [" + c + " failed]";
    }
  }
  const std::vector<std::string> files = {"tsp.txt", "mis.txt", "tsp_l.txt", "mis_l.txt", "model.ckpt", "solve.txt",
                                          "solve_argmax.txt", "report.csv", "plot.csv", "sweep.csv", "heat.txt"};
  int identical = 0;
  for (const auto& f : files) {
    const auto a = slurp(root.path() / "run0" / f);
    const auto b = slurp(root.path() / "run1" / f);
    if (!a.empty() && a == b)
      ++identical;
    else
      failures += " [" + f + " differs or is empty]";
  }
  return {failures.empty(), std::to_string(identical) + "/" + std::to_string(files.size()) +
                                " output files byte-identical across two runs" + failures};
}

// ---------------------------------------------------------------- criterion 9

Outcome metric_fidelity() {
  std::vector<Instance> set;
  for (int i = 0; i < 50; ++i) {
    auto t = generate_tsp(9, derive_seed(90, i));
    t.id = "t" + std::to_string(i);
    t.label = solve_tsp_exact(t).tour();
    set.push_back(t);
  }
  std::vector<Instance> mis_set;
  for (int i = 0; i < 50; ++i) {
    auto m = generate_er(20, 20, 0.3, derive_seed(91, i));
    m.id = "m" + std::to_string(i);
    m.label = solve_mis_exact(m).independent_set();
    mis_set.push_back(m);
  }
  const auto tsp_report = evaluate(label_solver(), set, 3, 1);
  const auto mis_report = evaluate(label_solver(), mis_set, 3, 1);
  bool zero = *tsp_report.mean_gap == 0.0 && *mis_report.mean_gap == 0.0;
  for (const auto* r : {&tsp_report, &mis_report})
    for (const auto& rec : r->records) zero = zero && rec.gap && *rec.gap == 0.0;
  const double worked = gap_tsp(5.75, 5.69);
  const double expected = (5.75 - 5.69) / 5.69 * 100.0;
  const bool arithmetic = worked == expected && std::abs(worked - 1.054) < 5e-4;
  return {zero && arithmetic, std::string("self-evaluation gap ") + (zero ? "exactly 0" : "NONZERO") +
                                  "; gap(5.75, 5.69) = " + fmt(worked, 6) + "%"};
}

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "diffusion math oracles", 10, diffusion_math},
      {2, "oracle denoiser end to end", 60, oracle_denoiser},
      {3, "gradient check", 120, gradient_check},
      {4, "decoder feasibility fuzz", 60, decoder_fuzz},
      {5, "toy TSP training", 1800, toy_tsp},
      {6, "steps vs samples trend", 0, steps_vs_samples},
      {7, "toy MIS training", 1800, toy_mis},
      {8, "CLI determinism", 0, cli_determinism},
      {9, "metric fidelity", 0, metric_fidelity},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && seconds > c.budget_seconds) {
      out.pass = false;
      out.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
    }
    if (!out.pass) ++failed;
    std::printf("criterion %d %s: %s (%.1f s) %s\n", c.number, c.name, out.pass ? "PASS" : "FAIL", seconds,
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
