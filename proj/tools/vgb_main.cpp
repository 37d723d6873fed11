// Command-line front end: list-tasks, analyze, sample, experiment, train-value.
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "vgb/errors.hpp"
#include "vgb/harness.hpp"
#include "vgb/training.hpp"

namespace {

using vgb::Json;

struct TaskFlags {
  std::string task = "abc";
  std::optional<int> H, K, M;
  std::optional<double> eps, alpha;
  std::string oracle;

  void add(CLI::App* app) {
    app->add_option("--task", task, "task name (see list-tasks)");
    app->add_option("--H", H, "horizon");
    app->add_option("--eps", eps, "oracle perturbation (abc, kl_abc)");
    app->add_option("--alpha", alpha, "geometric oracle decay (abc, dyck)");
    app->add_option("--K", K, "parity block length");
    app->add_option("--M", M, "parity block count");
    app->add_option("--oracle", oracle, "value oracle name");
  }

  Json task_json() const {
    Json t{{"name", task}};
    if (H)
      t["H"] = *H;
    if (eps)
      t["eps"] = *eps;
    if (alpha)
      t["alpha"] = *alpha;
    if (K)
      t["K"] = *K;
    if (M)
      t["M"] = *M;
    return t;
  }

  Json oracle_json() const { return oracle.empty() ? Json::object() : Json{{"name", oracle}}; }
};

/// Writes to --out, or stdout when it is empty.
template <class F>
void emit(const std::string& out, F&& write) {
  if (out.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream os(out);
  if (!os)
    throw std::runtime_error("cannot open '" + out + "' for writing");
  write(os);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Value-guided backtracking samplers on tree-structured generation tasks"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list-tasks", "print the registered task names");

  TaskFlags analyze_flags;
  std::string analyze_out;
  auto* analyze = app.add_subcommand("analyze", "structural checks of the exact chain");
  analyze_flags.add(analyze);
  analyze->add_option("--out", analyze_out, "CSV path (default stdout)");

  TaskFlags sample_flags;
  std::string sample_out, algo = "vgb_first_leaf";
  long n = 100, T = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
  auto* sample = app.add_subcommand("sample", "per-run records of one sampler");
  sample_flags.add(sample);
  sample->add_option("--algo", algo, "sampler name");
  sample->add_option("--n", n, "number of runs")->check(CLI::PositiveNumber);
  sample->add_option("--T", T, "walk length (vgb, vgb_large_alphabet)");
  sample->add_option("--seed", seed, "master seed");
  sample->add_option("--out", sample_out, "CSV path (default stdout)");

  std::string config_path, exp_out;
  std::optional<int> exp_jobs;
  auto* experiment = app.add_subcommand("experiment", "run a JSON experiment config");
  experiment->add_option("--config", config_path, "config file")->required();
  experiment->add_option("--out", exp_out, "CSV path (overrides the config)");
  experiment->add_option("--jobs", exp_jobs, "concurrent replicates")->check(CLI::PositiveNumber);

  TaskFlags train_flags;
  std::string train_out;
  long rollouts = 10000;
  std::uint64_t train_seed = 0;
  bool true_leaves = false;
  int train_jobs = 1;
  auto* train = app.add_subcommand("train-value", "fit per-depth value networks and save them");
  train_flags.add(train);
  train->add_option("--n", rollouts, "rollouts")->check(CLI::PositiveNumber);
  train->add_option("--seed", train_seed, "rollout and init seed");
  train->add_option("--out", train_out, "bundle path")->required();
  train->add_flag("--true-leaves", true_leaves, "use exact leaf rewards instead of a depth-H net");
  train->add_option("--jobs", train_jobs, "depths trained concurrently")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*list) {
      for (const auto& name : vgb::task_names())
        std::cout << name << '\n';
      return 0;
    }

    if (*analyze) {
      Json raw{{"task", analyze_flags.task_json()},
               {"oracle", analyze_flags.oracle_json()},
               {"sampler", {{"name", "base"}}}};
      const auto cfg = vgb::validate_config(raw.dump());
      const auto task = vgb::build_task(cfg.task);
      const auto oracle = vgb::build_oracle(task, cfg.oracle);
      const auto rows = vgb::analyze(task, oracle, cfg.oracle["name"].get<std::string>());
      emit(analyze_out, [&](std::ostream& os) { vgb::write_csv(os, rows); });
      return 0;
    }

    if (*sample) {
      Json s{{"name", algo}};
      if (T > 0)
        s["T"] = T;
      Json raw{{"task", sample_flags.task_json()}, {"oracle", sample_flags.oracle_json()}, {"sampler", s}};
      const auto cfg = vgb::validate_config(raw.dump());
      const auto task = vgb::build_task(cfg.task);
      const auto oracle = vgb::build_oracle(task, cfg.oracle);
      const auto sampler = vgb::build_sampler(task, oracle, cfg.sampler);
      emit(sample_out, [&](std::ostream& os) {
        os << "replicate,seed,terminal,is_leaf,step_count,restart_count,queries,timeout,wallclock\n";
        for (long i = 0; i < n; ++i) {
          vgb::Rng rng = vgb::Rng::stream(seed, static_cast<std::uint64_t>(i));
          const auto t0 = std::chrono::steady_clock::now();
          const vgb::RunRecord r = sampler(rng);
          const double wall =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          os << i << ',' << rng.seed() << ',' << vgb::csv_escape(vgb::to_string(r.terminal, task.symbols))
             << ',' << (r.is_leaf ? 1 : 0) << ',' << r.step_count << ',' << r.restart_count << ','
             << r.queries << ',' << (r.timeout ? 1 : 0) << ',' << vgb::format_double(wall) << '\n';
        }
      });
      return 0;
    }

    if (*experiment) {
      std::ifstream in(config_path);
      if (!in)
        throw vgb::ConfigError("--config: cannot read '" + config_path + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      auto cfg = vgb::validate_config(ss.str());
      if (!exp_out.empty())
        cfg.output = exp_out;
      if (exp_jobs)
        cfg.jobs = *exp_jobs;
      const auto rows = vgb::run_experiment(cfg);
      emit(cfg.output, [&](std::ostream& os) { vgb::write_csv(os, rows); });
      return 0;
    }

    if (*train) {
      Json raw{{"task", train_flags.task_json()}, {"sampler", {{"name", "base"}}}};
      const auto cfg = vgb::validate_config(raw.dump());
      const auto task = vgb::build_task(cfg.task);
      vgb::TrainConfig tc = task.name == "parity" ? vgb::TrainConfig::parity()
                            : task.name == "dyck" ? vgb::TrainConfig::dyck()
                                                  : vgb::TrainConfig::abc();
      tc.seed = train_seed;
      const auto data = vgb::generate_rollouts(*task.model, task.tilt, rollouts, train_seed);
      const auto bundle = vgb::train_all_depths(data, task.tilt, tc, true_leaves, train_jobs);
      vgb::save_bundle(train_out, bundle);
      for (std::size_t h = 1; h < bundle.loss_curves.size(); ++h)
        if (!bundle.loss_curves[h].empty())
          std::cout << "depth " << h << " final_loss " << vgb::format_double(bundle.loss_curves[h].back())
                    << '\n';
      return 0;
    }
  } catch (const vgb::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
