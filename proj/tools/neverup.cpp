#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "neverup/combiner.hpp"
#include "neverup/config.hpp"
#include "neverup/errors.hpp"
#include "neverup/experiment.hpp"
#include "neverup/metrics.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, std::uint64_t seed) {
  const neverup::ExperimentConfig cfg = neverup::load_config_file(config_path);
  const neverup::ExperimentSummary s = neverup::run_experiment(cfg, out_dir, seed);
  std::cout << "frames " << s.frames << "  learner_steps " << s.learner_steps << "  episodes "
            << s.episodes << "\n";
  if (!s.eval_records.empty()) {
    const auto& last = s.eval_records.back();
    std::cout << "final eval: return_ext " << last.return_ext << "  coverage " << last.coverage
              << "  length " << last.length << "\n";
  }
  std::cout << "metrics: " << s.metrics_path << "\ncheckpoint: " << s.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, std::string config_path, int beta_index,
             int episodes, std::uint64_t seed) {
  if (config_path.empty()) {
    const auto sibling = std::filesystem::path(checkpoint).parent_path() / "config.resolved";
    if (!std::filesystem::exists(sibling))
      throw neverup::ConfigError("eval: pass --config or keep config.resolved next to the checkpoint");
    config_path = sibling.string();
  }
  const neverup::ExperimentConfig cfg = neverup::load_config_file(config_path);
  const auto records =
      neverup::evaluate_checkpoint(cfg, checkpoint, beta_index, episodes, seed);
  std::cout << "episode,return_ext,return_int,length,unique_states,coverage\n";
  double mean_ret = 0.0, mean_cov = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::cout << i << "," << r.return_ext << "," << r.return_int << "," << r.length << ","
              << r.unique_states << "," << r.coverage << "\n";
    mean_ret += r.return_ext;
    mean_cov += r.coverage;
  }
  if (!records.empty())
    std::cout << "mean return_ext " << mean_ret / static_cast<double>(records.size())
              << ", mean coverage " << mean_cov / static_cast<double>(records.size()) << "\n";
  return 0;
}

int cmd_schedule(int n, double beta, double gamma_max, double gamma_min,
                 const std::string& out) {
  const neverup::MixtureSchedule s = neverup::make_schedule(n, beta, gamma_max, gamma_min);
  if (out.empty()) {
    std::cout << s.to_csv();
  } else {
    s.dump_csv(out);
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int cmd_plot_data(const std::vector<std::string>& metrics_files, const std::string& figure,
                  std::int64_t window, const std::string& out) {
  std::vector<neverup::SummaryRow> rows = neverup::summarize(metrics_files, window);
  std::string wanted;
  if (figure == "coverage")
    wanted = "eval/coverage";
  else if (figure == "return")
    wanted = "eval/return_ext";
  else if (figure == "mixtures")
    wanted = "eval/return_ext";  // per-mixture split comes from the mixture column upstream
  else
    throw neverup::ConfigError("plot-data: figure must be coverage, return, or mixtures");
  std::vector<neverup::SummaryRow> filtered;
  for (auto& r : rows)
    if (r.tag == wanted) filtered.push_back(r);
  const std::string csv = neverup::summary_to_csv(filtered);
  if (out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream os(out, std::ios::trunc);
    os << csv;
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale directed-exploration agent (episodic + life-long novelty, "
               "mixture-conditioned recurrent Q-learning)"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs/out", checkpoint, figure = "coverage", out_file;
  std::uint64_t seed = 1;
  int beta_index = 0, episodes = 10, n = 32;
  double beta = 0.3, gmax = 0.997, gmin = 0.99;
  std::int64_t window = 20000;
  std::vector<std::string> metrics_files;

  auto* run = app.add_subcommand("run", "Train from a config file");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "run seed");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint greedily");
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--beta-index", beta_index, "mixture index to condition on");
  ev->add_option("--config", config_path, "config (defaults to config.resolved next to the checkpoint)");
  ev->add_option("--episodes", episodes, "evaluation episodes");
  ev->add_option("--seed", seed, "evaluation seed");

  auto* sched = app.add_subcommand("schedule", "Dump the beta/gamma mixture schedule as CSV");
  sched->add_option("--n", n, "number of mixtures");
  sched->add_option("--beta", beta, "maximum intrinsic reward scale");
  sched->add_option("--gamma-max", gmax, "highest discount");
  sched->add_option("--gamma-min", gmin, "lowest discount");
  sched->add_option("--out", out_file, "output file (stdout if omitted)");

  auto* plot = app.add_subcommand("plot-data", "Aggregate metrics CSVs into per-figure data");
  plot->add_option("--metrics", metrics_files, "metrics.csv files, one per seed")->required();
  plot->add_option("--figure", figure, "coverage | return | mixtures");
  plot->add_option("--window", window, "frame bucket width");
  plot->add_option("--out", out_file, "output file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed);
    if (ev->parsed()) return cmd_eval(checkpoint, config_path, beta_index, episodes, seed);
    if (sched->parsed()) return cmd_schedule(n, beta, gmax, gmin, out_file);
    if (plot->parsed()) return cmd_plot_data(metrics_files, figure, window, out_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
