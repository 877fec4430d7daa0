// Command-line front end: single episodes, batches, the four-mode ablation
// and trace plotting.
#include "riskplan/export.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

using namespace riskplan;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, BranchMode> kModes{{"none", BranchMode::NoBranch},
                                               {"fixed", BranchMode::FixedBranch},
                                               {"dyn", BranchMode::DynamicBranch},
                                               {"dyn-risk", BranchMode::DynamicBranchRisk}};

WorldConfig load(const std::string& path, std::optional<double> alpha) {
  WorldConfig cfg = load_world_config(path);
  if (alpha) {
    cfg.planner.rcp.alpha = *alpha;
    cfg.validate();
  }
  return cfg;
}

void print_metrics(const std::string& label, const EpisodeMetrics& m) {
  std::cout << label << ": time " << m.completion_time << " s, avg speed " << m.avg_speed << " m/s, rms acc "
            << m.rms_acc << ", max |acc| " << m.max_abs_acc << ", max decel " << m.max_decel << ", min distance "
            << m.min_distance << " m, " << (m.success ? "success" : "COLLISION") << '\n';
}

void print_batch(const BatchResult& b) {
  std::cout << ablation_label(b.mode) << ": episodes " << b.rows.size() << ", avg max decel " << b.mean_max_decel
            << ", avg min distance " << b.mean_min_distance << ", success rate " << 100.0 * b.success_rate << " %\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-aware contingency planner: closed-loop episodes and ablations"};
  app.require_subcommand(1);

  std::string config, out_dir = ".", mode_name = "dyn-risk", trace_path, svg_path;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  int episodes = 100;

  auto* run = app.add_subcommand("run", "one closed-loop episode");
  run->add_option("--config", config, "world config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode_name, "branching mode")->check(CLI::IsMember({"none", "fixed", "dyn", "dyn-risk"}));
  run->add_option("--alpha", alpha, "tail fraction for dyn-risk");
  run->add_option("--seed", seed, "randomization seed (default: the config's)");
  run->add_option("--out", out_dir, "output directory");

  auto* batch = app.add_subcommand("batch", "seeded episodes in one mode");
  batch->add_option("--config", config, "world config (JSON)")->required()->check(CLI::ExistingFile);
  batch->add_option("--mode", mode_name, "branching mode")->check(CLI::IsMember({"none", "fixed", "dyn", "dyn-risk"}));
  batch->add_option("--episodes", episodes, "episode count")->check(CLI::PositiveNumber);
  batch->add_option("--alpha", alpha, "tail fraction for dyn-risk");
  batch->add_option("--seed", seed, "base seed (default: the config's)");
  batch->add_option("--out", out_dir, "output directory");

  auto* ablation = app.add_subcommand("ablation", "all four branching modes on the same seeds");
  ablation->add_option("--config", config, "world config (JSON)")->required()->check(CLI::ExistingFile);
  ablation->add_option("--episodes", episodes, "episodes per mode")->check(CLI::PositiveNumber);
  ablation->add_option("--alpha", alpha, "tail fraction for dyn-risk");
  ablation->add_option("--seed", seed, "base seed (default: the config's)");
  ablation->add_option("--out", out_dir, "output directory");

  auto* plot = app.add_subcommand("plot", "render a trace as SVG");
  plot->add_option("--trace", trace_path, "trace JSON")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", svg_path, "output SVG")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plot) {
      write_text_file(svg_path, trace_svg(trace_from_json(read_text_file(trace_path))));
      return 0;
    }
    const WorldConfig cfg = load(config, alpha);
    const std::uint64_t base = seed.value_or(cfg.seed);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);

    if (*run) {
      const EpisodeResult r = run_episode(cfg, kModes.at(mode_name), base);
      write_text_file(out / "trace.json", trace_to_json(r.trace));
      write_text_file(out / "metrics.json", metrics_to_json(r.metrics) + "\n");
      write_text_file(out / "trace.svg", trace_svg(r.trace));
      write_text_file(out / "metrics.csv", comparison_csv({{cfg.name, r.metrics}}));
      print_metrics(cfg.name + " [" + mode_name + "] " + to_string(r.trace.outcome), r.metrics);
      std::cout << "policy switches: " << count_policy_switches(r.trace) << '\n';
    } else if (*batch) {
      const BatchResult b = batch_run(cfg, kModes.at(mode_name), episodes, base);
      write_text_file(out / "episodes.csv", episodes_csv(b));
      write_text_file(out / "summary.csv", ablation_csv({b}));
      print_batch(b);
    } else if (*ablation) {
      std::vector<BatchResult> all;
      for (const auto& name : {"none", "fixed", "dyn", "dyn-risk"}) {
        all.push_back(batch_run(cfg, kModes.at(name), episodes, base));
        write_text_file(out / (std::string("episodes_") + name + ".csv"), episodes_csv(all.back()));
        print_batch(all.back());
      }
      write_text_file(out / "ablation.csv", ablation_csv(all));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
