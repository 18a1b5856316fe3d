#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "resalloc/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kDivergence = 3;
constexpr int kIo = 4;

resalloc::ScenarioConfig load(const std::string& preset_name, const std::string& config_path,
                              int stride_override) {
  resalloc::ScenarioConfig cfg = preset_name.empty()
                                     ? resalloc::load_config_file(config_path)
                                     : resalloc::preset(preset_name);
  if (stride_override > 0) cfg.sim.record_stride = stride_override;
  return cfg;
}

int report_divergence(const resalloc::RunResult& r, bool allow) {
  if (!r.traj.diverged) return kOk;
  std::fprintf(stderr, "run diverged at t = %g (outputs contain the recorded prefix)\n",
               r.traj.divergence_time);
  return allow ? kOk : kDivergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic simulator for distributed resource allocation under "
               "false-data-injection attacks"};
  app.require_subcommand(1);

  std::string preset_name, config_path, out_dir = "out";
  bool allow_divergence = false;
  int stride = 0;
  unsigned seed = 0;  // reserved: the dynamics are deterministic

  auto add_source = [&](CLI::App* cmd) {
    auto* p = cmd->add_option("--preset", preset_name, "named scenario preset");
    auto* c = cmd->add_option("--config", config_path, "path to a scenario config");
    p->excludes(c);
    cmd->add_option("--stride", stride, "override the recording stride");
    cmd->add_option("--seed", seed, "reserved; accepted for interface stability")
        ->group("");  // hidden
  };

  CLI::App* run = app.add_subcommand("run", "execute one scenario and write artifacts");
  add_source(run);
  run->add_option("--out", out_dir, "output directory (default: out)");
  run->add_flag("--allow-divergence", allow_divergence,
                "exit 0 even if the run diverges");

  CLI::App* swp = app.add_subcommand("sweep", "re-run a scenario over parameter values");
  add_source(swp);
  std::string param;
  std::vector<double> values;
  int jobs = 1;
  swp->add_option("--param", param, "w0 | dt | attack_amplitude")->required();
  swp->add_option("--values", values, "comma-separated values")
      ->required()
      ->delimiter(',');
  swp->add_option("--jobs", jobs, "concurrent rows (default 1)");
  swp->add_option("--out", out_dir, "output directory (default: out)");
  swp->add_flag("--allow-divergence", allow_divergence,
                "exit 0 even if some rows diverge");

  CLI::App* pre = app.add_subcommand("presets", "list the named scenario presets");

  CLI::App* orc = app.add_subcommand("oracle", "print the KKT solution for a scenario");
  add_source(orc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    if (pre->parsed()) {
      for (const std::string& name : resalloc::preset_names())
        std::printf("%-22s %s\n", name.c_str(), resalloc::preset_summary(name).c_str());
      return kOk;
    }

    if (preset_name.empty() && config_path.empty())
      throw resalloc::ConfigError("one of --preset or --config is required");

    if (orc->parsed()) {
      const resalloc::ScenarioConfig cfg = load(preset_name, config_path, 0);
      const resalloc::AllocationProblem p = resalloc::build_problem(cfg);
      const resalloc::KktSolution kkt = resalloc::solve_kkt(p);
      auto print = [](const char* key, const Eigen::VectorXd& v) {
        std::printf("%s=", key);
        for (Eigen::Index k = 0; k < v.size(); ++k)
          std::printf("%s%.17g", k ? ";" : "", v[k]);
        std::printf("\n");
      };
      print("mu_star", kkt.mu);
      print("x_star", kkt.x_star);
      print("lambda_star", kkt.lambda_star);
      print("feasibility_residual", resalloc::feasibility_residual(kkt.x_star, p));
      std::printf("rho2=%.17g\n", resalloc::build_graph(cfg).algebraic_connectivity());
      return kOk;
    }

    if (run->parsed()) {
      const resalloc::ScenarioConfig cfg = load(preset_name, config_path, stride);
      const resalloc::RunResult r = resalloc::run_to_directory(cfg, out_dir);
      std::printf("wrote %s/{config.json, trajectory.csv, metrics.txt}\n", out_dir.c_str());
      std::printf("tail_allocation_error=%.17g\n", r.metrics.tail_allocation_error);
      return report_divergence(r, allow_divergence);
    }

    // sweep
    const resalloc::ScenarioConfig cfg = load(preset_name, config_path, stride);
    const resalloc::SweepResult result =
        resalloc::sweep(cfg, param, values, out_dir, jobs);
    std::printf("wrote %s/summary.csv (%zu rows)\n", out_dir.c_str(), result.rows.size());
    bool diverged = false;
    for (const resalloc::SweepRow& row : result.rows) {
      std::printf("%s=%.17g tail_allocation_error=%.17g%s\n", param.c_str(), row.value,
                  row.metrics.tail_allocation_error, row.metrics.diverged ? " DIVERGED" : "");
      diverged = diverged || row.metrics.diverged;
    }
    if (diverged && !allow_divergence) return kDivergence;
    return kOk;
  } catch (const resalloc::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kIo;
  } catch (const resalloc::ConfigError& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  }
}
