#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("dagho");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("DAGHO_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::err);
  }
}

void add_schedule_flags(CLI::App* app, dagho::cli::ScheduleFlags& f) {
  app->add_option("--schedule", f.kind, "theory|practical|ahat|gd|custom")
      ->check(CLI::IsMember({"theory", "practical", "ahat", "gd", "custom"}));
  app->add_option("--mu0", f.mu0, "initial penalty weight");
  app->add_option("--beta", f.beta, "gd: tolerance fraction beta");
  app->add_option("--delta", f.delta, "gd: decay margin delta");
  app->add_option("--decay-factor", f.decay_factor, "custom: mu_{k+1} = mu_k / factor");
  app->add_option("--ahat-eps", f.ahat_eps, "ahat: eps in a_hat = sqrt(4(mu0 + eps))");
}

void add_stop_flags(CLI::App* app, dagho::cli::StopFlags& f) {
  app->add_option("--mu-floor", f.mu_floor, "stop once mu drops below this");
  app->add_option("--max-stages", f.max_stages, "stage cap");
  app->add_option("--dist-tol", f.dist_tol, "stop once this close to the global optimum");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dagho::cli;
  setup_logging();

  CLI::App app{"Homotopy solver and landscape toolkit for the bivariate penalized DAG problem"};
  app.require_subcommand(1);

  HomotopyConfig hc;
  auto* homotopy = app.add_subcommand("homotopy", "run a homotopy and write its trajectory");
  homotopy->add_option("--a", hc.a, "ground-truth edge weight")->required();
  add_schedule_flags(homotopy, hc.schedule);
  homotopy->add_option("--init", hc.init, "x,y or random");
  homotopy->add_option("--seed", hc.seed, "seed of the random init");
  homotopy->add_option("--seeds", hc.seeds, "number of consecutive seeds to run");
  homotopy->add_option("--box", hc.box, "random init box lo:hi (default -2a:2a)");
  add_stop_flags(homotopy, hc.stop);
  homotopy->add_option("--path-stride", hc.path_stride, "record every k-th inner step");
  homotopy->add_option("--out", hc.out, "trajectory CSV (or report JSON with --format json)");
  homotopy->add_option("--report", hc.report, "report JSON path");
  homotopy->add_option("--format", hc.format)->check(CLI::IsMember({"csv", "json"}));
  homotopy->add_flag("--force", hc.force, "run inadmissible schedules");

  LandscapeConfig lc;
  auto* landscape = app.add_subcommand("landscape", "grid of g_mu and its gradient");
  landscape->add_option("--a", lc.a)->required();
  landscape->add_option("--mu", lc.mu)->required();
  landscape->add_option("--grid", lc.grid, "xmin:xmax:nx,ymin:ymax:ny");
  landscape->add_option("--out", lc.out);

  StationaryConfig sc;
  auto* stationary = app.add_subcommand("stationary", "stationary points or the threshold tau");
  stationary->add_option("--a", sc.a)->required();
  stationary->add_option("--mu", sc.mu);
  stationary->add_option("--out", sc.out);

  CompareConfig cc;
  auto* compare = app.add_subcommand("compare-schedules", "theory schedule vs a fast decay");
  compare->add_option("--a", cc.a)->required();
  compare->add_option("--mu0", cc.mu0);
  compare->add_option("--init", cc.init);
  compare->add_option("--seed", cc.seed);
  compare->add_option("--box", cc.box);
  compare->add_option("--decay-factor", cc.decay_factor, "fast schedule mu_{k+1} = mu_k / factor");
  add_stop_flags(compare, cc.stop);
  compare->add_option("--path-stride", cc.path_stride);
  compare->add_option("--out", cc.out, "output prefix");

  auto* data = app.add_subcommand("data", "synthetic data and empirical fits");
  data->require_subcommand(1);
  SampleConfig dc;
  auto* sample = data->add_subcommand("sample", "draw samples of the SEM");
  sample->add_option("--a", dc.a)->required();
  sample->add_option("--n", dc.n);
  sample->add_option("--noise", dc.noise)->check(CLI::IsMember({"gaussian", "uniform"}));
  sample->add_option("--seed", dc.seed);
  sample->add_option("--out", dc.out);
  FitConfig fc;
  auto* fit = data->add_subcommand("fit", "run the homotopy on an empirical loss");
  fit->add_option("--in", fc.in)->required();
  add_schedule_flags(fit, fc.schedule);
  fit->add_option("--a", fc.a, "edge weight for a-dependent schedules (default: estimate)");
  fit->add_option("--init", fc.init);
  fit->add_option("--seed", fc.seed);
  add_stop_flags(fit, fc.stop);
  fit->add_option("--out", fc.out);
  fit->add_flag("--force", fc.force);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage_error;
  }

  try {
    if (*homotopy) return cmd_homotopy(hc);
    if (*landscape) return cmd_landscape(lc);
    if (*stationary) return cmd_stationary(sc);
    if (*compare) return cmd_compare_schedules(cc);
    if (*sample) return cmd_data_sample(dc);
    if (*fit) return cmd_data_fit(fc);
  } catch (const dagho::NumericFailure& e) {
    spdlog::error("numeric failure: {}", e.what());
    return numeric_failure;
  } catch (const dagho::io::CsvError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage_error;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage_error;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage_error;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return numeric_failure;
  }
  return usage_error;
}
