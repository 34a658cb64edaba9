#include "lamopt/cli.hpp"

#include "lamopt/output.hpp"
#include "lamopt/scenarios.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>

namespace lamopt {

namespace {

struct Config {
  std::string scenario = "carrier-plate";
  std::string mode = "uniform";
  std::string levels = "2..6";
  int initial_level = 4;
  int steps = 20;
  double fraction = 0.4;
  std::optional<double> volume, lame_lambda, lame_mu, load;
  double strip_fraction = 0.2;
  double tolerance = 1e-7;
  int max_iterations = 500;
  std::string out_dir = "out";
  bool timing = true;
  bool vtk = true;
  bool quiet = false;
  bool nested = true;
};

std::pair<int, int> parse_levels(const std::string& text) {
  int a = 0, b = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d..%d%c", &a, &b, &tail) == 2) {
  } else if (std::sscanf(text.c_str(), "%d%c", &a, &tail) == 1) {
    b = a;
  } else {
    throw std::invalid_argument("--levels expects 'a..b' or a single level, got '" + text + "'");
  }
  if (a < 0 || b < a || b > 12) throw std::invalid_argument("--levels range must satisfy 0 <= a <= b <= 12");
  return {a, b};
}

std::string numbered(const std::string& stem, int k, const char* ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "-%03d", k);
  return stem + buf + ext;
}

void print_row(std::ostream& out, const AdaptiveStep& r, int level) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%s %3d  elements %7lld  dofs %8lld  J %.10f  sum_eta %.4e  volume %.6f  "
                "iterations %d%s\n",
                level >= 0 ? "level" : "step", level >= 0 ? level : r.step,
                static_cast<long long>(r.elements), static_cast<long long>(r.dofs), r.compliance,
                r.eta_sum, r.volume, r.iterations, r.converged ? "" : " (not converged)");
  out << buf << std::flush;
}

int execute(const Config& cfg, std::ostream& out) {
  ScenarioOverrides o;
  o.lame_lambda = cfg.lame_lambda;
  o.lame_mu = cfg.lame_mu;
  o.load = cfg.load;
  o.volume_fraction = cfg.volume;
  o.strip_fraction = cfg.strip_fraction;
  const Scenario scenario = builtin_scenario(cfg.scenario, o);

  OptimizeOptions opt;
  opt.tolerance = cfg.tolerance;
  opt.max_iterations = cfg.max_iterations;

  const std::filesystem::path dir(cfg.out_dir);
  const std::string stem = scenario.name + "-" + cfg.mode;
  std::vector<StudyRow> rows;
  std::vector<IterationRow> iterations;
  auto record_iterations = [&](int step, const OptimizeResult& r) {
    for (const IterationRecord& rec : r.log) iterations.push_back({step, rec});
  };
  auto snapshot = [&](int k, const OptimizeResult& r, const ElementIndicators* ind) {
    if (!cfg.vtk) return;
    write_vtk(dir / numbered(stem, k, ".vtk"), r.u, r.state, scenario.material, ind);
    if (ind) write_indicators_csv(dir / numbered(stem + "-indicators", k, ".csv"), r.u.space().mesh(), *ind);
  };

  if (cfg.mode == "uniform") {
    const auto [first, last] = parse_levels(cfg.levels);
    UniformOptions uo;
    uo.optimize = opt;
    uo.nested = cfg.nested;
    uo.observer = [&](const UniformLevel& lv, const OptimizeResult& r, const ElementIndicators* ind) {
      rows.push_back({lv.record, lv.level});
      record_iterations(lv.record.step, r);
      snapshot(lv.level, r, ind);
      if (!cfg.quiet) print_row(out, lv.record, lv.level);
    };
    const std::vector<UniformLevel> levels = uniform_study(scenario, first, last, uo);
    if (levels.size() >= 3) {
      std::vector<std::pair<double, double>> data;
      for (const UniformLevel& lv : levels) data.emplace_back(lv.h, lv.record.compliance);
      const std::string report = format_fit(fit_extrapolation(data), data);
      out << report;
      std::ofstream f(dir / (stem + "-fit.txt"));
      f << report;
      if (!f) throw std::runtime_error("failed writing the fit report");
    }
  } else {
    AdaptiveOptions ao;
    ao.fraction = cfg.fraction;
    ao.max_steps = cfg.steps;
    ao.optimize = opt;
    ao.observer = [&](const StepOutput& s) {
      rows.push_back({s.record, -1});
      record_iterations(s.record.step, s.result);
      snapshot(s.record.step, s.result, &s.indicators);
      if (!cfg.quiet) print_row(out, s.record, -1);
    };
    adaptive_loop(scenario.mesh(cfg.initial_level), scenario.problem(), ao);
  }
  write_steps_csv(dir / (stem + "-steps.csv"), rows, cfg.timing);
  write_iterations_csv(dir / (stem + "-iterations.csv"), iterations, cfg.timing);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Config cfg;
  CLI::App app{"Compliance minimisation with optimal laminates on adaptive Q2 meshes"};
  app.set_config("--config", "", "Read options from a 'key = value' file (# comments)");
  app.add_option("--scenario", cfg.scenario, "Built-in scenario")
      ->check(CLI::IsMember(builtin_scenario_names()))
      ->capture_default_str();
  app.add_option("--mode", cfg.mode, "uniform study or adaptive run")
      ->check(CLI::IsMember({"uniform", "adaptive"}))
      ->capture_default_str();
  app.add_option("--levels", cfg.levels, "Uniform levels, 'a..b'")->capture_default_str();
  app.add_option("--initial-level", cfg.initial_level, "Uniform level the adaptive run starts from")
      ->check(CLI::Range(0, 12))
      ->capture_default_str();
  app.add_option("--steps", cfg.steps, "Number of adaptive refinement steps")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--fraction", cfg.fraction, "Doerfler marking fraction in (0, 1]")
      ->check(CLI::Range(1e-12, 1.0))
      ->capture_default_str();
  app.add_option("--volume", cfg.volume, "Volume fraction (scenario default otherwise)");
  app.add_option("--lame-lambda", cfg.lame_lambda, "Lame constant lambda (default 1)");
  app.add_option("--lame-mu", cfg.lame_mu, "Lame constant mu (default 1)");
  app.add_option("--load", cfg.load, "Traction magnitude (default 1)");
  app.add_option("--strip-fraction", cfg.strip_fraction,
                 "Width of partial load/support strips relative to their edge")
      ->capture_default_str();
  app.add_option("--tolerance", cfg.tolerance, "Optimizer stopping tolerance")->capture_default_str();
  app.add_option("--max-iterations", cfg.max_iterations, "Optimizer iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--out-dir", cfg.out_dir, "Output directory")->capture_default_str();
  bool no_timing = false, no_vtk = false, independent = false;
  app.add_flag("--independent-levels", independent,
               "Start every uniform level from the default design instead of the previous level's");
  app.add_flag("--no-timing", no_timing, "Write wall_ms as 0 (byte-identical reruns)");
  app.add_flag("--no-vtk", no_vtk, "Skip VTK snapshots and per-element indicator tables");
  app.add_flag("--quiet", cfg.quiet, "No per-step progress lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  cfg.timing = !no_timing;
  cfg.vtk = !no_vtk;
  cfg.nested = !independent;

  try {
    std::filesystem::create_directories(cfg.out_dir);
    return execute(cfg, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace lamopt
