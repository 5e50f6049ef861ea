// Command-line driver. Every run writes its files, the canonical config.ini and
// manifest.json under --out. Exit 0 when every check passes, 1 on a failed
// check, 2 on a usage or configuration error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "blil/experiments.hpp"
#include "blil/plot.hpp"

namespace {

using namespace blil;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tol;
  std::vector<std::string> overrides;
  std::string snapshot;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--tol", c.tol, "numerical tolerance");
  app->add_option("--override", c.overrides, "SECTION.KEY=VALUE, applied after the file")->take_all();
}

ExperimentConfig load(const Common& c) {
  auto ov = c.overrides;
  if (c.seed) ov.push_back("experiment.seed=" + std::to_string(*c.seed));
  if (c.out) ov.push_back("experiment.out=" + *c.out);
  if (c.tol) ov.push_back("experiment.tol=" + fmt17(*c.tol));
  if (c.config.empty()) return parse_config_text("", ov);
  std::ifstream in(c.config);
  if (!in) throw ParseError("cannot read config", c.config);
  return parse_config(in, ov);
}

void report(const RunManifest& m) {
  for (const auto& c : m.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name;
    for (const auto& [k, v] : c.measured) std::cout << ' ' << k << '=' << fmt17(v);
    if (!c.note.empty()) std::cout << "  # " << c.note;
    std::cout << '\n';
  }
}

int finish(const std::string& command, const std::string& dir, const std::string& config_text, RunOutput r,
           std::chrono::steady_clock::time_point t0) {
  RunManifest m;
  m.command = command;
  m.started_utc = utc_now();
  m.config_hash = config_text.empty() ? std::string() : sha256_hex(config_text);
  m.checks = std::move(r.checks);
  if (!config_text.empty()) r.files["config.ini"] = config_text;
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run(dir, m, r.files);
  report(m);
  std::cout << (m.all_pass() ? "ok" : "checks failed") << ": " << dir << '\n';
  return m.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bounded-growth harmonic functions: weights, averages, martingales, counterexample"};
  app.require_subcommand(1);
  Common common;
  std::function<RunOutput(const ExperimentConfig&)> action;
  std::string command;

  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help,
                  std::function<RunOutput(const ExperimentConfig&)> f) {
    auto* sub = parent->add_subcommand(name, help);
    add_common(sub, common);
    sub->callback([&, f, sub] {
      action = f;
      command = (sub->get_parent() != &app ? sub->get_parent()->get_name() + " " : std::string()) + sub->get_name();
    });
    return sub;
  };

  auto* weights = app.add_subcommand("weights", "weight diagnostics")->require_subcommand(1);
  leaf(weights, "check", "doubling, monotonicity, scale sequence, multiplier band", run_weights_check);
  auto* field = app.add_subcommand("field", "harmonic fields")->require_subcommand(1);
  leaf(field, "build", "growth norm and Bloch seminorm with refinement", run_field_build);
  auto* average = app.add_subcommand("average", "boundary averages")->require_subcommand(1);
  leaf(average, "profile", "averages, ratios and the approximation error scan", run_average_profile);
  auto* mart = app.add_subcommand("martingale", "surrogate dyadic martingale")->require_subcommand(1);
  leaf(mart, "build", "martingale table", [](const ExperimentConfig& c) { return run_martingale(c, false); });
  leaf(mart, "check", "level bounds and the step bound", [](const ExperimentConfig& c) { return run_martingale(c, true); });
  auto* ce = app.add_subcommand("counterexample", "stopping-time construction")->require_subcommand(1);
  std::vector<std::pair<DyadicInterval, Decision>> rows;
  auto with_snapshot = [&](bool check) {
    return [&, check](const ExperimentConfig& c) {
      if (common.snapshot.empty()) return run_counterexample(c, check);
      std::ifstream in(common.snapshot);
      if (!in) throw ParseError("cannot read snapshot", common.snapshot);
      rows = read_snapshot_csv(in);
      return run_counterexample(c, check, &rows);
    };
  };
  leaf(ce, "build", "resolve sample chains and write the snapshot", with_snapshot(false))
      ->add_option("--snapshot", common.snapshot, "snapshot to restore first")
      ->check(CLI::ExistingFile);
  leaf(ce, "check", "structural and measure checks", with_snapshot(true))
      ->add_option("--snapshot", common.snapshot, "snapshot to restore first")
      ->check(CLI::ExistingFile);
  auto* exp = app.add_subcommand("experiment", "experiments")->require_subcommand(1);
  leaf(exp, "lil", "ratio profiles over fields and sample points", run_lil_experiment);

  std::string in_csv, xcol, title, svg_out;
  std::vector<std::string> ycols;
  auto* plot = app.add_subcommand("plot", "SVG line plot of CSV columns");
  plot->add_option("--in", in_csv, "CSV file")->required()->check(CLI::ExistingFile);
  plot->add_option("-x,--x", xcol, "x column")->required();
  plot->add_option("-y,--y", ycols, "y columns")->required()->take_all();
  plot->add_option("--title", title, "plot title");
  plot->add_option("--out", svg_out, "SVG path (stdout when absent)");

  std::vector<std::string> suite_names;
  std::string suite_out = "out/suites";
  auto* suite = app.add_subcommand("suite", "acceptance suites by number or name (all when none given)");
  suite->add_option("names", suite_names, "suites");
  suite->add_option("--out", suite_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (plot->parsed()) {
      std::ifstream in(in_csv);
      std::string svg;
      try {
        svg = render_svg(read_csv(in), xcol, ycols, title);
      } catch (const DomainError& e) {
        throw ParseError(e.what(), xcol);
      }
      if (svg_out.empty()) {
        std::cout << svg;
      } else {
        std::ofstream(svg_out, std::ios::binary) << svg;
      }
      return 0;
    }
    if (suite->parsed()) {
      if (suite_names.empty()) {
        for (const auto& s : suites::all()) suite_names.push_back(std::to_string(s.id));
      }
      for (const auto& n : suite_names) {
        const auto& specs = suites::all();
        const bool known = std::any_of(specs.begin(), specs.end(),
                                       [&](const auto& s) { return n == std::to_string(s.id) || n == s.name; });
        if (!known) throw ParseError("unknown suite", n);
      }
      RunOutput all;
      for (const auto& n : suite_names) {
        auto r = run_acceptance_suite(n);
        all.checks.insert(all.checks.end(), r.checks.begin(), r.checks.end());
      }
      return finish("suite", suite_out, "", std::move(all), t0);
    }
    const auto cfg = load(common);
    const auto text = serialize(cfg);
    return finish(command, cfg.out, text, action(cfg), t0);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConstructionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
