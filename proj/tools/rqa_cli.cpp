// Command-line front end for the scoring harness.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rqa/harness.hpp"
#include "rqa/synthetic.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<std::size_t> concurrency;
  std::string strategy;
  bool mock = false;
  std::string cache_dir;
  std::string out;
};

void add_common(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd.add_option("--seed", o.seed, "Master seed");
  cmd.add_option("--iterations", o.iterations, "Repetitions per prompt")->check(CLI::PositiveNumber);
  cmd.add_option("--concurrency", o.concurrency, "Requests in flight")->check(CLI::PositiveNumber);
  cmd.add_option("--strategy", o.strategy, "zero, few or both")
      ->check(CLI::IsMember({"zero", "few", "both"}));
  cmd.add_flag("--mock", o.mock, "Use the offline mock backend");
  cmd.add_option("--cache-dir", o.cache_dir, "Response cache directory");
  cmd.add_option("--out", o.out, "Run directory");
}

rqa::ExperimentConfig apply(const Overrides& o) {
  rqa::ExperimentConfig cfg = rqa::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.iterations) cfg.iterations = *o.iterations;
  if (o.concurrency) cfg.concurrency = *o.concurrency;
  if (o.strategy == "zero") cfg.strategies = {rqa::Strategy::zero};
  if (o.strategy == "few") cfg.strategies = {rqa::Strategy::few};
  if (o.strategy == "both") cfg.strategies = {rqa::Strategy::zero, rqa::Strategy::few};
  if (o.mock) cfg.mock.enabled = true;
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  if (!o.out.empty()) cfg.output_dir = o.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Research quality scoring harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rqa::kToolVersion));

  Overrides o;
  std::optional<rqa::Stage> chosen;
  bool all = false;
  for (rqa::Stage s : rqa::all_stages()) {
    auto* cmd = app.add_subcommand(std::string(rqa::to_string(s)), "Run the " + std::string(rqa::to_string(s)) + " stage");
    add_common(*cmd, o);
    cmd->callback([&chosen, s] { chosen = s; });
  }
  auto* all_cmd = app.add_subcommand("all", "Run every stage in order");
  add_common(*all_cmd, o);
  all_cmd->callback([&all] { all = true; });

  std::string fixture_dir;
  rqa::FixtureSpec spec;
  auto* fixture = app.add_subcommand("make-fixture", "Write a synthetic experiment directory");
  fixture->add_option("dir", fixture_dir, "Target directory")->required();
  fixture->add_option("--seed", spec.seed, "Fixture seed");
  fixture->add_option("--per-unit", spec.articles_per_unit, "Articles per unit");
  fixture->add_option("--iterations", spec.iterations, "Iterations written to the config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fixture->parsed()) {
      spec.sample_per_unit = spec.articles_per_unit;
      const auto files = rqa::write_fixture(fixture_dir, spec);
      std::cout << files.config.string() << "\n";
      return 0;
    }
    const rqa::ExperimentConfig cfg = apply(o);
    const std::vector<rqa::Stage> stages = all ? rqa::all_stages() : std::vector<rqa::Stage>{*chosen};
    const rqa::RunReport report = rqa::run(cfg, stages);
    if (!report.ok) {
      std::cerr << "error: stage '" << rqa::to_string(*report.failed_stage) << "' failed: " << report.error << "\n";
      return 1;
    }
    std::cout << report.run_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
