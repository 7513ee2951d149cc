// Command-line front end for the lattice laboratory.
//
// Exit codes: 0 every criterion passed, 1 a criterion failed, 2 bad usage
// or configuration, 3 the numerics broke down.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spinscale/harness.hpp"
#include "spinscale/io.hpp"
#include "spinscale/model.hpp"

namespace {

// `validate` accepts either a bare model file or an experiment config; in
// the latter case the embedded or referenced model is checked.
spinscale::Model model_for_validation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed JSON in " + path.string() + ": " +
                                e.what());
  }
  if (j.is_object() && j.contains("model") && !j.contains("model_version"))
    return spinscale::load_config(path).model;
  return spinscale::model_from_json(j);
}

int run_validate(const std::filesystem::path& path) {
  const auto model = model_for_validation(path);
  const auto rep = spinscale::validate_model(model);
  for (const auto& c : rep.checks)
    std::printf("%s  %s: %s\n", c.pass ? "pass" : "FAIL", c.name.c_str(),
                c.detail.c_str());
  std::printf("%s\n", rep.ok() ? "model admissible" : "model rejected");
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiscale laboratory for lattice spin systems"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int workers = -1;
  bool json_logs = false;
  app.add_option("--config", config_path, "experiment or model JSON file");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seed", seed, "base RNG seed (overrides the config)");
  app.add_option("--workers", workers, "worker threads, 0 = all cores");
  app.add_flag("--json-logs", json_logs, "one JSON object per log line");

  struct SubEntry {
    CLI::App* sub;
    spinscale::StudyKind kind;
  };
  std::vector<SubEntry> studies = {
      {app.add_subcommand("free-energy", "tilt-indexed free energy table"),
       spinscale::StudyKind::free_energy},
      {app.add_subcommand("phi", "mean-indexed conjugate table"),
       spinscale::StudyKind::phi},
      {app.add_subcommand("cramer", "finite-chain vs limit conjugate gap"),
       spinscale::StudyKind::cramer},
      {app.add_subcommand("hessian", "sampled coarse Hessian entries"),
       spinscale::StudyKind::hessian},
      {app.add_subcommand("simulate", "one ensemble with coarse projections"),
       spinscale::StudyKind::simulate},
      {app.add_subcommand("converge", "three-scale error ladder"),
       spinscale::StudyKind::converge},
      {app.add_subcommand("certify", "relaxation-constant certificates"),
       spinscale::StudyKind::certify},
  };
  CLI::App* validate_sub =
      app.add_subcommand("validate", "check a model file for admissibility");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (config_path.empty())
      throw std::invalid_argument("--config is required");
    if (validate_sub->parsed()) return run_validate(config_path);

    spinscale::ExperimentConfig cfg = spinscale::load_config(config_path);
    for (const auto& s : studies)
      if (s.sub->parsed()) cfg.study = s.kind;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (app.count("--seed") > 0) cfg.seed = seed;
    if (workers >= 0) cfg.workers = workers;
    spinscale::finalize_config(cfg);

    spinscale::Logger log;
    log.json = json_logs;
    const auto rep = spinscale::run_study(cfg, log);
    for (const auto& c : rep.criteria)
      std::printf("%s  %s%s%s\n", c.pass ? "pass" : "FAIL", c.name.c_str(),
                  c.detail.empty() ? "" : ": ",
                  c.detail.c_str());
    std::printf("%s: %s (config %s, %.2f s)\n", rep.study.c_str(),
                rep.pass() ? "all criteria passed" : "criterion failed",
                rep.config_hash.c_str(), rep.wall_seconds);
    return rep.pass() ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
