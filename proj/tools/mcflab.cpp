#include "mcflab/mcflab.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace mcflab;
using namespace mcflab::app;

namespace {

int check_curvature(const std::string& path) {
  const ScenarioConfig cfg = load_config(path);
  const auto M = build_M(cfg);
  const auto N = build_N(cfg);
  const CurvatureReport r = curvature_conditions_report(*M, *N, sampling_params(cfg));
  std::cout << dump({{"M", M->name()}, {"N", N->name()}, {"report", to_json(r)}});
  return kExitPass;
}

int run(const std::string& path, const std::string& out) {
  const ScenarioConfig cfg = load_config(path);
  const fs::path dir = out.empty() ? fs::path(cfg.output_dir) : fs::path(out);
  const RunOutcome o = run_scenario(cfg, dir);
  std::cout << "scenario   " << cfg.name << "\n";
  std::cout << "status     " << o.manifest.status << "\n";
  if (!o.manifest.diagnostic.empty()) std::cout << "diagnostic " << o.manifest.diagnostic << "\n";
  if (o.recorded) std::cout << "t_final    " << o.recorded->t_final << " after " << o.recorded->steps << " steps\n";
  if (o.analysis && o.analysis->limit) std::cout << "limit      " << to_string(o.analysis->limit->cls) << "\n";
  if (o.hopf) std::cout << "hopf       max |(lambda, mu) - (2, 2)| = " << o.hopf->max_deviation << "\n";
  std::cout << "verified   " << (o.manifest.exit_code == kExitPass ? "pass" : "FAIL") << "\n";
  std::cout << "outputs    " << dir.string() << "\n";
  return o.manifest.exit_code;
}

int verify(const std::string& dir) {
  const LoadedRun l = load_run(dir);
  json v;
  int code = kExitPass;
  if (!l.recorded) {
    const HopfReport h = hopf_singular_values(*l.setup.M, *l.setup.N, l.cfg.samples, l.cfg.seed);
    v = hopf_json(l.cfg, h);
    code = h.pass ? kExitPass : kExitVerificationFailed;
  } else {
    const Analysis a = analyze(l.setup, l.cfg, *l.recorded);
    v = verification_json(l.setup, l.cfg, *l.recorded, a);
    code = l.recorded->status == FlowStatus::Aborted ? kExitAborted
           : a.pass                                  ? kExitPass
                                                     : kExitVerificationFailed;
  }
  validate_verification_json(v);
  write_file(fs::path(dir) / "verification.json", dump(v));
  for (const auto& [name, check] : v.at("checks").items()) {
    const json pass = check.value("pass", json(nullptr));
    std::cout << name << ": " << (pass.is_null() ? "n/a" : pass.get<bool>() ? "pass" : "FAIL") << "\n";
  }
  std::cout << "overall: " << (v.at("pass").get<bool>() ? "pass" : "FAIL") << "\n";
  return code;
}

int classify(const std::string& dir) {
  const LoadedRun l = load_run(dir);
  if (!l.recorded) throw ConfigurationError("run '" + dir + "' has no flow to classify");
  const RecordedRun& rec = *l.recorded;
  Analysis a;
  a.curvature = curvature_conditions_report(*l.setup.M, *l.setup.N, sampling_params(l.cfg));
  try {
    a.limit = classify_limit(mcflab::detail::with_values(*l.setup.initial, rec.records.back().f), rec.status,
                             classify_tolerances(l.cfg), a.curvature.min_Ric > 0.0);
  } catch (const Error& e) {
    a.limit_error = e.what();
  }
  const json c = classification_json(l.cfg, rec, a);
  write_file(fs::path(dir) / "classification.json", dump(c));
  std::cout << c.at("limit").at("class").get<std::string>();
  if (a.limit) std::cout << " (" << a.limit->reason << ")";
  std::cout << "\n";
  return rec.status == FlowStatus::Aborted ? kExitAborted : kExitPass;
}

int identities(int samples, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const IdentityReport r = run_identities(samples, seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& [name, e] : r.errors) std::printf("%-46s %.3e\n", name.c_str(), e);
  std::printf("samples %d (area decreasing %d), seed %llu, %.2f s\n", r.samples, r.area_decreasing_samples,
              static_cast<unsigned long long>(r.seed), secs);
  std::printf("max error %.3e (tol %.0e): %s\n", r.max_error, r.tol, r.pass ? "pass" : "FAIL");
  return r.pass ? kExitPass : kExitVerificationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graphical mean curvature flow lab for area decreasing maps into surfaces"};
  app.require_subcommand(1);

  std::string config, out, run_dir;
  int samples = 10000;
  std::uint64_t seed = 20240601;

  auto* cc = app.add_subcommand("check-curvature", "Report curvature conditions (A), (B), (C) for a config");
  cc->add_option("config", config, "Scenario config file")->required();
  auto* rn = app.add_subcommand("run", "Run a scenario and write its outputs");
  rn->add_option("config", config, "Scenario config file")->required();
  rn->add_option("--out", out, "Output directory (default: output.dir of the config)");
  auto* vf = app.add_subcommand("verify", "Recompute verification.json for a run directory");
  vf->add_option("run-dir", run_dir, "Run directory")->required();
  auto* cl = app.add_subcommand("classify", "Recompute classification.json for a run directory");
  cl->add_option("run-dir", run_dir, "Run directory")->required();
  auto* id = app.add_subcommand("identities", "Randomized algebraic identity suite");
  id->add_option("--samples", samples, "Number of random samples")->check(CLI::PositiveNumber);
  id->add_option("--seed", seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfigError;
  }

  try {
    if (*cc) return check_curvature(config);
    if (*rn) return run(config, out);
    if (*vf) return verify(run_dir);
    if (*cl) return classify(run_dir);
    if (*id) return identities(samples, seed);
  } catch (const ConfigurationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const NotAreaDecreasingError& e) {
    std::cerr << "rejected: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "malformed run file: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
  return kExitConfigError;
}
