#pragma once

#include "mcflab/app/config.hpp"
#include "mcflab/app/scenario.hpp"
#include "mcflab/barrier.hpp"
#include "mcflab/classify.hpp"
#include "mcflab/flow.hpp"
#include "mcflab/verify.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mcflab::app {

using json = nlohmann::json;

inline constexpr const char* kCodeVersion = "mcflab 0.1.0";
inline constexpr const char* kTimeseriesSchema = "mcflab-timeseries-1";
inline constexpr const char* kSnapshotsFormat = "mcflab-snapshots-1";

enum ExitCode { kExitPass = 0, kExitVerificationFailed = 1, kExitConfigError = 2, kExitAborted = 3 };

// Raw output of the time loop: field snapshots at the record cadence, triples
// of consecutive steps for time derivatives, and the run status.
struct RecordedRun {
  std::vector<Snapshot> records;
  std::vector<long> record_steps;
  std::vector<SnapshotTriple> triples;
  FlowStatus status = FlowStatus::Running;
  std::string diagnostic;
  double H2_time_integral = 0.0;
  long steps = 0;
  double t_final = 0.0;
  double last_dt = 0.0;
};

inline RecordedRun run_flow(const Setup& setup, const ScenarioConfig& cfg,
                            const std::function<void(const FlowState&)>& progress = {}) {
  if (!setup.initial) throw ConfigurationError("scenario '" + cfg.name + "' has no flow");
  const FlowParams& P = setup.params;
  const GraphMapField& initial = *setup.initial;
  FlowState s(initial);
  RecordedRun rec;
  std::vector<double> times, displacement, h2;
  auto record = [&]() {
    rec.records.push_back({s.t, s.field.values()});
    rec.record_steps.push_back(s.step);
    times.push_back(s.t);
    displacement.push_back(image_displacement(s.field, initial));
    h2.push_back(s.summary.H2_integral);
  };
  record();
  std::optional<std::pair<Snapshot, Snapshot>> pending;
  const double t_eps = 1e-12 * std::max(1.0, P.t_end);
  auto active = [&]() {
    return s.status == FlowStatus::Running || (s.status == FlowStatus::Converged && !P.stop_on_converged);
  };
  while (active() && s.t < P.t_end - t_eps) {
    Snapshot before{s.t, s.field.values()};
    advance(s, P, P.t_end - s.t);
    if (s.status == FlowStatus::Aborted) break;
    if (pending) {
      rec.triples.push_back({pending->first, pending->second, {s.t, s.field.values()}});
      pending.reset();
    }
    const bool finishing = (s.status == FlowStatus::Converged && P.stop_on_converged) || s.t >= P.t_end - t_eps;
    if (s.step % P.record_every == 0 || finishing) {
      record();
      if (!finishing && (rec.records.size() - 1) % static_cast<std::size_t>(cfg.snapshot_every) == 0)
        pending = std::make_pair(std::move(before), rec.records.back());
      if (progress) progress(s);
    }
  }
  if (s.status == FlowStatus::Running) s.status = terminal_status(s.status, times, displacement, h2);
  rec.status = s.status;
  rec.diagnostic = s.diagnostic;
  rec.H2_time_integral = s.H2_time_integral;
  rec.steps = s.step;
  rec.t_final = s.t;
  rec.last_dt = s.last_dt;
  return rec;
}

// ---------------------------------------------------------------------------
// Post-processing shared by `run` and `verify`.

struct Analysis {
  CurvatureReport curvature;
  std::optional<BoundConstants> constants;
  std::string constants_error;
  std::vector<TimeSeriesRecord> series;
  std::vector<CheckpointResidual> residuals;
  std::string residual_error;
  std::optional<DecayReport> decay;
  std::optional<InequalityReport> inequalities;
  std::optional<BudgetReport> budget;
  std::optional<ConvexityCertificate> certificate;
  std::optional<ContainmentReport> containment;
  std::string containment_error;
  DiameterFit diameter;
  bool diameter_gated = false;
  std::optional<LimitReport> limit;
  std::string limit_error;
  bool pass = false;
};

inline ClassifyTolerances classify_tolerances(const ScenarioConfig& cfg) {
  ClassifyTolerances tol;
  tol.diam_tol = cfg.diam_tol;
  return tol;
}

inline SamplingParams sampling_params(const ScenarioConfig& cfg) {
  SamplingParams sp;
  sp.point_count = cfg.curvature_points;
  sp.frames_per_point = cfg.curvature_frames;
  sp.seed = static_cast<unsigned>(cfg.seed);
  return sp;
}

inline double decay_tolerance(const ScenarioConfig& cfg, const Grid& G) {
  if (cfg.bound_tol) return *cfg.bound_tol;
  const double h = std::isfinite(G.h_min()) ? G.h_min() : 0.0;
  return 1e-6 + 10.0 * h * h;
}

inline Analysis analyze(const Setup& setup, const ScenarioConfig& cfg, const RecordedRun& rec) {
  Analysis a;
  const GraphMapField& proto = *setup.initial;
  const Grid& G = proto.grid();
  a.curvature = curvature_conditions_report(*setup.M, *setup.N, sampling_params(cfg));
  try {
    a.constants = compute_bound_constants(FlowState(proto), a.curvature);
  } catch (const Error& e) {
    a.constants_error = e.what();
  }
  const bool bounds = a.constants && a.curvature.condA;

  DistanceCache dist(proto.N());
  for (std::size_t k = 0; k < rec.records.size(); ++k) {
    const GraphMapField f = mcflab::detail::with_values(proto, rec.records[k].f);
    std::vector<NodeRate> rates;
    const StateSummary sm = evaluate_state(f, rates);
    TimeSeriesRecord row;
    row.t = rec.records[k].t;
    row.min_p = sm.min_p;
    row.max_lambda = sm.max_lambda;
    row.max_mu = sm.max_mu;
    row.max_df2 = sm.max_df2;
    row.max_H2 = sm.max_H2;
    row.total_volume = sm.volume;
    for (const PointGeometry& pg : all_point_geometry(f)) {
      row.max_A2 = std::max(row.max_A2, pg.A2);
      if (pg.p() > 0.0) row.max_theta = std::max(row.max_theta, theta(pg));
    }
    row.image_diameter = image_diameter(f, dist);
    if (bounds) {
      row.bound_p = a.constants->bound_p(row.t);
      row.bound_df2 = a.constants->bound_df2(row.t);
      row.bound_H2 = a.constants->bound_H2(row.t);
    }
    a.series.push_back(row);
  }

  const std::vector<CurvatureTensors> curvM = node_curvatures(G);
  if (cfg.residuals) {
    try {
      for (const SnapshotTriple& tr : rec.triples) {
        const CheckpointResidual r = residual_p_evolution(proto, tr, curvM);
        a.residuals.push_back(r);
        for (TimeSeriesRecord& row : a.series)
          if (row.t == tr.cur.t) {
            row.residual_p_L2 = r.L2;
            row.residual_p_Linf = r.Linf;
          }
      }
    } catch (const Error& e) {
      a.residual_error = e.what();
    }
  }
  if (cfg.inequalities && a.constants) {
    InequalityReport total;
    total.tol = 0.0;
    for (const SnapshotTriple& tr : rec.triples) {
      const InequalityReport r =
          check_H_and_theta_inequalities(proto, tr, curvM, a.constants->eps1, tr.next.t - tr.cur.t);
      total.tol = std::max(total.tol, r.tol);
      total.merge(r);
    }
    a.inequalities = total;
  }
  if (cfg.decay_bounds && a.constants)
    a.decay = check_decay_bounds(a.series, *a.constants, a.curvature.condA, decay_tolerance(cfg, G));
  if (cfg.budget && !a.series.empty())
    a.budget = volume_budget(a.series.front().total_volume, a.series.back().total_volume, rec.H2_time_integral,
                             cfg.budget_rel_tol);
  if (setup.barrier) {
    a.certificate = certify_m_convexity(*setup.barrier, proto, setup.barrier_m, cfg.seed);
    try {
      a.containment = containment_monitor(rec.records, proto, *setup.barrier);
    } catch (const Error& e) {
      a.containment_error = e.what();
    }
  }
  std::vector<std::pair<double, double>> diam;
  for (const TimeSeriesRecord& row : a.series) diam.push_back({row.t, row.image_diameter});
  a.diameter = diameter_series(diam, a.constants ? a.constants->eps0 : 0.0);
  a.diameter_gated = a.diameter.applicable && rec.status == FlowStatus::Converged;

  try {
    const GraphMapField final_field = mcflab::detail::with_values(proto, rec.records.back().f);
    a.limit = classify_limit(final_field, rec.status, classify_tolerances(cfg), a.curvature.min_Ric > 0.0);
  } catch (const Error& e) {
    a.limit_error = e.what();
  }

  bool pass = a.constants.has_value();
  if (a.decay && a.decay->applicable) pass = pass && a.decay->pass;
  if (a.inequalities) pass = pass && a.inequalities->pass;
  if (a.budget) pass = pass && a.budget->pass;
  if (cfg.residuals) pass = pass && a.residual_error.empty();
  if (setup.barrier) {
    pass = pass && a.containment_error.empty();
    // sublevel sets of a certified barrier must trap the flow
    if (a.certificate->verdict && a.containment) pass = pass && a.containment->contained;
  }
  if (a.diameter_gated) pass = pass && a.diameter.pass;
  a.pass = pass;
  return a;
}

// ---------------------------------------------------------------------------
// Serialization

inline json real(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

inline json to_json(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(real(v(i)));
  return out;
}

inline json to_json(const CurvatureReport& r) {
  return {{"min_Ric", real(r.min_Ric)},
          {"min_BRic", real(r.min_BRic)},
          {"sup_sigma_N", real(r.sup_sigma_N)},
          {"min_Scal", real(r.min_Scal)},
          {"condA", r.condA},
          {"condB", r.condB},
          {"condC", r.condC},
          {"exact", r.exact},
          {"trace_inequalities_hold", r.trace_inequalities_hold},
          {"point_count", r.point_count},
          {"frame_count", r.frame_count},
          {"seed", r.seed}};
}

inline json to_json(const BoundConstants& b) {
  return {{"rho0", real(b.rho0)}, {"c0", real(b.c0)},     {"c1", real(b.c1)},
          {"eps0", real(b.eps0)}, {"eps1", real(b.eps1)}, {"a0", real(b.a0)},
          {"theta0", real(b.theta0)},
          {"note", "a0 = 2 max Theta(0) reconstructs a constant depending only on the initial map"}};
}

inline json to_json(const LimitReport& r) {
  return {{"class", to_string(r.cls)},
          {"reason", r.reason},
          {"max_H", real(r.max_H)},
          {"max_A", real(r.max_A)},
          {"rank", r.rank},
          {"rank_uniform", r.rank_uniform},
          {"mean_lambda", real(r.mean_lambda)},
          {"mean_mu", real(r.mean_mu)},
          {"std_lambda", real(r.std_lambda)},
          {"std_mu", real(r.std_mu)},
          {"max_abs_sigma_N", real(r.max_abs_sigma_N)},
          {"image_closed_curve", r.image_closed_curve},
          {"image_diameter", real(r.image_diameter)},
          {"contradiction", r.contradiction},
          {"untested", r.untested}};
}

inline json snapshot_json(const Snapshot& s) {
  json f = json::array();
  for (const auto& y : s.f) f.push_back({y(0), y(1)});
  return {{"t", s.t}, {"f", f}};
}

inline Snapshot snapshot_from_json(const json& j) {
  Snapshot s;
  s.t = j.at("t").get<double>();
  for (const auto& y : j.at("f")) s.f.emplace_back(y.at(0).get<double>(), y.at(1).get<double>());
  return s;
}

inline FlowStatus parse_status(const std::string& s) {
  if (s == "Running") return FlowStatus::Running;
  if (s == "Converged") return FlowStatus::Converged;
  if (s == "Drifting") return FlowStatus::Drifting;
  if (s == "Aborted") return FlowStatus::Aborted;
  throw ConfigurationError("unknown flow status '" + s + "'");
}

inline json snapshots_json(const ScenarioConfig& cfg, const RecordedRun& rec) {
  json records = json::array();
  for (std::size_t k = 0; k < rec.records.size(); ++k) {
    json r = snapshot_json(rec.records[k]);
    r["step"] = rec.record_steps[k];
    records.push_back(r);
  }
  json triples = json::array();
  for (const SnapshotTriple& tr : rec.triples)
    triples.push_back({{"prev", snapshot_json(tr.prev)}, {"cur", snapshot_json(tr.cur)}, {"next", snapshot_json(tr.next)}});
  return {{"format", kSnapshotsFormat},
          {"scenario", cfg.name},
          {"config_hash", config_hash(cfg)},
          {"status", to_string(rec.status)},
          {"diagnostic", rec.diagnostic},
          {"steps", rec.steps},
          {"t_final", rec.t_final},
          {"last_dt", rec.last_dt},
          {"H2_time_integral", rec.H2_time_integral},
          {"records", records},
          {"triples", triples}};
}

inline RecordedRun recorded_from_json(const json& j) {
  if (j.value("format", "") != kSnapshotsFormat) throw ConfigurationError("snapshots file has an unknown format");
  RecordedRun rec;
  rec.status = parse_status(j.at("status").get<std::string>());
  rec.diagnostic = j.at("diagnostic").get<std::string>();
  rec.steps = j.at("steps").get<long>();
  rec.t_final = j.at("t_final").get<double>();
  rec.last_dt = j.at("last_dt").get<double>();
  rec.H2_time_integral = j.at("H2_time_integral").get<double>();
  for (const auto& r : j.at("records")) {
    rec.records.push_back(snapshot_from_json(r));
    rec.record_steps.push_back(r.at("step").get<long>());
  }
  for (const auto& t : j.at("triples"))
    rec.triples.push_back({snapshot_from_json(t.at("prev")), snapshot_from_json(t.at("cur")),
                           snapshot_from_json(t.at("next"))});
  if (rec.records.empty()) throw ConfigurationError("snapshots file has no records");
  return rec;
}

inline std::string csv_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const std::vector<std::string>& timeseries_columns() {
  static const std::vector<std::string> cols = {
      "t",           "min_p",         "max_lambda",   "max_mu",         "max_H2",
      "max_A2",      "max_theta",     "total_volume", "image_diameter", "bound_p",
      "bound_df2",   "bound_H2",      "residual_p_L2", "residual_p_Linf"};
  return cols;
}

inline std::string timeseries_csv(const std::vector<TimeSeriesRecord>& series) {
  std::string out;
  for (std::size_t i = 0; i < timeseries_columns().size(); ++i) out += (i ? "," : "") + timeseries_columns()[i];
  out += "\n";
  for (const TimeSeriesRecord& r : series) {
    const double v[] = {r.t,         r.min_p,         r.max_lambda,   r.max_mu,         r.max_H2,
                        r.max_A2,    r.max_theta,     r.total_volume, r.image_diameter, r.bound_p,
                        r.bound_df2, r.bound_H2,      r.residual_p_L2, r.residual_p_Linf};
    for (std::size_t i = 0; i < std::size(v); ++i) out += (i ? "," : "") + csv_real(v[i]);
    out += "\n";
  }
  return out;
}

inline json node_location(const Grid& G, int node) {
  if (node < 0) return nullptr;
  return {{"node", node}, {"x", to_json(G.node(node).x)}};
}

inline json verification_json(const Setup& setup, const ScenarioConfig& cfg, const RecordedRun& rec,
                              const Analysis& a) {
  const Grid& G = *setup.grid;
  json checks;
  {
    json d = {{"enabled", cfg.decay_bounds}};
    if (a.decay) {
      d["applicable"] = a.decay->applicable;
      d["pass"] = a.decay->applicable ? json(a.decay->pass) : json(nullptr);
      d["tol"] = real(a.decay->tol);
      if (a.decay->applicable)
        d["worst_margin"] = {{"p", real(a.decay->worst.margin_p)},
                             {"df2", real(a.decay->worst.margin_df2)},
                             {"H2", real(a.decay->worst.margin_H2)},
                             {"theta", real(a.decay->worst.margin_theta)}};
      d["note"] = a.decay->note;
    } else {
      d["applicable"] = false;
      d["pass"] = nullptr;
    }
    checks["decay_bounds"] = d;
  }
  {
    json r = {{"enabled", cfg.residuals}, {"error", a.residual_error}};
    json cps = json::array();
    double max_L2 = 0.0, max_Linf = 0.0;
    for (const CheckpointResidual& c : a.residuals) {
      cps.push_back({{"t", c.t}, {"L2", real(c.L2)}, {"Linf", real(c.Linf)}, {"worst", node_location(G, c.worst_node)}});
      max_L2 = std::max(max_L2, c.L2);
      max_Linf = std::max(max_Linf, c.Linf);
    }
    r["checkpoints"] = cps;
    r["max_L2"] = real(max_L2);
    r["max_Linf"] = real(max_Linf);
    r["note"] = "reported, expected O(dt + h^2); not gated";
    checks["residual_p"] = r;
  }
  {
    json q = {{"enabled", cfg.inequalities}};
    if (a.inequalities) {
      const InequalityReport& r = *a.inequalities;
      q["pass"] = r.pass;
      q["tol"] = real(r.tol);
      q["evaluated"] = r.evaluated;
      q["worst_slack_H"] = r.evaluated ? real(r.worst_slack_H) : json(nullptr);
      q["worst_slack_theta"] = r.evaluated ? real(r.worst_slack_theta) : json(nullptr);
      q["worst_w_excess"] = r.evaluated ? real(r.worst_w_excess) : json(nullptr);
      q["worst_t"] = r.evaluated ? json(r.worst_t) : json(nullptr);
      q["worst"] = node_location(G, r.worst_node);
    }
    checks["inequalities"] = q;
  }
  {
    json b = {{"enabled", cfg.budget}};
    if (a.budget)
      b.update({{"volume_drop", real(a.budget->volume_drop)},
                {"H2_integral", real(a.budget->H2_integral)},
                {"relative_error", real(a.budget->relative_error)},
                {"rel_tol", cfg.budget_rel_tol},
                {"pass", a.budget->pass}});
    checks["volume_budget"] = b;
  }
  if (setup.barrier) {
    json b = {{"kind", setup.barrier->kind}, {"c", setup.barrier->c}, {"m", setup.barrier_m}};
    const ConvexityCertificate& cert = *a.certificate;
    b["certificate"] = {{"verdict", cert.verdict},
                        {"worst_value", real(cert.worst_value)},
                        {"worst_point", cert.worst_point.size() ? to_json(cert.worst_point) : json(nullptr)},
                        {"grid_samples", cert.grid_samples},
                        {"random_samples", cert.random_samples},
                        {"note", cert.note}};
    if (a.containment) {
      const ContainmentReport& c = *a.containment;
      double min_margin = std::numeric_limits<double>::infinity();
      json margins = json::array();
      for (const auto& [t, m] : c.margins) {
        margins.push_back({t, real(m)});
        min_margin = std::min(min_margin, m);
      }
      b["containment"] = {{"contained", c.contained},
                          {"first_escape_t", real(c.first_escape_t)},
                          {"min_margin", real(min_margin)},
                          {"margins", margins},
                          {"note", c.note}};
    } else {
      b["containment"] = {{"error", a.containment_error}};
    }
    b["pass"] = a.containment_error.empty() && !(cert.verdict && a.containment && !a.containment->contained);
    checks["barrier"] = b;
  }
  checks["diameter"] = {{"slope", real(a.diameter.slope)},
                        {"required", real(a.diameter.required)},
                        {"applicable", a.diameter_gated},
                        {"pass", a.diameter_gated ? json(a.diameter.pass) : json(nullptr)}};
  json out = {{"scenario", cfg.name},
              {"config_hash", config_hash(cfg)},
              {"status", to_string(rec.status)},
              {"diagnostic", rec.diagnostic},
              {"t_final", rec.t_final},
              {"steps", rec.steps},
              {"curvature", to_json(a.curvature)},
              {"constants", a.constants ? to_json(*a.constants) : json({{"error", a.constants_error}})},
              {"checks", checks},
              {"pass", a.pass}};
  return out;
}

// Required keys and types of the verification report.
inline void validate_verification_json(const json& j) {
  auto require = [&](const json& obj, const char* key, json::value_t type, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key))
      throw StateError("verification report: missing '" + where + key + "'");
    const json& v = obj.at(key);
    const bool ok = type == json::value_t::number_float ? (v.is_number() || v.is_null() || v.is_string())
                                                        : v.type() == type;
    if (!ok) throw StateError("verification report: '" + where + key + "' has the wrong type");
  };
  require(j, "scenario", json::value_t::string, "");
  require(j, "config_hash", json::value_t::string, "");
  require(j, "status", json::value_t::string, "");
  require(j, "pass", json::value_t::boolean, "");
  require(j, "checks", json::value_t::object, "");
  if (j.contains("curvature")) {
    for (const char* k : {"condA", "condB", "condC"}) require(j["curvature"], k, json::value_t::boolean, "curvature.");
    for (const char* k : {"min_Ric", "min_BRic", "sup_sigma_N"})
      require(j["curvature"], k, json::value_t::number_float, "curvature.");
  }
  for (const auto& [name, check] : j.at("checks").items())
    if (!check.is_object()) throw StateError("verification report: check '" + name + "' is not an object");
}

inline json classification_json(const ScenarioConfig& cfg, const RecordedRun& rec, const Analysis& a) {
  json out = {{"scenario", cfg.name}, {"config_hash", config_hash(cfg)}, {"status", to_string(rec.status)}};
  if (a.limit)
    out["limit"] = to_json(*a.limit);
  else
    out["limit"] = {{"class", to_string(LimitClass::Inconclusive)}, {"error", a.limit_error}};
  return out;
}

inline json hopf_json(const ScenarioConfig& cfg, const HopfReport& h) {
  json checks;
  checks["hopf_singular_values"] = {{"samples", h.samples},
                                    {"seed", h.seed},
                                    {"expected", {2.0, 2.0}},
                                    {"max_dev_lambda", real(h.max_dev_lambda)},
                                    {"max_dev_mu", real(h.max_dev_mu)},
                                    {"max_deviation", real(h.max_deviation)},
                                    {"tol", 1e-10},
                                    {"p", real(h.p)},
                                    {"strictly_area_decreasing", h.p > 0.0},
                                    {"pass", h.pass}};
  return {{"scenario", cfg.name},
          {"config_hash", config_hash(cfg)},
          {"status", "Pointwise"},
          {"checks", checks},
          {"pass", h.pass}};
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigurationError("cannot write '" + p.string() + "'");
  out << content;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string config_hash;
  std::string code_version = kCodeVersion;
  std::string start_time;
  std::string end_time;
  std::string status;
  int exit_code = 0;
  std::string diagnostic;
  std::vector<std::string> files;
};

inline json manifest_json(const RunManifest& m, const std::filesystem::path& dir) {
  json files = json::array();
  for (const std::string& f : m.files) {
    const std::string content = read_file(dir / f);
    char h[20];
    std::snprintf(h, sizeof h, "%016llx", static_cast<unsigned long long>(fnv1a(content)));
    files.push_back({{"name", f}, {"bytes", content.size()}, {"fnv1a", h}});
  }
  return {{"config_hash", m.config_hash}, {"code_version", m.code_version},
          {"start_time", m.start_time},   {"end_time", m.end_time},
          {"status", m.status},           {"exit_code", m.exit_code},
          {"diagnostic", m.diagnostic},   {"timeseries_schema", kTimeseriesSchema},
          {"files", files}};
}

struct RunOutcome {
  RunManifest manifest;
  std::optional<RecordedRun> recorded;
  std::optional<Analysis> analysis;
  std::optional<HopfReport> hopf;
};

// Runs a scenario and writes all outputs into dir (created if needed).
inline RunOutcome run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                               const std::function<void(const FlowState&)>& progress = {}) {
  RunOutcome out;
  RunManifest& m = out.manifest;
  m.config_hash = config_hash(cfg);
  m.start_time = utc_now();
  const Setup setup = build_setup(cfg);
  std::filesystem::create_directories(dir);
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    m.files.push_back(name);
  };
  emit("config.ini", serialize(cfg));
  if (!setup.initial) {
    out.hopf = hopf_singular_values(*setup.M, *setup.N, cfg.samples, cfg.seed);
    const json v = hopf_json(cfg, *out.hopf);
    validate_verification_json(v);
    emit("verification.json", dump(v));
    m.status = "Pointwise";
    m.exit_code = out.hopf->pass ? kExitPass : kExitVerificationFailed;
  } else {
    out.recorded = run_flow(setup, cfg, progress);
    const RecordedRun& rec = *out.recorded;
    out.analysis = analyze(setup, cfg, rec);
    emit("timeseries.csv", timeseries_csv(out.analysis->series));
    emit("snapshots.json", dump(snapshots_json(cfg, rec)));
    const json v = verification_json(setup, cfg, rec, *out.analysis);
    validate_verification_json(v);
    emit("verification.json", dump(v));
    emit("classification.json", dump(classification_json(cfg, rec, *out.analysis)));
    m.status = to_string(rec.status);
    m.diagnostic = rec.diagnostic;
    m.exit_code = rec.status == FlowStatus::Aborted ? kExitAborted
                  : out.analysis->pass               ? kExitPass
                                                     : kExitVerificationFailed;
  }
  m.end_time = utc_now();
  write_file(dir / "manifest.json", dump(manifest_json(m, dir)));
  return out;
}

// Rebuilds setup and recorded run from a run directory.
struct LoadedRun {
  ScenarioConfig cfg;
  Setup setup;
  std::optional<RecordedRun> recorded;
};

inline LoadedRun load_run(const std::filesystem::path& dir) {
  LoadedRun l;
  l.cfg = parse_config(read_file(dir / "config.ini"), (dir / "config.ini").string());
  l.setup = build_setup(l.cfg);
  if (l.setup.initial) {
    const json j = json::parse(read_file(dir / "snapshots.json"));
    if (j.at("config_hash").get<std::string>() != config_hash(l.cfg))
      throw ConfigurationError("snapshots.json does not belong to config.ini in '" + dir.string() + "'");
    l.recorded = recorded_from_json(j);
  }
  return l;
}

}  // namespace mcflab::app
