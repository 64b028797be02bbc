#include "mcflab/mcflab.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

using namespace mcflab;
using namespace mcflab::app;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = "[scenario]\nname = constant_map\n";

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "test.ini");
  } catch (const ConfigurationError& e) {
    return e.what();
  }
  return "";
}

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MCFLAB_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mcflab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string config(const std::string& name) { return std::string(MCFLAB_CONFIG_DIR) + "/" + name + ".ini"; }

}  // namespace

TEST(Ini, ErrorsCarryLineAndColumn) {
  EXPECT_NE(error_of("[scenario\nname = x\n").find("test.ini:1:1"), std::string::npos);
  EXPECT_NE(error_of("name = constant_map\n").find("test.ini:1:1"), std::string::npos);
  EXPECT_NE(error_of("[scenario]\n  name\n").find("test.ini:2:3"), std::string::npos);
  EXPECT_NE(error_of("[scenario]\nname = a\nname = b\n").find("test.ini:3:1"), std::string::npos);
  EXPECT_NE(error_of("[a]\n[a]\n").find("duplicate section"), std::string::npos);
}

TEST(Ini, CommentsAndWhitespace) {
  const IniDocument d = parse_ini("# top\n[s] ; trailing\n  k =  v  # note\n\r\n");
  EXPECT_EQ(d.sections.at("s").at("k").value, "v");
  EXPECT_EQ(d.sections.at("s").at("k").line, 3);
  EXPECT_EQ(d.sections.at("s").at("k").column, 8);
}

TEST(Config, UnknownKeysAndScenariosAreRejectedWithLocation) {
  const std::string e = error_of(std::string(kMinimal) + "[flow]\nt_stop = 3\n");
  EXPECT_NE(e.find("test.ini:4:"), std::string::npos) << e;
  EXPECT_NE(e.find("flow.t_stop"), std::string::npos) << e;
  const std::string s = error_of("[scenario]\nname = nope\n");
  EXPECT_NE(s.find("test.ini:2:8"), std::string::npos) << s;
  EXPECT_NE(s.find("unknown scenario"), std::string::npos);
  EXPECT_NE(error_of("[flow]\nt_end = 1\n").find("scenario.name"), std::string::npos);
}

TEST(Config, BadValuesNameTheKey) {
  const std::string e = error_of(std::string(kMinimal) + "[flow]\ncfl = fast\n");
  EXPECT_NE(e.find("test.ini:4:7"), std::string::npos) << e;
  EXPECT_NE(e.find("flow.cfl"), std::string::npos) << e;
  EXPECT_NE(error_of(std::string(kMinimal) + "[flow]\ncfl = 2\n").find("'flow.cfl'"), std::string::npos);
  EXPECT_NE(error_of(std::string(kMinimal) + "[grid]\nmode = sparse\n").find("grid.mode"), std::string::npos);
}

TEST(Config, MissingRequiredKeyIsNamed) {
  const std::string e = error_of("[scenario]\nname = custom\n[N]\nkind = round_sphere\n[map]\nkind = constant\n");
  EXPECT_NE(e.find("M.kind"), std::string::npos) << e;
}

TEST(Config, PresetsAndDefaults) {
  const ScenarioConfig c = parse_config(kMinimal);
  EXPECT_EQ(c.M_kind, "round_sphere");
  EXPECT_EQ(c.output_dir, "runs/constant_map");
  const ScenarioConfig t = parse_config("[scenario]\nname = tsui_wang_s2\n[map]\namplitude = 0.25\n");
  EXPECT_EQ(t.map_amplitude, 0.25);
  EXPECT_EQ(t.grid_n, 64);
}

TEST(Config, SerializeRoundTripsEveryShippedConfig) {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(MCFLAB_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    ++seen;
    const ScenarioConfig c = load_config(entry.path().string());
    const std::string text = serialize(c);
    EXPECT_EQ(serialize(parse_config(text)), text) << entry.path();
    EXPECT_EQ(config_hash(parse_config(text)), config_hash(c));
  }
  EXPECT_GE(seen, 8);
}

TEST(Config, HashTracksValues) {
  ScenarioConfig c = parse_config(kMinimal);
  const std::string h = config_hash(c);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(config_hash(c), h);
  c.t_end = 1.5;
  EXPECT_NE(config_hash(c), h);
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, SpecialValuesRoundTrip) {
  ScenarioConfig c = parse_config(std::string(kMinimal) + "[flow]\ndt_max = inf\n[verify]\nbound_tol = auto\n");
  EXPECT_TRUE(std::isinf(c.dt_max));
  EXPECT_FALSE(c.bound_tol.has_value());
  c.bound_tol = 1e-3;
  c.N_warp_coefficients = {1.0, 0.0, 0.5};
  const ScenarioConfig back = parse_config(serialize(c));
  EXPECT_EQ(back.bound_tol, 1e-3);
  EXPECT_EQ(back.N_warp_coefficients, c.N_warp_coefficients);
}

TEST(Setup, RejectsMapsThatAreNotStrictlyAreaDecreasing) {
  EXPECT_THROW(build_setup(load_config(config("torus_identity_edge"))), NotAreaDecreasingError);
  ScenarioConfig c = preset("tsui_wang_s2");
  c.map_kind = "circle";
  EXPECT_THROW(build_setup(c), ConfigurationError);
  c = preset("hopf_pointwise");
  c.grid_mode = "reduced";
  EXPECT_THROW(build_setup(c), ConfigurationError);
}

TEST(Setup, BarrierTerms) {
  const auto t = parse_terms("1.5:2:0; -1:0:1");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].coefficient, 1.5);
  EXPECT_EQ(t[1].b, 1);
  EXPECT_THROW(parse_terms("1:2"), ConfigurationError);
}

TEST(Outputs, TimeseriesHeader) {
  const std::string csv = timeseries_csv({});
  EXPECT_EQ(csv,
            "t,min_p,max_lambda,max_mu,max_H2,max_A2,max_theta,total_volume,image_diameter,bound_p,bound_df2,"
            "bound_H2,residual_p_L2,residual_p_Linf\n");
  EXPECT_EQ(csv_real(std::nan("")), "nan");
  EXPECT_EQ(csv_real(0.1), "0.10000000000000001");
}

TEST(Outputs, SnapshotsRoundTrip) {
  RecordedRun r;
  r.records = {{0.0, {{1.0, 2.0}}}, {0.5, {{1.5, 2.5}}}};
  r.record_steps = {0, 7};
  r.triples = {{{0.4, {{1.4, 2.4}}}, {0.5, {{1.5, 2.5}}}, {0.6, {{1.6, 2.6}}}}};
  r.status = FlowStatus::Drifting;
  r.steps = 8;
  r.t_final = 0.6;
  r.H2_time_integral = 0.25;
  const ScenarioConfig c = parse_config(kMinimal);
  const json j = snapshots_json(c, r);
  const RecordedRun b = recorded_from_json(json::parse(j.dump()));
  EXPECT_EQ(b.status, FlowStatus::Drifting);
  EXPECT_EQ(b.record_steps, r.record_steps);
  EXPECT_EQ(b.triples.size(), 1u);
  EXPECT_EQ(b.triples[0].next.f[0], Eigen::Vector2d(1.6, 2.6));
  EXPECT_EQ(snapshots_json(c, b), j);
  json bad = j;
  bad["format"] = "other";
  EXPECT_THROW(recorded_from_json(bad), ConfigurationError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  EXPECT_EQ(cli("--help", dir / "log"), 0);
  EXPECT_EQ(cli("frobnicate", dir / "log"), 2);
  EXPECT_EQ(cli("run " + (dir / "missing.ini").string(), dir / "log"), 2);
  EXPECT_EQ(cli("run " + config("torus_identity_edge") + " --out " + (dir / "edge").string(), dir / "log"), 2);
  EXPECT_NE(read_file(dir / "log").find("min p = 0"), std::string::npos);
  EXPECT_EQ(cli("identities --samples 200 --seed 5", dir / "log"), 0);
  EXPECT_EQ(cli("check-curvature " + config("cylinder_waist"), dir / "log"), 0);
  const json report = json::parse(read_file(dir / "log"));
  EXPECT_TRUE(report.at("report").at("condA").get<bool>());
  EXPECT_EQ(cli("verify " + (dir / "nowhere").string(), dir / "log"), 2);
}

TEST(Cli, RunVerifyClassifyAndReproduce) {
  const fs::path dir = scratch("run");
  ASSERT_EQ(cli("run " + config("constant_map") + " --out " + (dir / "a").string(), dir / "log"), 0);
  ASSERT_EQ(cli("run " + config("constant_map") + " --out " + (dir / "b").string(), dir / "log"), 0);
  for (const char* f : {"config.ini", "timeseries.csv", "snapshots.json", "verification.json", "classification.json"})
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  const json manifest = json::parse(read_file(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest.at("exit_code").get<int>(), 0);
  EXPECT_EQ(manifest.at("config_hash").get<std::string>(), config_hash(load_config(config("constant_map"))));
  EXPECT_EQ(manifest.at("files").size(), 5u);

  const std::string before = read_file(dir / "a" / "verification.json");
  EXPECT_EQ(cli("verify " + (dir / "a").string(), dir / "log"), 0);
  EXPECT_EQ(read_file(dir / "a" / "verification.json"), before);
  EXPECT_EQ(cli("classify " + (dir / "a").string(), dir / "log"), 0);
  EXPECT_NE(read_file(dir / "log").find("Constant"), std::string::npos);
  const json cls = json::parse(read_file(dir / "a" / "classification.json"));
  EXPECT_EQ(cls.at("limit").at("class").get<std::string>(), "Constant");

  // a config edited after the run no longer matches its snapshots
  write_file(dir / "a" / "config.ini", read_file(dir / "a" / "config.ini") + "\n");
  EXPECT_EQ(cli("verify " + (dir / "a").string(), dir / "log"), 0);
  std::string cfg = read_file(dir / "a" / "config.ini");
  cfg.replace(cfg.find("t_end = 1"), 9, "t_end = 2");
  write_file(dir / "a" / "config.ini", cfg);
  EXPECT_EQ(cli("verify " + (dir / "a").string(), dir / "log"), 2);
}

TEST(Cli, HopfWritesPointwiseVerification) {
  const fs::path dir = scratch("hopf");
  ASSERT_EQ(cli("run " + config("hopf_pointwise") + " --out " + (dir / "h").string(), dir / "log"), 0);
  const json v = json::parse(read_file(dir / "h" / "verification.json"));
  EXPECT_TRUE(v.at("pass").get<bool>());
  EXPECT_FALSE(fs::exists(dir / "h" / "timeseries.csv"));
  EXPECT_EQ(cli("verify " + (dir / "h").string(), dir / "log"), 0);
}
