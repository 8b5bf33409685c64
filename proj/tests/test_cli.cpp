// Drives the cyber binary end to end: exit codes, outputs and determinism.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = CYBER_CLI_PATH;
const fs::path kConfigs = CYBER_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cyber_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

int cli(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + kCli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch(name + ".json");
  std::ofstream(p) << text;
  return p;
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json without_timestamps(json m) {
  m.erase("started_at");
  m.erase("finished_at");
  return m;
}

}  // namespace

TEST(CliGame, MleSelectsTheSharperCandidate) {
  const auto out = scratch("mle");
  ASSERT_EQ(cli("game " + (kConfigs / "mle_two_candidates.json").string() + " --out " + out.string()), 0);
  const auto rep = load(out / "report.json");
  ASSERT_EQ(rep["equilibria"].size(), 1u);
  EXPECT_EQ(rep["equilibria"][0]["strategy"], json::array({0.0}));
  EXPECT_EQ(rep["equilibria"][0]["forward"]["rows"], json::parse("[[1.0, 0.0]]"));
  EXPECT_EQ(rep["objective"], -1.0);
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(CliGame, SingletonStrategyIsReturned) {
  const auto cfg = write_config("singleton", R"({
    "game": "vae", "backend": "finite",
    "forward": {"family": "singleton",
                "channel": {"domain": ["z0", "z1"], "codomain": ["x0", "x1"], "rows": [[0.9, 0.1], [0.2, 0.8]]}},
    "backward": {"family": "singleton",
                 "channel": {"domain": ["x0", "x1"], "codomain": ["z0", "z1"], "rows": [[0.5, 0.5], [0.5, 0.5]]}},
    "context": {"prior": {"support": ["z0", "z1"], "probs": [0.3, 0.7]}}
  })");
  const auto out = scratch("singleton_out");
  ASSERT_EQ(cli("game " + cfg.string() + " --out " + out.string()), 0);
  const auto rep = load(out / "report.json");
  ASSERT_EQ(rep["equilibria"].size(), 1u);
  // Singleton families carry no parameters.
  EXPECT_EQ(rep["equilibria"][0]["strategy"], json::array());
  EXPECT_EQ(rep["strategy_dim"], 0);
}

TEST(CliGame, ObjectiveTableCoversTheGrid) {
  const auto out = scratch("table");
  ASSERT_EQ(cli("game " + (kConfigs / "inference_grid.json").string() + " --table --out " + out.string()), 0);
  const std::string csv = slurp(out / "objective_table.csv");
  // 21 rows per observation, two observations, plus the header.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21 * 21 + 1);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,theta0,theta1,theta2,theta3,objective");
}

TEST(CliGame, MalformedJsonIsAConfigError) {
  const auto cfg = write_config("malformed", "{\"game\": ");
  const auto out = scratch("malformed_out");
  EXPECT_EQ(cli("game " + cfg.string() + " --out " + out.string()), 2);
  const auto m = load(out / "manifest.json");
  EXPECT_EQ(m["status"], "config_error");
  EXPECT_TRUE(m["outputs"].empty());
}

TEST(CliGame, SchemaViolationsAreConfigErrors) {
  for (const char* text : {R"({"game": "mle", "candidatez": []})", R"({"game": "nope"})",
                           R"({"game": "mle", "candidates": [{"support": ["a"], "probs": [2]}]})",
                           R"({"game": "mle", "candidates": [{"support": ["a"], "probs": [1]}],
                               "context": {"continuation": {"domain": ["b"], "codomain": ["b"], "rows": [[1]]}}})",
                           R"([1, 2])"}) {
    const auto cfg = write_config("schema", text);
    EXPECT_EQ(cli("game " + cfg.string() + " --out " + scratch("schema_out").string()), 2) << text;
  }
  EXPECT_EQ(cli("game /nonexistent/config.json --out " + scratch("missing").string()), 2);
}

TEST(CliGame, BackendErrorExitsOne) {
  // A softmax family has no enumeration and the inference game no closed form.
  const auto cfg = write_config("softmax", R"({
    "game": "inference",
    "channel": {"domain": ["z0", "z1"], "codomain": ["x0", "x1"], "rows": [[0.9, 0.1], [0.2, 0.8]]},
    "backward": {"family": "softmax", "domain": ["x0", "x1"], "codomain": ["z0", "z1"]},
    "context": {"prior": {"support": ["z0", "z1"], "probs": [0.3, 0.7]}}
  })");
  const auto out = scratch("softmax_out");
  EXPECT_EQ(cli("game " + cfg.string() + " --out " + out.string()), 1);
  EXPECT_EQ(load(out / "manifest.json")["status"], "error");
}

TEST(CliVerify, ExitCodes) {
  EXPECT_EQ(cli("verify --trials 300 --max-dim 5 --seed 42 --out " + scratch("v").string()), 0);
  EXPECT_EQ(cli("verify --trials 0 --out " + scratch("v0").string()), 2);
  EXPECT_EQ(cli("verify --max-dim 1 --out " + scratch("v1").string()), 2);
  EXPECT_EQ(cli("verify --bogus"), 2);
  EXPECT_EQ(cli(""), 2);
}

TEST(CliVerify, CorruptionLeavesAWitness) {
  const auto out = scratch("corrupt");
  EXPECT_EQ(cli("verify --trials 20 --corrupt swap --out " + out.string()), 1);
  const auto w = load(out / "witness.json");
  EXPECT_FALSE(w["failures"].empty());
  EXPECT_EQ(load(out / "manifest.json")["status"], "fail");
}

TEST(CliRealise, ConjugateVaePasses) {
  const auto out = scratch("conj");
  ASSERT_EQ(cli("realise " + (kConfigs / "conjugate_vae.json").string() + " --out " + out.string()), 0);
  const auto rep = load(out / "report.json");
  EXPECT_EQ(rep["status"], "pass");
  EXPECT_EQ(rep["trajectory_csv"], "trajectory.csv");
  EXPECT_TRUE(rep["steps_to_fix"].is_number());
  EXPECT_LE(std::abs(rep["phi_dynamic"].get<double>() - rep["phi_static"].get<double>()), 1e-3);
  EXPECT_EQ(slurp(out / "trajectory.csv").substr(0, 12), "step,theta0,");
}

TEST(CliRealise, OscillationIsInconclusive) {
  const auto out = scratch("osc");
  EXPECT_EQ(cli("realise " + (kConfigs / "oscillating_vae.json").string() + " --out " + out.string()), 3);
  EXPECT_EQ(load(out / "report.json")["status"], "inconclusive");
}

TEST(CliRealise, EnumeratedGameIsAConfigError) {
  EXPECT_EQ(cli("realise " + (kConfigs / "mle_two_candidates.json").string() + " --out " + scratch("r2").string()),
            2);
}

TEST(CliThermostat, DefaultReachesTheGoal) {
  const auto out = scratch("thermo");
  ASSERT_EQ(cli("thermostat --out " + out.string()), 0);
  const auto rep = load(out / "report.json");
  EXPECT_LE(rep["goal_gap"].get<double>(), 0.5);
  EXPECT_LE(rep["steps_to_fix"].get<std::size_t>(), 500u);
}

TEST(CliThermostat, BadFlagsAreUsageErrors) {
  EXPECT_EQ(cli("thermostat --framework nope --out " + scratch("t1").string()), 2);
  EXPECT_EQ(cli("thermostat --levels 0 --out " + scratch("t2").string()), 2);
}

TEST(CliManifest, DigestIsRecomputableFromOutputs) {
  const auto out = scratch("digest");
  ASSERT_EQ(cli("realise " + (kConfigs / "conjugate_vae.json").string() + " --out " + out.string()), 0);
  const auto m = load(out / "manifest.json");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& o : m["outputs"]) {
    const std::string bytes = slurp(out / o["path"].get<std::string>());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    EXPECT_EQ(o["fnv1a64"], buf);
    h = fnv1a(bytes, h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  EXPECT_EQ(m["digest"], buf);
  EXPECT_EQ(m["command"], "realise");
  EXPECT_EQ(m["version"], "0.1.0");
  EXPECT_FALSE(fs::exists(out / "manifest.json.tmp"));
}

TEST(CliManifest, DefaultOutputDirectoryComesFromTheEnvironment) {
  const auto out = scratch("envdir");
  ASSERT_EQ(cli("verify --trials 10", "CYBER_OUT_DIR=" + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "report.json"));
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

// Same command, config and seed, different worker counts and directories.
TEST(CliDeterminism, ByteIdenticalAcrossRunsAndWorkers) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
      {"verify --trials 500 --seed 7", {"report.json"}},
      {"verify --trials 30 --seed 7 --corrupt swap", {"report.json", "witness.json"}},
      {"realise " + (kConfigs / "conjugate_vae.json").string(), {"report.json", "trajectory.csv"}},
      {"thermostat --seed 3", {"report.json", "trajectory.csv"}},
      {"game " + (kConfigs / "inference_grid.json").string() + " --table", {"report.json", "objective_table.csv"}}};
  for (const auto& [args, files] : runs) {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    const int ra = cli(args + " --workers 1 --out " + a.string());
    const int rb = cli(args + " --workers 4 --out " + b.string());
    EXPECT_EQ(ra, rb) << args;
    for (const auto& f : files) EXPECT_EQ(slurp(a / f), slurp(b / f)) << args << " " << f;
    EXPECT_EQ(without_timestamps(load(a / "manifest.json")), without_timestamps(load(b / "manifest.json"))) << args;
  }
}
