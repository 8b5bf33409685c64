// cyber: verification campaigns, game runs, realisations and the thermostat.
//
// Exit codes: 0 pass, 1 fail or backend error, 2 usage or config, 3 inconclusive.
// Every run that gets as far as knowing its output directory leaves a
// manifest.json there, written last and atomically.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "cyber/config.hpp"

namespace fs = std::filesystem;
using cyber::json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit : int { kPass = 0, kFail = 1, kUsage = 2, kInconclusive = 3 };

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << bytes;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cyber::ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_config(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw cyber::ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

// Outputs are recorded by file name; the manifest lists them in write order
// and digests their bytes.
class Run {
 public:
  Run(std::string command, fs::path out, std::uint64_t seed)
      : command_(std::move(command)), out_(std::move(out)), seed_(seed), started_(utc_now()) {}

  void set_config(json c) { config_ = std::move(c); }
  void set_seed(std::uint64_t s) { seed_ = s; }

  void emit(const std::string& name, const std::string& bytes) {
    fs::create_directories(out_);
    write_atomic(out_ / name, bytes);
    outputs_.emplace_back(name, fnv1a(bytes));
  }

  int finish(int code, const std::string& status, const std::string& message = {}) {
    json outputs = json::array();
    std::uint64_t digest = 0xcbf29ce484222325ULL;
    for (const auto& [name, h] : outputs_) {
      outputs.push_back({{"path", name}, {"fnv1a64", hex(h)}});
      digest = fnv1a(read_file(out_ / name), digest);
    }
    json m{{"command", command_},
           {"config", config_},
           {"seed", seed_},
           {"version", kVersion},
           {"started_at", started_},
           {"finished_at", utc_now()},
           {"exit_code", code},
           {"status", status},
           {"outputs", outputs},
           {"digest", hex(digest)}};
    if (!message.empty()) m["message"] = message;
    try {
      fs::create_directories(out_);
      write_atomic(out_ / "manifest.json", pretty(m));
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kFail;
    }
    return code;
  }

 private:
  std::string command_;
  fs::path out_;
  std::uint64_t seed_;
  std::string started_;
  json config_ = json::object();
  std::vector<std::pair<std::string, std::uint64_t>> outputs_;
};

// Runs body, mapping exceptions to the exit-code contract.
template <class Body>
int guarded(Run& run, Body body) {
  try {
    return body();
  } catch (const cyber::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return run.finish(kUsage, "config_error", e.what());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return run.finish(kFail, "error", e.what());
  }
}

int check_exit(cyber::CheckStatus s) {
  switch (s) {
    case cyber::CheckStatus::Pass: return kPass;
    case cyber::CheckStatus::Fail: return kFail;
    case cyber::CheckStatus::Inconclusive: return kInconclusive;
  }
  return kFail;
}

struct Common {
  std::string out;
  std::uint64_t seed = 42;
  bool seed_given = false;
  unsigned workers = 1;
};

// The --seed flag wins over a config's "seed", which wins over the default.
std::uint64_t effective_seed(const Common& c, const json& cfg) {
  if (c.seed_given || !cfg.is_object() || !cfg.contains("seed")) return c.seed;
  if (!cfg.at("seed").is_number_unsigned()) throw cyber::ConfigError("config: seed must be a non-negative integer");
  return cfg.at("seed").get<std::uint64_t>();
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output directory (default: $CYBER_OUT_DIR or ./cyber_out)");
  app->add_option("--seed", c.seed, "Seed for every random choice")->capture_default_str();
  app->add_option("--workers", c.workers, "Worker threads; results do not depend on this")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

fs::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("CYBER_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "cyber_out";
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::size_t trials = 1000;
  int max_dim = 5;
  double tol = cyber::kTol.almost_eq;
  std::string corrupt;
};

int cmd_verify(const Common& c, const VerifyArgs& a) {
  Run run("verify", out_dir(c), c.seed);
  run.set_config({{"trials", a.trials},
                  {"max_dim", a.max_dim},
                  {"seed", c.seed},
                  {"tol", a.tol},
                  {"corrupt", a.corrupt.empty() ? json(nullptr) : json(a.corrupt)}});
  return guarded(run, [&] {
    cyber::OpticalBayesOptions o;
    o.trials = a.trials;
    o.max_dim = a.max_dim;
    o.seed = c.seed;
    o.tol = a.tol;
    o.workers = c.workers;
    if (a.corrupt == "swap") o.corrupt = cyber::swap_entries;
    const auto rep = cyber::verify_optical_bayes(o);
    run.emit("report.json", pretty(rep.to_json()));
    std::cout << "verify: " << rep.passes << "/" << rep.trials << " trials pass, worst tv " << rep.worst_tv << "\n";
    if (rep.failures.empty()) return run.finish(kPass, "pass");
    run.emit("witness.json", pretty(json{{"failures", rep.failures}}));
    return run.finish(kFail, "fail");
  });
}

// ---------------------------------------------------------------------------

json strategy_json(const cyber::Strategy& s) { return cyber::to_json(Eigen::VectorXd(s)); }

std::string objective_table_csv(const cyber::OpenGame& g, const cyber::Context& ctx) {
  const auto values = g.objective_table(ctx);
  const auto& space = g.strategies();
  std::ostringstream os;
  os << "index";
  for (int i = 0; i < space.dim(); ++i) os << ",theta" << i;
  os << ",objective\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << i;
    const auto s = space.at(i);
    for (Eigen::Index k = 0; k < s.size(); ++k) os << "," << cyber::format_double(s(k));
    os << "," << cyber::format_double(values[i]) << "\n";
  }
  return os.str();
}

int cmd_game(const Common& c, const std::string& config_path, bool table) {
  Run run("game", out_dir(c), c.seed);
  return guarded(run, [&] {
    json cfg = parse_config(config_path);
    run.set_config(cfg);
    const std::uint64_t seed = effective_seed(c, cfg);
    run.set_seed(seed);
    auto setup = cyber::game_from_json(cfg, seed);
    const auto& g = setup.game;
    const auto eq = g.equilibria(setup.context);
    json equilibria = json::array();
    for (const auto& s : eq) {
      equilibria.push_back({{"strategy", strategy_json(s)},
                            {"objective", g.fitness(s, setup.context)},
                            {"forward", cyber::to_json(g.play(s).forward())}});
    }
    json report{{"game", g.name()},
                {"strategy_dim", g.strategies().dim()},
                {"equilibria", equilibria},
                {"objective", eq.empty() ? json(nullptr) : json(g.fitness(eq.front(), setup.context))},
                {"objective_table", nullptr}};
    if (table) {
      if (!g.strategies().enumerable()) throw cyber::ConfigError("--table needs an enumerable strategy space");
      report["objective_table"] = "objective_table.csv";
      run.emit("objective_table.csv", objective_table_csv(g, setup.context));
    }
    run.emit("report.json", pretty(report));
    std::cout << "game " << g.name() << ": " << eq.size() << " equilibri" << (eq.size() == 1 ? "um" : "a") << "\n";
    return run.finish(kPass, "pass");
  });
}

// ---------------------------------------------------------------------------

int emit_check(Run& run, cyber::CyberneticReport& rep, json extra = json::object()) {
  rep.trajectory_csv = "trajectory.csv";
  run.emit("trajectory.csv", rep.run.trajectory.to_csv());
  json j = rep.to_json();
  for (const auto& [k, v] : extra.items()) j[k] = v;
  run.emit("report.json", pretty(j));
  std::cout << "status " << cyber::to_string(rep.status) << ", phi_dynamic " << rep.phi_dynamic << ", phi_static "
            << rep.phi_static << "\n";
  const int code = check_exit(rep.status);
  return run.finish(code, cyber::to_string(rep.status));
}

int cmd_realise(const Common& c, const std::string& config_path) {
  Run run("realise", out_dir(c), c.seed);
  return guarded(run, [&] {
    json cfg = parse_config(config_path);
    run.set_config(cfg);
    const std::uint64_t seed = effective_seed(c, cfg);
    run.set_seed(seed);
    auto setup = cyber::realise_from_json(cfg, seed);
    cyber::Realisation r{setup.game.game, setup.dynamics};
    auto rep = cyber::cybernetic_check(r, setup.game.context, setup.theta0, setup.tol, setup.realise);
    return emit_check(run, rep);
  });
}

// ---------------------------------------------------------------------------

struct ThermostatArgs {
  std::string config;
  std::string framework = "fep";
  std::optional<double> goal, x0, env_noise, action_cost, eta, tol;
  std::optional<int> levels;
  std::optional<std::size_t> steps;
};

int cmd_thermostat(const Common& c, const ThermostatArgs& a) {
  Run run("thermostat", out_dir(c), c.seed);
  return guarded(run, [&] {
    json j = a.config.empty() ? json::object() : parse_config(a.config);
    if (!j.is_object()) throw cyber::ConfigError("thermostat config must be a JSON object");
    if (a.goal) j["goal"] = *a.goal;
    if (a.x0) j["x0"] = *a.x0;
    if (a.env_noise) j["env_noise_var"] = *a.env_noise;
    if (a.action_cost) j["action_cost"] = *a.action_cost;
    if (a.eta) j["eta"] = *a.eta;
    if (a.tol) j["tol"] = *a.tol;
    if (a.levels) j["levels"] = *a.levels;
    if (a.steps) j["max_steps"] = *a.steps;
    cyber::ThermostatConfig cfg;
    try {
      cfg = cyber::ThermostatConfig::from_json(j);
    } catch (const std::exception& e) {
      throw cyber::ConfigError(e.what());
    }
    json full = cfg.to_json();
    full["framework"] = a.framework;
    run.set_config(full);
    auto rep = cyber::run_thermostat(
        cfg, a.framework == "fep" ? cyber::Framework::FreeEnergy : cyber::Framework::DeepActiveInference);
    std::cout << "sensed mean " << rep.sensed_mean << ", goal gap " << rep.goal_gap << "\n";
    return emit_check(run, rep.check,
                      {{"sensed_mean", rep.sensed_mean}, {"goal_gap", rep.goal_gap}, {"framework", a.framework}});
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open games over Bayesian lenses: verification, games, realisations"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Check that Bayesian inversions compose optically on random instances");
  add_common(verify, common);
  verify->add_option("--trials", va.trials, "Random instances")->check(CLI::PositiveNumber)->capture_default_str();
  verify->add_option("--max-dim", va.max_dim, "Largest outcome count")->check(CLI::Range(2, 64))->capture_default_str();
  verify->add_option("--tol", va.tol, "TV tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  verify->add_option("--corrupt", va.corrupt, "Test hook: corrupt the composite backward")
      ->check(CLI::IsMember({"swap"}))
      ->group("");

  std::string game_config;
  bool table = false;
  auto* game = app.add_subcommand("game", "Solve a game described by a JSON config");
  add_common(game, common);
  game->add_option("config", game_config, "Game config (JSON)")->required();
  game->add_flag("--table", table, "Also write the objective over every strategy");

  std::string realise_config;
  auto* realise = app.add_subcommand("realise", "Realise a game by gradient descent and check the cybernetic condition");
  add_common(realise, common);
  realise->add_option("config", realise_config, "Game config with run parameters (JSON)")->required();

  ThermostatArgs ta;
  auto* thermo = app.add_subcommand("thermostat", "Active-inference thermostat");
  add_common(thermo, common);
  thermo->add_option("--config", ta.config, "Scenario config (JSON)");
  thermo->add_option("--framework", ta.framework, "fep or deep_ai")
      ->check(CLI::IsMember({"fep", "deep_ai"}))
      ->capture_default_str();
  thermo->add_option("--goal", ta.goal, "Goal temperature");
  thermo->add_option("--x0", ta.x0, "Temperature without action");
  thermo->add_option("--env-noise", ta.env_noise, "Environment noise variance");
  thermo->add_option("--action-cost", ta.action_cost, "Quadratic action cost");
  thermo->add_option("--eta", ta.eta, "Step size");
  thermo->add_option("--tol", ta.tol, "Tolerance of the cybernetic check");
  thermo->add_option("--levels", ta.levels, "1, or 2 for a pass-through upper level");
  thermo->add_option("--steps", ta.steps, "Step budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  for (auto* sub : {verify, game, realise, thermo})
    if (sub->parsed()) common.seed_given = sub->get_option("--seed")->count() > 0;
  cyber::set_default_workers(common.workers);
  if (verify->parsed()) return cmd_verify(common, va);
  if (game->parsed()) return cmd_game(common, game_config, table);
  if (realise->parsed()) return cmd_realise(common, realise_config);
  return cmd_thermostat(common, ta);
}
