#include <doctest.h>

#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "qlo/cli.hpp"

using namespace qlo;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "qlo-cli-XXXXXX").string();
    REQUIRE(mkdtemp(pattern.data()) != nullptr);
    path_ = pattern;
  }
  ~TempDir() { fs::remove_all(path_); }

  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  fs::path path_;
};

int run_main(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"qlo"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : storage) argv.push_back(a.c_str());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

cli::RunConfig parse(std::initializer_list<std::string> args) {
  const std::vector<std::string> v(args);
  return cli::parse_config(v);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("model defaults") {
  const auto cfg = parse({"simulate", "--v0", "2.0", "--t-max", "100"});
  CHECK(cfg.subcommand == cli::Subcommand::simulate);
  CHECK(cfg.model.friction_strength == 0.2);
  CHECK(cfg.model.drive_amplitude == 0.05);
  CHECK(cfg.model.drive_frequency == 2.0);
  CHECK(cfg.model.drive_phase == 0.0);
  CHECK(cfg.simulate.v0 == 2.0);
  CHECK(cfg.integrator.t_max == 100.0);
  CHECK(cfg.integrator.dt == 1e-3);
  CHECK(cfg.seed == 0);
  CHECK(cfg.output_path == "simulate.csv");
  CHECK(cfg.jobs >= 1);
}

TEST_CASE("invalid values are configuration errors") {
  CHECK_THROWS_AS(parse({"simulate", "--dt", "0"}), cli::ConfigError);
  CHECK(run_main({"simulate", "--dt", "0"}) == cli::kExitConfig);
  CHECK(run_main({"simulate", "--t-max", "-1"}) == cli::kExitConfig);
  CHECK(run_main({"simulate", "--k", "abc"}) == cli::kExitConfig);
  CHECK(run_main({"sweep", "--t-obs", "100,10"}) == cli::kExitConfig);
  CHECK(run_main({"uncertainty", "--a0", "0.05"}) == cli::kExitConfig);
  CHECK(run_main({"uncertainty", "--delta-e", "0.6"}) == cli::kExitConfig);
  CHECK(run_main({"lifetimes", "--levels", "1.5"}) == cli::kExitConfig);
  CHECK(run_main({"simulate", "--bogus", "1"}) == cli::kExitConfig);
  CHECK(run_main({}) == cli::kExitConfig);
  CHECK(run_main({"franck-hertz", "--profile", "fig1"}) == cli::kExitConfig);
}

TEST_CASE("error messages name the flag") {
  try {
    parse({"simulate", "--dt", "0"});
    FAIL("expected ConfigError");
  } catch (const cli::ConfigError& e) {
    CHECK(std::string(e.what()).find("--dt") != std::string::npos);
  }
}

TEST_CASE("help exits cleanly") {
  CHECK(run_main({"--help"}) == cli::kExitOk);
  CHECK(run_main({"sweep", "--help"}) == cli::kExitOk);
}

TEST_CASE("flags override the config file") {
  TempDir dir;
  const auto path = dir.file("run.conf");
  write_file(path, "# comment\na0 = 0\n\nt-max=5\n");
  auto cfg = parse({"simulate", "--config", path, "--a0", "0.05"});
  CHECK(cfg.model.drive_amplitude == 0.05);
  CHECK(cfg.integrator.t_max == 5.0);
  cfg = parse({"simulate", "--a0", "0.05", "--config", path});
  CHECK(cfg.model.drive_amplitude == 0.05);
  cfg = parse({"simulate", "--config", path});
  CHECK(cfg.model.drive_amplitude == 0.0);
}

TEST_CASE("unknown config keys are rejected") {
  TempDir dir;
  const auto path = dir.file("bad.conf");
  write_file(path, "a0 = 0\nfrobnicate = 3\n");
  try {
    parse({"simulate", "--config", path});
    FAIL("expected ConfigError");
  } catch (const cli::ConfigError& e) {
    CHECK(std::string(e.what()).find("frobnicate") != std::string::npos);
  }
  CHECK(run_main({"simulate", "--config", path}) == cli::kExitConfig);
  write_file(path, "not a pair\n");
  CHECK(run_main({"simulate", "--config", path}) == cli::kExitConfig);
  CHECK(run_main({"simulate", "--config", dir.file("missing.conf")}) == cli::kExitConfig);
}

TEST_CASE("profiles pin the figure grids") {
  auto cfg = parse({"sweep", "--profile", "fig1"});
  CHECK(cfg.sweep.v0_grid.size() == 46);
  CHECK(cfg.sweep.v0_grid.front() == 0.5);
  CHECK(cfg.sweep.v0_grid.back() == doctest::Approx(5.0));
  CHECK(cfg.sweep.observation_times == std::vector<double>{10, 100, 1000, 10000});

  cfg = parse({"staircase", "--profile", "fig2"});
  CHECK(cfg.integrator.t_max == 1e5);
  CHECK(0.5 * cfg.staircase.v0 * cfg.staircase.v0 == doctest::Approx(3.2));

  cfg = parse({"franck-hertz", "--profile", "fig3"});
  CHECK(cfg.franck_hertz.t0_grid.size() == 39);
  CHECK(cfg.franck_hertz.t0_grid.front() == doctest::Approx(0.1));
  CHECK(cfg.franck_hertz.t0_grid.back() == doctest::Approx(2.0));
  CHECK(cfg.franck_hertz.collision.n_phases == 64);
  CHECK(cfg.franck_hertz.collision.mass_ratio == 1.0);
  CHECK(cfg.model.drive_amplitude == 0.0);
}

TEST_CASE("franck-hertz grid cardinality") {
  TempDir dir;
  const auto out = dir.file("fh.csv");
  REQUIRE(run_main({"franck-hertz", "--t0-min", "0.1", "--t0-max", "2.0", "--t0-steps", "39",
                    "--phases", "4", "--output", out}) == cli::kExitOk);
  const auto rows = lines(slurp(out));
  REQUIRE(rows.size() == 40);
  CHECK(rows[0] == "t0,mean_final_energy,mean_final_speed,n_phases,non_settled_count");
  CHECK(rows[1].rfind("0.10000000000000001,", 0) == 0);
  CHECK(fs::exists(out + ".manifest"));
}

TEST_CASE("uncertainty rows") {
  TempDir dir;
  const auto out = dir.file("u.csv");
  REQUIRE(run_main({"uncertainty", "--level", "2", "--delta-e", "0.05,0.1,0.2", "--output", out}) ==
          cli::kExitOk);
  const auto rows = lines(slurp(out));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "n,delta_e,delta_t,product,predicted");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].rfind("2,", 0) == 0);
    CHECK(rows[i].find(",1.266514795529222") != std::string::npos);
  }
}

TEST_CASE("reruns are byte-identical") {
  TempDir dir;
  const auto a = dir.file("a.csv");
  const auto b = dir.file("b.csv");
  REQUIRE(run_main({"simulate", "--v0", "2.3", "--t-max", "30", "--output", a}) == cli::kExitOk);
  REQUIRE(run_main({"simulate", "--v0", "2.3", "--t-max", "30", "--output", b}) == cli::kExitOk);
  CHECK(slurp(a) == slurp(b));

  REQUIRE(run_main({"lifetimes", "--levels", "2,3", "--ensemble", "3", "--t-max", "300",
                    "--seed", "5", "--jobs", "1", "--output", a}) == cli::kExitOk);
  REQUIRE(run_main({"lifetimes", "--levels", "2,3", "--ensemble", "3", "--t-max", "300",
                    "--seed", "5", "--jobs", "3", "--output", b}) == cli::kExitOk);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).find('\r') == std::string::npos);
}

TEST_CASE("manifest echoes the resolved configuration") {
  TempDir dir;
  const auto out = dir.file("s.csv");
  REQUIRE(run_main({"simulate", "--t-max", "1", "--k", "0.3", "--output", out}) == cli::kExitOk);
  const auto text = slurp(out + ".manifest");
  CHECK(text.find("version=") != std::string::npos);
  CHECK(text.find("subcommand=simulate\n") != std::string::npos);
  CHECK(text.find("k=0.29999999999999999\n") != std::string::npos);
  CHECK(text.find("failures.numerical=0\n") != std::string::npos);
  CHECK(text.find("wall_clock_seconds=") != std::string::npos);
}

TEST_CASE("staircase side files") {
  TempDir dir;
  const auto out = dir.file("stairs.csv");
  REQUIRE(run_main({"staircase", "--e0", "3.2", "--a0", "0", "--t-max", "3000", "--output", out}) ==
          cli::kExitOk);
  const auto plateaus = lines(slurp(dir.file("stairs.plateaus.csv")));
  REQUIRE(plateaus.size() == 2);
  CHECK(plateaus[0] == "level,t_arrive,t_leave,lifetime,open");
  CHECK(plateaus[1].rfind("2,", 0) == 0);
  CHECK(lines(slurp(dir.file("stairs.transitions.csv"))).size() == 1);
}

TEST_CASE("numerical failure exits with 3 and keeps partial output") {
  TempDir dir;
  const auto out = dir.file("bad.csv");
  CHECK(run_main({"simulate", "--v0", "1e200", "--t-max", "1", "--output", out}) ==
        cli::kExitNumerical);
  CHECK(lines(slurp(out)).size() == 2);
  CHECK(slurp(out + ".manifest").find("failures.numerical=1\n") != std::string::npos);
}

TEST_CASE("key-value reader") {
  TempDir dir;
  const auto path = dir.file("kv.conf");
  write_file(path, "  k = 0.1 \r\n--dt=0.01\n# x = y\n");
  const auto kv = cli::read_key_values(path);
  REQUIRE(kv.size() == 2);
  CHECK(kv[0] == std::pair<std::string, std::string>{"k", "0.1"});
  CHECK(kv[1] == std::pair<std::string, std::string>{"dt", "0.01"});
}
