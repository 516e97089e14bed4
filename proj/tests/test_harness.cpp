#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "blowup/harness/experiments.hpp"

using namespace blowup::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* base = std::getenv("BLOWUP_LAB_TEST_TMP");
  const fs::path dir = fs::path(base && *base ? base : fs::temp_directory_path().string()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

// Column lookup in a one-row summary CSV.
std::string summary_value(const fs::path& path, const std::string& column) {
  const auto rows = parse_csv(slurp(path));
  REQUIRE(rows.size() == 2);
  for (std::size_t i = 0; i < rows[0].size(); ++i)
    if (rows[0][i] == column) return rows[1][i];
  FAIL("missing column " << column);
  return {};
}

int run_quiet(Experiment experiment, const Config& config, const fs::path& out, int workers = 1) {
  RunOptions options;
  options.out_dir = out;
  options.workers = workers;
  return run(experiment, config, options);
}

}  // namespace

TEST_CASE("experiment names") {
  for (auto experiment : all_experiments()) CHECK(parse_experiment(to_string(experiment)) == experiment);
  CHECK_FALSE(parse_experiment("nonsense").has_value());
  CHECK(all_experiments().size() == 9);
}

TEST_CASE("resolve fills defaults and rejects bad keys") {
  const auto resolved = resolve(Config::parse("[forcing]\np = 3\n"));
  CHECK(resolved.number("forcing.p") == 3.0);
  CHECK(resolved.number("absorption.m") == 3.0);
  CHECK(resolved.entries().size() == default_config().entries().size());

  CHECK_THROWS_AS((void)resolve(Config::parse("[forcing]\npp = 3\n")), UsageError);
  CHECK_THROWS_AS((void)resolve(Config::parse("[forcing]\np = \"three\"\n")), UsageError);
  CHECK_THROWS_AS((void)resolve(Config::parse("[geometry]\nN = 2.5\n")), UsageError);
  CHECK_THROWS_AS((void)resolve(Config::parse("[forcing]\nkind = \"cubic\"\n")), UsageError);
  CHECK_THROWS_AS((void)resolve(Config::parse("[sweep.axes]\n\"forcing.kind\" = [1]\n")), UsageError);
  CHECK_THROWS_AS((void)resolve(Config::parse("[sweep]\nexperiment = \"check\"\n")), UsageError);
  CHECK_NOTHROW((void)resolve(Config::parse("[meta]\nwall_time_seconds = 3\n")));
}

TEST_CASE("ode experiment finds T = 1 for the square law and its sidecar replays the run") {
  const auto out = scratch("ode");
  const auto config = Config::parse("[forcing]\np = 2\nlambda = 1\n[initial]\nu0 = 1\n");
  REQUIRE(run_quiet(Experiment::Ode, config, out) == 0);
  const double T = std::stod(summary_value(out / "ode.csv", "T_est"));
  CHECK(std::abs(T - 1.0) <= 1e-6);
  CHECK(fs::exists(out / "ode_trajectory.csv"));

  const auto sidecar = Config::load(out / std::string(kSidecarName));
  CHECK(sidecar.text("meta.status") == "ok");
  CHECK(sidecar.text("meta.version") == kToolVersion);
  CHECK(sidecar.number("meta.wall_time_seconds") >= 0.0);

  const auto replay = scratch("ode_replay");
  REQUIRE(run_quiet(Experiment::Ode, sidecar, replay) == 0);
  CHECK(slurp(replay / "ode.csv") == slurp(out / "ode.csv"));
  CHECK(slurp(replay / "ode_trajectory.csv") == slurp(out / "ode_trajectory.csv"));
}

TEST_CASE("contract violations exit with 2 and name the parameter") {
  const auto out = scratch("violation");
  std::ostringstream log;
  RunOptions options;
  options.out_dir = out;
  options.log = &log;
  CHECK(run(Experiment::Ode, Config::parse("[forcing]\nlambda = -1\n"), options) == 2);
  CHECK(log.str().find("forcing.lambda") != std::string::npos);
  CHECK(Config::load(out / std::string(kSidecarName)).text("meta.error_parameter") == "forcing.lambda");
  CHECK_THROWS_AS((void)run(Experiment::Ode, Config::parse("bogus = 1\n"), options), UsageError);
}

TEST_CASE("output directory falls back to the environment") {
  RunOptions options;
  options.out_dir = "explicit";
  CHECK(output_directory(options) == "explicit");
  options.out_dir.clear();
  setenv(std::string(kOutputEnv).c_str(), "from_env", 1);
  CHECK(output_directory(options) == "from_env");
  unsetenv(std::string(kOutputEnv).c_str());
  CHECK(output_directory(options) == "blowup_out");
}

TEST_CASE("sweep cells are ordered lexicographically in the axes") {
  const auto resolved = resolve(Config::parse("[sweep.axes]\n\"initial.u0\" = [1, 2]\n\"forcing.p\" = [2, 3, 4]\n"));
  const auto cells = sweep_cells(resolved);
  REQUIRE(cells.size() == 6);
  // Axes sorted by key: forcing.p outermost, initial.u0 fastest.
  CHECK(cells[0].axis_values == std::vector<double>{2.0, 1.0});
  CHECK(cells[1].axis_values == std::vector<double>{2.0, 2.0});
  CHECK(cells[5].axis_values == std::vector<double>{4.0, 2.0});
  CHECK(cells[3].config.number("forcing.p") == 3.0);
  CHECK(cells[3].config.number("initial.u0") == 2.0);
  CHECK(sweep_cells(resolve(Config{})).size() == 1);
}

TEST_CASE("sweeps are byte-identical for any worker count") {
  const auto config = resolve(Config::parse(R"([sweep]
experiment = "ode"
[sweep.axes]
"forcing.p" = [1.5, 2, 3, 0.5]
"forcing.lambda" = [0.5, 2]
)"));
  std::ostringstream serial, parallel, log;
  const int failures = run_sweep(config, 1, serial, log);
  CHECK(run_sweep(config, 8, parallel, log) == failures);
  CHECK(serial.str() == parallel.str());
  // p = 0.5 never reaches the cap: recorded per cell, the sweep carries on.
  CHECK(failures == 2);
  const auto rows = parse_csv(serial.str());
  REQUIRE(rows.size() == 9);
  CHECK(rows[0][0] == "forcing.lambda");
  CHECK(rows[0][2] == "status");
  CHECK(rows[1][2] == "ok");
  CHECK(rows[4][2] == "CapNotReached");
  CHECK(rows[4][3] == "numerics.cap");
}

TEST_CASE("a one-cell sweep matches the single run") {
  const auto config = Config::parse("[sweep]\nexperiment = \"ode\"\n[sweep.axes]\n\"forcing.p\" = [3]\n");
  std::ostringstream csv, log;
  REQUIRE(run_sweep(resolve(config), 1, csv, log) == 0);
  const auto out = scratch("single");
  REQUIRE(run_quiet(Experiment::Ode, Config::parse("[forcing]\np = 3\n"), out) == 0);
  const auto sweep_rows = parse_csv(csv.str());
  const auto single_rows = parse_csv(slurp(out / "ode.csv"));
  REQUIRE(sweep_rows.size() == 2);
  // Sweep rows carry the axis, status and error columns in front of the summary.
  const std::vector<std::string> tail(sweep_rows[1].begin() + 3, sweep_rows[1].end());
  CHECK(tail == single_rows[1]);
}

TEST_CASE("lambda sweep flips from refusal to a run at the gate") {
  const auto config = resolve(Config::parse(R"([forcing]
p = 2
[absorption]
m = 3
[numerics]
cap = 1000
[evolution]
certify = false
[sweep.axes]
"forcing.lambda" = [0.5, 0.9, 1.5]
)"));
  std::ostringstream csv, log;
  CHECK(run_sweep(config, 2, csv, log) == 1);
  const auto rows = parse_csv(csv.str());
  REQUIRE(rows.size() == 4);
  CHECK(rows[1][1] == "DominationFailed");
  CHECK(rows[2][1] == "ok");
  CHECK(rows[3][1] == "ok");
}

TEST_CASE("self-similar artifacts flag the blow-up set") {
  const auto out = scratch("selfsim");
  REQUIRE(run_quiet(Experiment::Selfsim, Config::parse("[selfsim]\nsamples = 200\n"), out) == 0);
  const auto rows = parse_csv(slurp(out / "selfsim_profile.csv"));
  REQUIRE(rows.size() > 1);
  CHECK(rows[0] == std::vector<std::string>{"x_N", "t", "u_or_flag", "u_or_flag_is_inf", "T_inf_of_xN"});
  int blown = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const bool flagged = rows[i][3] == "1";
    CHECK(flagged == (rows[i][2] == "inf"));
    blown += flagged;
  }
  CHECK(blown > 0);
  CHECK(std::stod(summary_value(out / "selfsim.csv", "interior_residual")) <= 1e-8);
  CHECK(std::stod(summary_value(out / "selfsim.csv", "T_inf_at_1")) == doctest::Approx(1.0 + std::sqrt(2.0)));
}

TEST_CASE("control-ode and elliptic experiments write their artifacts") {
  const auto out = scratch("control");
  REQUIRE(run_quiet(Experiment::ControlOde, Config::parse("[control]\nhorizon = 4\n"), out) == 0);
  CHECK(std::abs(std::stod(summary_value(out / "control-ode.csv", "T_est")) - 1.0) <= 1e-6);
  CHECK(std::stoll(summary_value(out / "control-ode.csv", "periods")) == 2);
  const auto rows = parse_csv(slurp(out / "control_ode_trajectory.csv"));
  CHECK(rows[0] == std::vector<std::string>{"t", "u", "u_is_inf", "segment_tag", "is_singular_endpoint"});

  REQUIRE(run_quiet(Experiment::Elliptic, Config::parse("[elliptic]\nbeta = 5\n"), out) == 0);
  const auto profile = parse_csv(slurp(out / "elliptic_profile.csv"));
  CHECK(profile[0].front() == "r");
  CHECK(std::stod(profile.back()[1]) == doctest::Approx(5.0));
}
