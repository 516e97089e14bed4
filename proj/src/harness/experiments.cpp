#include "blowup/harness/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "blowup/dynamic_boundary.hpp"
#include "blowup/errors.hpp"
#include "blowup/harness/acceptance.hpp"
#include "blowup/neutral_control.hpp"
#include "blowup/radial_elliptic.hpp"
#include "blowup/scalar_blowup.hpp"
#include "blowup/selfsimilar.hpp"

namespace blowup::harness {

namespace {

constexpr std::pair<Experiment, std::string_view> kNames[] = {
    {Experiment::Ode, "ode"},         {Experiment::ControlOde, "control-ode"}, {Experiment::Elliptic, "elliptic"},
    {Experiment::Large, "large"},     {Experiment::Dynbc, "dynbc"},            {Experiment::ControlPde, "control-pde"},
    {Experiment::Selfsim, "selfsim"}, {Experiment::Check, "check"},            {Experiment::Sweep, "sweep"},
};

const std::string kAxesTable = "sweep.axes";

Config build_defaults() {
  Config c;
  c.set("forcing.kind", std::string("power"));
  c.set("forcing.p", 2.0);
  c.set("forcing.lambda", 1.0);
  c.set("forcing.shift", 0.0);
  c.set("absorption.kind", std::string("power"));
  c.set("absorption.m", 3.0);
  c.set("initial.u0", 1.0);
  c.set("geometry.R", 1.0);
  c.set("geometry.N", 3.0);
  c.set("control.eps", 0.125);
  c.set("control.eps_fraction", 0.1);
  c.set("control.amplitude", 1.0);
  c.set("control.gamma", 0.2);
  c.set("control.q", 2.0);
  c.set("control.knee", 0.0);
  c.set("control.horizon", 0.0);
  c.set("control.horizon_factor", 3.0);
  c.set("control.uncontrolled_tail", false);
  c.set("neutral.base_intervals", 200.0);
  c.set("neutral.refinement_ratio", 0.8);
  c.set("neutral.min_gap", 1e-8);
  c.set("neutral.tolerance", 1e-8);
  c.set("neutral.max_iterations", 200.0);
  c.set("numerics.cap", 0.0);
  c.set("numerics.rel_tol", 0.0);
  c.set("numerics.abs_tol", 0.0);
  c.set("numerics.horizon", 0.0);
  c.set("grid.h_bdry", 0.0);
  c.set("grid.h_int", 0.0);
  c.set("grid.growth", 0.0);
  c.set("elliptic.beta", 10.0);
  c.set("elliptic.tolerance", 1e-10);
  c.set("elliptic.max_iterations", 200.0);
  c.set("large.first_distance", 0.1);
  c.set("large.tolerance", 1e-6);
  c.set("evolution.force", false);
  c.set("evolution.certify", true);
  c.set("evolution.nus", std::vector<double>{1.1, 1.5, 2.0});
  c.set("selfsim.m", 3.0);
  c.set("selfsim.N", 3.0);
  c.set("selfsim.samples", 1000.0);
  c.set("selfsim.mu", 2.0);
  c.set("selfsim.extent", 4.0);
  c.set("selfsim.t_max", 4.0);
  c.set("run.seed", 20260401.0);
  c.set("sweep.experiment", std::string("dynbc"));
  return c;
}

const std::vector<std::string> kIntegerKeys = {"geometry.N",       "neutral.base_intervals",   "neutral.max_iterations",
                                               "elliptic.max_iterations", "selfsim.N", "selfsim.samples",
                                               "run.seed"};

double or_default(double configured, double fallback) { return configured > 0.0 ? configured : fallback; }

ForcingLaw forcing_from(const Config& c) {
  const auto& kind = c.text("forcing.kind");
  if (kind == "exp") return ForcingLaw::exponential(c.number("forcing.lambda"));
  return ForcingLaw::power(c.number("forcing.p"), c.number("forcing.lambda"), c.number("forcing.shift"));
}

AbsorptionLaw absorption_from(const Config& c) {
  const auto& kind = c.text("absorption.kind");
  if (kind == "exp") return AbsorptionLaw::exponential();
  if (kind == "sexp2s") return AbsorptionLaw::s_exp_2s();
  if (kind == "zero") return AbsorptionLaw::zero();
  return AbsorptionLaw::power(c.number("absorption.m"));
}

GridOptions grid_from(const Config& c, double default_growth) {
  GridOptions grid;
  grid.h_bdry = c.number("grid.h_bdry");
  grid.h_int = c.number("grid.h_int");
  grid.growth = or_default(c.number("grid.growth"), default_growth);
  return grid;
}

DirichletOptions dirichlet_from(const Config& c) {
  DirichletOptions options;
  options.residual_tolerance = c.number("elliptic.tolerance");
  options.max_iterations = c.integer("elliptic.max_iterations");
  return options;
}

NeutralOptions neutral_from(const Config& c) {
  NeutralOptions options;
  options.base_intervals = c.integer("neutral.base_intervals");
  options.refinement_ratio = c.number("neutral.refinement_ratio");
  options.min_gap = c.number("neutral.min_gap");
  options.tolerance = c.number("neutral.tolerance");
  options.max_iterations = c.integer("neutral.max_iterations");
  return options;
}

EvolutionOptions evolution_from(const Config& c) {
  EvolutionOptions options;
  options.cap = or_default(c.number("numerics.cap"), options.cap);
  options.horizon = c.number("numerics.horizon");
  options.ode.rel_tol = or_default(c.number("numerics.rel_tol"), options.ode.rel_tol);
  options.ode.abs_tol = or_default(c.number("numerics.abs_tol"), options.ode.abs_tol);
  options.grid = grid_from(c, options.grid.growth);
  options.dirichlet = dirichlet_from(c);
  options.nus = c.numbers("evolution.nus");
  options.force = c.flag("evolution.force");
  options.certify = c.flag("evolution.certify");
  return options;
}

std::ofstream open_artifact(const std::filesystem::path& dir, const std::string& name) {
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  return out;
}

void write_trajectory(const std::filesystem::path& dir, const std::string& name, const PiecewiseTrajectory& path) {
  auto out = open_artifact(dir, name);
  CsvWriter csv(out, {{"t"}, {"u", true}, {"segment_tag"}, {"is_singular_endpoint"}});
  for (const auto& seg : path.segments()) {
    for (std::size_t i = 0; i < seg.t.size(); ++i) {
      const bool singular = (i == 0 && seg.singular_begin) || (i + 1 == seg.t.size() && seg.singular_end);
      csv.row({seg.t[i], seg.u[i], std::string(to_string(seg.tag)), singular});
    }
  }
}

void write_profile(const std::filesystem::path& dir, const std::string& name, const AbsorptionLaw& g,
                   const RadialProfile& profile) {
  auto out = open_artifact(dir, name);
  CsvWriter csv(out, {{"r"}, {"u", true}, {"u_prime", true}, {"psi_inv_of_dist", true}, {"ratio"}});
  const auto& r = profile.grid.nodes;
  const double R = profile.grid.R;
  const bool keller_osserman = !g.is_zero();
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double d = R - r[i];
    double reference = std::nan("");
    if (keller_osserman) reference = d > 0.0 ? psi_inv(g, d) : std::numeric_limits<double>::infinity();
    const double ratio = std::isfinite(reference) && std::isfinite(profile.u[i]) ? profile.u[i] / reference : std::nan("");
    csv.row({r[i], profile.u[i], profile.u_prime[i], reference, ratio});
  }
}

Record ode_cell(const Config& c, const std::filesystem::path* dir) {
  const auto f = forcing_from(c);
  const double u0 = c.number("initial.u0");
  BlowupOptions options;
  options.cap = or_default(c.number("numerics.cap"), options.cap);
  options.horizon = c.number("numerics.horizon");
  options.ode.rel_tol = or_default(c.number("numerics.rel_tol"), options.ode.rel_tol);
  options.ode.abs_tol = or_default(c.number("numerics.abs_tol"), options.ode.abs_tol);
  const auto run = integrate_until_blowup(f, u0, options);
  const double closed = blowup_time(f, u0);
  if (dir) write_trajectory(*dir, "ode_trajectory.csv", run.samples);
  return {{"T_est", run.T_est},
          {"T_closed_form", closed, true},
          {"relative_error", std::abs(run.T_est - closed) / closed},
          {"fitted_rate", run.fitted_rate},
          {"fit_samples", static_cast<long long>(run.fit_samples)}};
}

Record control_ode_cell(const Config& c, const std::filesystem::path* dir) {
  const auto f = forcing_from(c);
  const double u0 = c.number("initial.u0");
  ControlConfig config;
  config.eps = c.number("control.eps");
  config.amplitude = c.number("control.amplitude");
  config.gamma = c.number("control.gamma");
  config.q = c.number("control.q");
  if (c.number("control.knee") > 0.0) config.knee = c.number("control.knee");
  config.neutral = neutral_from(c);
  config.original_intervals = config.neutral.base_intervals;
  config.horizon = c.number("control.horizon");
  config.uncontrolled_tail = c.flag("control.uncontrolled_tail");
  const auto run = controlled_explosion(f, u0, config);
  if (dir) write_trajectory(*dir, "control_ode_trajectory.csv", run.trajectory);
  const auto per_period = run.trajectory.l1_norm_per_period();
  const double spread = per_period.empty() ? 0.0
                                           : (*std::max_element(per_period.begin(), per_period.end()) -
                                              *std::min_element(per_period.begin(), per_period.end())) /
                                                 per_period.front();
  return {{"T_est", run.T_est},
          {"T_inf", run.uncontrolled.T_inf},
          {"gamma_fit", run.fit.gamma},
          {"prefactor", run.fit.prefactor},
          {"knee", run.knee},
          {"regular_bound", run.regular_bound},
          {"horizon", run.trajectory.end()},
          {"periods", static_cast<long long>(per_period.size())},
          {"l1_per_period", per_period.empty() ? 0.0 : per_period.front(), true},
          {"l1_period_spread", spread},
          {"min_value", run.trajectory.min_value()},
          {"coincidence", coincidence_check(run.trajectory, run.uncontrolled, config.eps)},
          {"neutral_iterations", static_cast<long long>(run.neutral.iterations)}};
}

Record elliptic_cell(const Config& c, const std::filesystem::path* dir) {
  const auto g = absorption_from(c);
  const auto grid = RadialGrid::refined(c.number("geometry.R"), c.integer("geometry.N"), grid_from(c, 1.05));
  const auto profile = solve_dirichlet(g, grid, c.number("elliptic.beta"), dirichlet_from(c));
  if (dir) write_profile(*dir, "elliptic_profile.csv", g, profile);
  return {{"u_center", profile.u[0]},
          {"boundary_flux", profile.boundary_flux},
          {"gradient_ratio", profile.gradient_ratio},
          {"gradient_bound_ok", profile.gradient_bound_ok},
          {"monotone", profile.monotone},
          {"residual", profile.residual},
          {"newton_iterations", static_cast<long long>(profile.newton_iterations)},
          {"nodes", static_cast<long long>(grid.size())}};
}

Record large_cell(const Config& c, const std::filesystem::path* dir) {
  const auto g = absorption_from(c);
  const double R = c.number("geometry.R");
  const auto grid = RadialGrid::refined(R, c.integer("geometry.N"), grid_from(c, 1.05));
  LargeSolutionOptions options;
  options.first_distance = c.number("large.first_distance");
  options.tolerance = c.number("large.tolerance");
  options.dirichlet = dirichlet_from(c);
  const auto large = large_solution(g, grid, options);
  if (dir) write_profile(*dir, "large_profile.csv", g, large.profile);
  double low = std::numeric_limits<double>::infinity();
  double high = 0.0;
  for (Eigen::Index i = 0; i + 1 < grid.size(); ++i) {
    const double d = R - grid.nodes[i];
    if (d > 1e-2 * R) continue;
    const double ratio = large.profile.u[i] / psi_inv(g, d);
    low = std::min(low, ratio);
    high = std::max(high, ratio);
  }
  return {{"u_center", large.profile.u[0]},
          {"stages", static_cast<long long>(large.stages.size())},
          {"last_change", large.last_change},
          {"monotone_in_stage", large.monotone_in_stage},
          {"boundary_ratio_min", low, true},
          {"boundary_ratio_max", high},
          {"nodes", static_cast<long long>(grid.size())}};
}

Record dynbc_cell(const Config& c, const std::filesystem::path* dir, std::ostream& log) {
  const auto f = forcing_from(c);
  const auto g = absorption_from(c);
  const auto options = evolution_from(c);
  if (options.force) log << "warning: domination gate overridden (--force)\n";
  const auto run = evolve_uncontrolled(f, g, c.number("geometry.R"), c.integer("geometry.N"),
                                       c.number("initial.u0"), options);
  const auto rates = rate_diagnostics(run, domination_report(f, g));
  if (dir) {
    auto out = open_artifact(*dir, "dynbc.csv");
    CsvWriter csv(out, {{"t"}, {"b"}, {"c"}, {"T_inf_est"}, {"ratio_phi"}, {"ratio_psi"}, {"ratio_two_sided"}});
    std::size_t next = 0;
    for (std::size_t k = 0; k < run.times.size(); ++k) {
      double phi_ratio = std::nan(""), psi_ratio = std::nan(""), two_sided = std::nan("");
      if (next < rates.series.t.size() && rates.series.t[next] == run.times[k]) {
        phi_ratio = rates.series.phi_ratio[next];
        psi_ratio = rates.series.psi_ratio[next];
        two_sided = rates.series.two_sided_ratio[next];
        ++next;
      }
      csv.row({run.times[k], run.boundary_values[k], run.fluxes[k], run.T_inf_est, phi_ratio, psi_ratio, two_sided});
    }
  }
  const auto& cert = run.certificates;
  return {{"T_inf_est", run.T_inf_est},
          {"psi_bound", run.psi_bound, true},
          {"gate_threshold", run.gate_threshold, true},
          {"gate_passed", run.gate_passed},
          {"regime", std::string(to_string(rates.regime))},
          {"terminal_phi_ratio", rates.terminal_phi},
          {"terminal_upper_ratio", rates.terminal_upper},
          {"terminal_psi_ratio", rates.terminal_psi},
          {"terminal_two_sided_ratio", rates.terminal_two_sided},
          {"terminal_power_scaled", rates.terminal_power_scaled},
          {"power_bound", rates.power_bound},
          {"flux_violations", static_cast<long long>(cert.flux_violations)},
          {"worst_flux_ratio", cert.worst_flux_ratio},
          {"interior_violations", static_cast<long long>(cert.interior_violations)},
          {"subsolution_violations", static_cast<long long>(cert.subsolution_violations)},
          {"confined", cert.confined},
          {"steps", static_cast<long long>(run.times.size())}};
}

Record control_pde_cell(const Config& c, const std::filesystem::path* dir, std::ostream& log) {
  const auto f = forcing_from(c);
  const auto g = absorption_from(c);
  ControlledBoundaryConfig config;
  config.eps_fraction = c.number("control.eps_fraction");
  config.amplitude = c.number("control.amplitude");
  config.gamma = c.number("control.gamma");
  config.q = c.number("control.q");
  config.neutral = neutral_from(c);
  config.horizon_factor = c.number("control.horizon_factor");
  config.evolution = evolution_from(c);
  if (config.evolution.force) log << "warning: domination gate overridden (--force)\n";
  const auto run = evolve_controlled(f, g, c.number("geometry.R"), c.integer("geometry.N"), c.number("initial.u0"),
                                     config);
  if (dir) {
    write_trajectory(*dir, "control_pde_trajectory.csv", run.trajectory);
    write_trajectory(*dir, "control_pde_comparison.csv", run.upper);
  }
  return {{"T_inf_est", run.uncontrolled.T_inf_est},
          {"T_est", run.T_est},
          {"gamma_fit", run.fit.gamma},
          {"eps", run.eps},
          {"knee", run.knee},
          {"K_R", run.K_R},
          {"comparison_samples", static_cast<long long>(run.comparison_samples)},
          {"comparison_violations", static_cast<long long>(run.comparison_violations)},
          {"flux_violations",
           static_cast<long long>(run.flux_violations + run.uncontrolled.certificates.flux_violations)},
          {"interior_finite", run.interior_finite},
          {"min_value", run.trajectory.min_value()},
          {"horizon", run.trajectory.end()}};
}

Record selfsim_cell(const Config& c, const std::filesystem::path* dir) {
  const SelfSimilarSolution sol(c.number("selfsim.m"));
  const auto samples = random_samples(sol, c.integer("selfsim.N"), c.integer("selfsim.samples"),
                                      static_cast<unsigned>(c.integer("run.seed")), c.number("selfsim.extent"),
                                      c.number("selfsim.t_max"));
  const auto report = residual_check(sol, samples);
  if (dir) {
    auto out = open_artifact(*dir, "selfsim_profile.csv");
    CsvWriter csv(out, {{"x_N"}, {"t"}, {"u_or_flag", true}, {"T_inf_of_xN"}});
    for (int i = 0; i <= 20; ++i) {
      for (int j = 1; j <= 8; ++j) {
        const double x_N = 0.1 * i;
        const double t = 0.5 * j;
        const auto u = sol.solution(x_N, t);
        csv.row({x_N, t, u.value_or(std::numeric_limits<double>::infinity()), sol.blowup_time(x_N)});
      }
    }
  }
  return {{"k_m", sol.k()},
          {"C", sol.C()},
          {"T_inf_at_1", sol.blowup_time(1.0)},
          {"samples", static_cast<long long>(report.samples)},
          {"interior_residual", report.interior},
          {"profile_boundary_residual", report.profile_boundary},
          {"shifted_defect", report.shifted_defect},
          {"gamma_mismatch", report.gamma_mismatch},
          {"scaling_deviation", scaling_invariance(sol, c.number("selfsim.mu"), samples)},
          {"form_agreement", form_agreement(sol, samples)}};
}

void write_record(std::ostream& out, const Record& record) {
  std::vector<CsvColumn> columns;
  std::vector<CsvCell> cells;
  for (const auto& field : record) {
    columns.push_back({field.name, field.singular});
    cells.push_back(field.value);
  }
  CsvWriter csv(out, std::move(columns));
  csv.row(cells);
}

struct CellOutcome {
  std::string status = "ok";
  std::string parameter;
  std::string message;
  Record summary;
  std::string log;
};

}  // namespace

std::optional<Experiment> parse_experiment(std::string_view name) noexcept {
  for (const auto& [experiment, text] : kNames)
    if (text == name) return experiment;
  return std::nullopt;
}

std::string_view to_string(Experiment experiment) noexcept {
  for (const auto& [value, text] : kNames)
    if (value == experiment) return text;
  return "unknown";
}

const std::vector<Experiment>& all_experiments() {
  static const std::vector<Experiment> list = [] {
    std::vector<Experiment> out;
    for (const auto& entry : kNames) out.push_back(entry.first);
    return out;
  }();
  return list;
}

const Config& default_config() {
  static const Config defaults = build_defaults();
  return defaults;
}

Config resolve(const Config& user) {
  Config resolved = default_config();
  const auto& known = default_config().entries();
  for (const auto& [key, value] : user.entries()) {
    if (key.starts_with("meta.")) continue;
    if (key.starts_with(kAxesTable + ".")) {
      const std::string axis = key.substr(kAxesTable.size() + 1);
      const auto target = known.find(axis);
      if (target == known.end() || target->second.index() != ConfigValue(0.0).index())
        throw UsageError("sweep axis '" + axis + "' is not a numeric config key");
      const auto* values = std::get_if<std::vector<double>>(&value);
      if (!values || values->empty()) throw UsageError("sweep axis '" + axis + "' needs a non-empty number array");
      for (double x : *values)
        if (!std::isfinite(x)) throw UsageError("sweep axis '" + axis + "' has a non-finite value");
      resolved.set(key, value);
      continue;
    }
    const auto it = known.find(key);
    if (it == known.end()) throw UsageError("unknown config key '" + key + "'");
    if (it->second.index() != value.index())
      throw UsageError("config key '" + key + "' must be a " + std::string(type_name(it->second)) + ", got a " +
                       std::string(type_name(value)));
    resolved.set(key, value);
  }
  for (const auto& key : kIntegerKeys) (void)resolved.integer(key);
  const auto& forcing = resolved.text("forcing.kind");
  if (forcing != "power" && forcing != "exp") throw UsageError("forcing.kind must be \"power\" or \"exp\"");
  const auto& absorption = resolved.text("absorption.kind");
  if (absorption != "power" && absorption != "exp" && absorption != "sexp2s" && absorption != "zero")
    throw UsageError("absorption.kind must be one of \"power\", \"exp\", \"sexp2s\", \"zero\"");
  const auto nested = parse_experiment(resolved.text("sweep.experiment"));
  if (!nested || *nested == Experiment::Check || *nested == Experiment::Sweep)
    throw UsageError("sweep.experiment must name a single-run experiment");
  return resolved;
}

void validate(const Config& c) {
  (void)forcing_from(c);
  (void)absorption_from(c);
  require(c.number("geometry.R") > 0.0 && std::isfinite(c.number("geometry.R")), ErrorCode::OutOfRange,
          "geometry.R", "radius must be positive");
  require(c.integer("geometry.N") >= 1, ErrorCode::OutOfRange, "geometry.N", "dimension must be positive");
  require(c.number("initial.u0") >= 0.0 && std::isfinite(c.number("initial.u0")), ErrorCode::OutOfRange,
          "initial.u0", "initial value must be finite and nonnegative");
  require(c.integer("selfsim.samples") >= 0, ErrorCode::OutOfRange, "selfsim.samples", "count must be nonnegative");
  for (double nu : c.numbers("evolution.nus"))
    require(nu > 1.0, ErrorCode::OutOfRange, "evolution.nus", "subsolution speeds must exceed 1");
}

Record run_cell(Experiment experiment, const Config& c, const std::filesystem::path* dir, std::ostream& log) {
  switch (experiment) {
    case Experiment::Ode: return ode_cell(c, dir);
    case Experiment::ControlOde: return control_ode_cell(c, dir);
    case Experiment::Elliptic: return elliptic_cell(c, dir);
    case Experiment::Large: return large_cell(c, dir);
    case Experiment::Dynbc: return dynbc_cell(c, dir, log);
    case Experiment::ControlPde: return control_pde_cell(c, dir, log);
    case Experiment::Selfsim: return selfsim_cell(c, dir);
    case Experiment::Check:
    case Experiment::Sweep: break;
  }
  throw UsageError("experiment '" + std::string(to_string(experiment)) + "' has no single-cell form");
}

std::vector<SweepCell> sweep_cells(const Config& resolved) {
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  for (const auto& [key, value] : resolved.entries())
    if (key.starts_with(kAxesTable + ".")) axes.emplace_back(key.substr(kAxesTable.size() + 1), std::get<std::vector<double>>(value));

  std::vector<SweepCell> cells;
  std::vector<std::size_t> index(axes.size(), 0);
  while (true) {
    SweepCell cell{{}, resolved};
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double x = axes[a].second[index[a]];
      cell.axis_values.push_back(x);
      cell.config.set(axes[a].first, x);
    }
    cells.push_back(std::move(cell));
    // Odometer with the last axis fastest.
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++index[a] < axes[a].second.size()) break;
      index[a] = 0;
      if (a == 0) return cells;
    }
    if (axes.empty()) return cells;
  }
}

int run_sweep(const Config& resolved, int workers, std::ostream& csv_out, std::ostream& log) {
  const auto experiment = *parse_experiment(resolved.text("sweep.experiment"));
  const auto cells = sweep_cells(resolved);
  std::vector<CellOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      auto& outcome = outcomes[i];
      std::ostringstream cell_log;
      try {
        validate(cells[i].config);
        outcome.summary = run_cell(experiment, cells[i].config, nullptr, cell_log);
      } catch (const ContractError& error) {
        outcome.status = std::string(to_string(error.code()));
        outcome.parameter = error.parameter();
        outcome.message = error.what();
      } catch (const std::exception& error) {
        outcome.status = "Error";
        outcome.message = error.what();
      }
      outcome.log = cell_log.str();
    }
  };
  const int threads = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  std::vector<std::string> axis_names;
  for (const auto& [key, value] : resolved.entries())
    if (key.starts_with(kAxesTable + ".")) axis_names.push_back(key.substr(kAxesTable.size() + 1));
  // Union of summary columns in order of first appearance, so the header does not depend on timing.
  std::vector<std::pair<std::string, bool>> fields;
  for (const auto& outcome : outcomes)
    for (const auto& field : outcome.summary)
      if (std::none_of(fields.begin(), fields.end(), [&](const auto& f) { return f.first == field.name; }))
        fields.emplace_back(field.name, field.singular);

  std::vector<CsvColumn> columns;
  for (const auto& name : axis_names) columns.push_back({name});
  columns.push_back({"status"});
  columns.push_back({"error_parameter"});
  for (const auto& [name, singular] : fields) columns.push_back({name, singular});
  CsvWriter csv(csv_out, std::move(columns));

  int failures = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& outcome = outcomes[i];
    std::vector<CsvCell> row(cells[i].axis_values.begin(), cells[i].axis_values.end());
    row.emplace_back(outcome.status);
    row.emplace_back(outcome.parameter);
    for (const auto& [name, singular] : fields) {
      const auto it = std::find_if(outcome.summary.begin(), outcome.summary.end(),
                                   [&](const Field& f) { return f.name == name; });
      row.push_back(it == outcome.summary.end() ? CsvCell(std::string()) : it->value);
    }
    csv.row(row);
    log << outcome.log;
    if (outcome.status != "ok") {
      ++failures;
      log << "cell " << i << ": " << outcome.message << '\n';
    }
  }
  return failures;
}

std::filesystem::path output_directory(const RunOptions& options) {
  if (!options.out_dir.empty()) return options.out_dir;
  if (const char* env = std::getenv(std::string(kOutputEnv).c_str()); env && *env) return env;
  return "blowup_out";
}

int run(Experiment experiment, const Config& user, const RunOptions& options) {
  std::ostringstream discard;
  std::ostream& log = options.log ? *options.log : discard;
  Config resolved = resolve(user);
  if (options.force) {
    resolved.set("evolution.force", true);
    log << "warning: --force set; runs below the domination gate are not refused\n";
  }
  const auto dir = output_directory(options);
  std::filesystem::create_directories(dir);

  const auto start = std::chrono::steady_clock::now();
  int code = 0;
  std::string status = "ok";
  std::string parameter;
  try {
    validate(resolved);
    const std::string name(to_string(experiment));
    if (experiment == Experiment::Check) {
      const auto results = run_acceptance(&log);
      auto out = open_artifact(dir, "check.csv");
      write_acceptance_csv(out, results);
      if (!all_passed(results)) {
        code = 2;
        status = "CriterionFailed";
      }
    } else if (experiment == Experiment::Sweep) {
      auto out = open_artifact(dir, "sweep.csv");
      const int failures = run_sweep(resolved, options.workers, out, log);
      log << "sweep: " << sweep_cells(resolved).size() << " cells, " << failures << " failed\n";
    } else {
      const auto record = run_cell(experiment, resolved, &dir, log);
      auto out = open_artifact(dir, name + ".csv");
      write_record(out, record);
    }
  } catch (const ContractError& error) {
    log << "error: " << error.what() << '\n';
    code = 2;
    status = std::string(to_string(error.code()));
    parameter = error.parameter();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Config sidecar = resolved;
  sidecar.set("meta.tool", std::string(kToolName));
  sidecar.set("meta.version", std::string(kToolVersion));
  sidecar.set("meta.experiment", std::string(to_string(experiment)));
  sidecar.set("meta.status", status);
  sidecar.set("meta.error_parameter", parameter);
  sidecar.set("meta.workers", static_cast<double>(options.workers));
  sidecar.set("meta.wall_time_seconds", seconds);
  auto meta = open_artifact(dir, std::string(kSidecarName));
  meta << sidecar.dump({kAxesTable});
  return code;
}

}  // namespace blowup::harness
