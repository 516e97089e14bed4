#include "blowup/radial_elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "blowup/errors.hpp"

namespace blowup {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Geometry of the vertex-centred control volumes.
struct Cells {
  Eigen::VectorXd face;         ///< face[i] = midpoint between r_i and r_{i+1}
  Eigen::VectorXd conductance;  ///< face^{N-1} / (r_{i+1} - r_i)
  Eigen::VectorXd volume;       ///< (face_i^N - face_{i-1}^N) / N, with face_{-1} = 0

  explicit Cells(const RadialGrid& grid) {
    const auto& r = grid.nodes;
    const Eigen::Index K = r.size() - 1;
    face = 0.5 * (r.head(K) + r.tail(K));
    conductance.resize(K);
    for (Eigen::Index i = 0; i < K; ++i) conductance[i] = std::pow(face[i], grid.N - 1) / (r[i + 1] - r[i]);
    volume.resize(K + 1);
    double inner = 0.0;
    for (Eigen::Index i = 0; i <= K; ++i) {
      const double outer = i < K ? std::pow(face[i], grid.N) / grid.N : std::pow(r[K], grid.N) / grid.N;
      volume[i] = outer - inner;
      inner = outer;
    }
  }
};

/// Thomas algorithm; the Newton matrix is an M-matrix for nondecreasing g, so no pivoting.
Eigen::VectorXd solve_tridiagonal(Eigen::VectorXd lower, Eigen::VectorXd diag, Eigen::VectorXd upper,
                                  Eigen::VectorXd rhs) {
  const Eigen::Index n = diag.size();
  for (Eigen::Index i = 1; i < n; ++i) {
    const double factor = lower[i] / diag[i - 1];
    diag[i] -= factor * upper[i - 1];
    rhs[i] -= factor * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
  return rhs;
}

struct PrefixProblem {
  const AbsorptionLaw& g;
  const Cells& cells;
  Eigen::VectorXd source;  ///< per node
  Eigen::Index boundary;   ///< Dirichlet node; unknowns are 0 .. boundary - 1

  /// Residual of the balance equations; `scale` receives the operand size of every equation and the
  /// return value is the largest scaled entry.
  double residual(const Eigen::VectorXd& u, Eigen::VectorXd& out, Eigen::VectorXd& scale) const {
    out.resize(boundary);
    scale.resize(boundary);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < boundary; ++i) {
      const double outward = cells.conductance[i] * (u[i + 1] - u[i]);
      const double inward = i > 0 ? cells.conductance[i - 1] * (u[i] - u[i - 1]) : 0.0;
      const double gi = g.value(u[i]);
      out[i] = -(outward - inward) + cells.volume[i] * (gi - source[i]);
      // Scale by the operands, not their differences, so the round-off floor stays near eps on fine grids.
      scale[i] = cells.volume[i] * (1.0 + std::abs(gi) + std::abs(source[i])) +
                 cells.conductance[i] * (std::abs(u[i + 1]) + std::abs(u[i]));
      if (i > 0) scale[i] += cells.conductance[i - 1] * (std::abs(u[i]) + std::abs(u[i - 1]));
      worst = std::max(worst, std::abs(out[i]) / scale[i]);
    }
    return std::isfinite(worst) ? worst : kInf;
  }

  Eigen::VectorXd newton_step(const Eigen::VectorXd& u, const Eigen::VectorXd& res) const {
    Eigen::VectorXd lower = Eigen::VectorXd::Zero(boundary);
    Eigen::VectorXd diag(boundary);
    Eigen::VectorXd upper = Eigen::VectorXd::Zero(boundary);
    for (Eigen::Index i = 0; i < boundary; ++i) {
      diag[i] = cells.conductance[i] + cells.volume[i] * g.derivative(u[i]);
      if (i + 1 < boundary) upper[i] = -cells.conductance[i];
      if (i > 0) {
        diag[i] += cells.conductance[i - 1];
        lower[i] = -cells.conductance[i - 1];
      }
    }
    return solve_tridiagonal(lower, diag, upper, -res);
  }
};

struct NewtonOutcome {
  double residual = 0.0;
  int iterations = 0;
};

/// Damped Newton on nodes 0 .. boundary - 1 of u; u[boundary] holds the Dirichlet value.
NewtonOutcome newton_solve(const PrefixProblem& problem, Eigen::VectorXd& u, const DirichletOptions& options) {
  const Eigen::Index n = problem.boundary;
  Eigen::VectorXd res;
  Eigen::VectorXd scale;
  double current = problem.residual(u, res, scale);
  std::vector<double> damping;
  Eigen::VectorXd trial = u;
  Eigen::VectorXd trial_res;
  Eigen::VectorXd trial_scale;
  // The scaled residual hides an O(1/h^2) amplification, so also wait for a negligible Newton step.
  double last_step = kInf;
  auto settled = [&] {
    return current <= options.residual_tolerance && last_step <= 1e-9 * (1.0 + u.head(n).cwiseAbs().maxCoeff());
  };
  for (int iteration = 0; iteration < options.max_iterations; ++iteration) {
    if (current == 0.0 || settled()) return {current, iteration};
    const Eigen::VectorXd step = problem.newton_step(u, res);
    // Line search on the L2 merit with the scales frozen at the current iterate: the Newton
    // direction is a descent direction for it even where g has a kink (truncated laws).
    const double merit = res.cwiseQuotient(scale).norm();
    double lambda = 1.0;
    for (;;) {
      trial.head(n) = u.head(n) + lambda * step;
      const double next = problem.residual(trial, trial_res, trial_scale);
      const double trial_merit = trial_res.cwiseQuotient(scale).norm();
      if (std::isfinite(next) && trial_merit < (1.0 - 1e-4 * lambda) * merit) {
        u.head(n) = trial.head(n);
        res = trial_res;
        scale = trial_scale;
        current = next;
        damping.push_back(lambda);
        last_step = lambda * step.cwiseAbs().maxCoeff();
        break;
      }
      lambda *= 0.5;
      if (lambda < options.damping_floor) {
        // Round-off floor: a step that cannot improve an already tiny residual is not a stall.
        if (current <= 1e3 * options.residual_tolerance) return {current, iteration};
        std::string trace;
        for (std::size_t k = damping.size() > 8 ? damping.size() - 8 : 0; k < damping.size(); ++k)
          trace += (trace.empty() ? "" : ",") + std::to_string(damping[k]);
        throw ContractError(ErrorCode::NewtonStalled, "elliptic.max_iterations",
                            "no decrease below damping floor at residual " + std::to_string(current) +
                                "; recent damping [" + trace + "]");
      }
    }
  }
  if (current <= options.residual_tolerance) return {current, options.max_iterations};
  throw ContractError(ErrorCode::NewtonStalled, "elliptic.max_iterations",
                      "iteration budget exhausted at residual " + std::to_string(current));
}

/// u' at nodes 0 .. last from the discrete flux balance, finishing each node with a half-cell trapezoid.
Eigen::VectorXd conservative_gradient(const AbsorptionLaw& g, const RadialGrid& grid, const Cells& cells,
                                      const Eigen::VectorXd& u, const Eigen::VectorXd& source, Eigen::Index last) {
  const auto& r = grid.nodes;
  Eigen::VectorXd slope = Eigen::VectorXd::Zero(r.size());
  double face_flux = 0.0;  // r^{N-1} u' at the face below node i
  for (Eigen::Index i = 1; i <= last; ++i) {
    face_flux = cells.conductance[i - 1] * (u[i] - u[i - 1]);
    const double face = cells.face[i - 1];
    const double half_volume = (std::pow(r[i], grid.N) - std::pow(face, grid.N)) / grid.N;
    const double at_face = 0.5 * (g.value(u[i - 1]) + g.value(u[i])) - 0.5 * (source[i - 1] + source[i]);
    const double at_node = g.value(u[i]) - source[i];
    slope[i] = (face_flux + half_volume * 0.5 * (at_face + at_node)) / std::pow(r[i], grid.N - 1);
  }
  return slope;
}

void finish_profile(RadialProfile& profile, const AbsorptionLaw& g, const DirichletOptions& options,
                    Eigen::Index last) {
  profile.monotone = true;
  profile.gradient_bound_ok = true;
  profile.gradient_ratio = 0.0;
  for (Eigen::Index i = 1; i <= last; ++i) {
    if (profile.u[i] < profile.u[i - 1] - 1e-12 * std::max(1.0, std::abs(profile.u[i]))) profile.monotone = false;
    const double energy = 2.0 * g.primitive(profile.u[i]);
    const double slope = profile.u_prime[i];
    if (energy > 0.0) {
      const double ratio = slope / std::sqrt(energy);
      profile.gradient_ratio = std::max(profile.gradient_ratio, ratio);
      if (ratio > 1.0 + options.gradient_tolerance) profile.gradient_bound_ok = false;
    } else if (std::abs(slope) > options.gradient_tolerance * std::max(1.0, std::abs(profile.u[i]))) {
      profile.gradient_bound_ok = false;
    }
    if (slope < -options.gradient_tolerance * std::max(1.0, std::abs(profile.u[i]))) profile.gradient_bound_ok = false;
  }
}

Eigen::VectorXd sample_source(const RadialGrid& grid, const std::function<double(double)>& source) {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(grid.size());
  if (source)
    for (Eigen::Index i = 0; i < grid.size(); ++i) values[i] = source(grid.nodes[i]);
  return values;
}

}  // namespace

// -------------------------------------------------------------------- grid

RadialGrid RadialGrid::refined(double R, int N, const GridOptions& options) {
  require(R > 0.0 && std::isfinite(R), ErrorCode::OutOfRange, "geometry.R", "radius must be positive");
  require(N >= 2, ErrorCode::OutOfRange, "geometry.N", "dimension must be at least 2");
  const double h_bdry = options.h_bdry > 0.0 ? options.h_bdry : 1e-4 * R;
  const double h_int = options.h_int > 0.0 ? options.h_int : 1e-2 * R;
  require(h_bdry <= h_int && h_int < R && options.growth > 1.0, ErrorCode::OutOfRange, "grid",
          "need h_bdry <= h_int < R and growth > 1");
  // Distances to R grow geometrically from h_bdry, so the relative spacing h/d stays at growth - 1 and
  // profiles like 1/d are resolved uniformly across scales.
  std::vector<double> distances{0.0, h_bdry};
  while (distances.back() * (options.growth - 1.0) < h_int && distances.back() * options.growth < R - h_int)
    distances.push_back(distances.back() * options.growth);
  const double remaining = R - distances.back();
  const int cells = std::max(1, static_cast<int>(std::ceil(remaining / h_int - 1e-9)));
  const double start = distances.back();
  for (int k = 1; k <= cells; ++k) distances.push_back(start + remaining * k / cells);
  RadialGrid grid{R, N, Eigen::VectorXd(static_cast<Eigen::Index>(distances.size()))};
  const Eigen::Index K = grid.nodes.size() - 1;
  for (Eigen::Index i = 0; i <= K; ++i) grid.nodes[i] = R - distances[static_cast<std::size_t>(K - i)];
  grid.nodes[0] = 0.0;
  grid.nodes[K] = R;
  return grid;
}

RadialGrid RadialGrid::uniform(double R, int N, int intervals) {
  require(R > 0.0 && N >= 2 && intervals >= 2, ErrorCode::OutOfRange, "grid", "bad uniform grid");
  return {R, N, Eigen::VectorXd::LinSpaced(intervals + 1, 0.0, R)};
}

RadialGrid RadialGrid::bisected() const {
  RadialGrid fine{R, N, Eigen::VectorXd(2 * nodes.size() - 1)};
  for (Eigen::Index i = 0; i + 1 < nodes.size(); ++i) {
    fine.nodes[2 * i] = nodes[i];
    fine.nodes[2 * i + 1] = 0.5 * (nodes[i] + nodes[i + 1]);
  }
  fine.nodes[fine.nodes.size() - 1] = nodes[nodes.size() - 1];
  return fine;
}

// --------------------------------------------------------------- dirichlet

RadialProfile solve_dirichlet(const AbsorptionLaw& g, const RadialGrid& grid, double beta,
                              const DirichletOptions& options, const std::function<double(double)>& source) {
  require(beta >= 0.0 && std::isfinite(beta), ErrorCode::OutOfRange, "beta", "boundary value must be finite, >= 0");
  require(grid.size() >= 3, ErrorCode::OutOfRange, "grid", "need at least two cells");
  const Cells cells(grid);
  const Eigen::Index K = grid.size() - 1;
  PrefixProblem problem{g, cells, sample_source(grid, source), K};

  RadialProfile profile;
  profile.grid = grid;
  profile.u = Eigen::VectorXd::Constant(grid.size(), beta);
  const auto outcome = newton_solve(problem, profile.u, options);
  profile.residual = outcome.residual;
  profile.newton_iterations = outcome.iterations;
  profile.u_prime = conservative_gradient(g, grid, cells, profile.u, problem.source, K);
  profile.boundary_flux = profile.u_prime[K];
  finish_profile(profile, g, options, K);

  if (options.refinement_tolerance > 0.0) {
    DirichletOptions inner = options;
    inner.refinement_tolerance = 0.0;
    const auto fine = solve_dirichlet(g, grid.bisected(), beta, inner, source);
    double change = 0.0;
    for (Eigen::Index i = 0; i <= K; ++i) change = std::max(change, std::abs(fine.u[2 * i] - profile.u[i]));
    require(change <= options.refinement_tolerance * std::max(1.0, profile.u.cwiseAbs().maxCoeff()),
            ErrorCode::NonConvergedGrid, "grid", "refinement changes the solution by " + std::to_string(change));
  }
  return profile;
}

// ------------------------------------------------------------ large solution

LargeSolution large_solution(const AbsorptionLaw& g, const RadialGrid& grid, const LargeSolutionOptions& options) {
  const auto& r = grid.nodes;
  const Eigen::Index K = grid.size() - 1;
  const double R = grid.R;
  require(K >= 3, ErrorCode::OutOfRange, "grid", "need at least three cells");
  (void)psi(g, 1.0);  // KellerOssermanFails surfaces here

  // Stage boundaries: nodes at distance just above d_k, ending one node short of R.
  std::vector<Eigen::Index> boundaries;
  for (double d = options.first_distance * R;; d /= options.stage_factor) {
    Eigen::Index j = K - 1;
    while (j > 0 && R - r[j] < d * (1.0 - 1e-12)) --j;
    if (j > 0 && (boundaries.empty() || j > boundaries.back())) boundaries.push_back(j);
    if (j == K - 1) break;
  }

  const Cells cells(grid);
  LargeSolution out;
  Eigen::VectorXd u(grid.size());
  u[K] = kInf;
  for (Eigen::Index i = boundaries.front(); i < K; ++i) u[i] = psi_inv(g, R - r[i]);
  u.head(boundaries.front()).setConstant(u[boundaries.front()]);

  out.monotone_in_stage = true;
  PrefixProblem problem{g, cells, Eigen::VectorXd::Zero(grid.size()), 0};
  NewtonOutcome outcome;
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    problem.boundary = boundaries[k];
    outcome = newton_solve(problem, u, options.dirichlet);
    out.stage_distances.push_back(R - r[boundaries[k]]);
    if (!out.stages.empty()) {
      const auto& previous = out.stages.back();
      for (Eigen::Index i = 0; i <= boundaries[k - 1]; ++i)
        if (u[i] < previous[i] * (1.0 - 1e-10)) out.monotone_in_stage = false;
    }
    out.stages.push_back(u);
  }

  if (out.stages.size() >= 2) {
    const auto& previous = out.stages[out.stages.size() - 2];
    for (Eigen::Index i = 0; i <= K && r[i] <= options.inner_fraction * R; ++i)
      out.last_change = std::max(out.last_change, std::abs(u[i] - previous[i]) / std::max(1.0, std::abs(u[i])));
  }
  require(out.last_change <= options.tolerance, ErrorCode::NonConvergedGrid, "grid",
          "large solution still moves by " + std::to_string(out.last_change) + " between the last two stages");

  auto& profile = out.profile;
  profile.grid = grid;
  profile.u = u;
  profile.residual = outcome.residual;
  profile.newton_iterations = outcome.iterations;
  profile.u_prime = conservative_gradient(g, grid, cells, u, problem.source, K - 1);
  profile.u_prime[K] = kInf;
  profile.boundary_flux = kInf;
  finish_profile(profile, g, options.dirichlet, K - 1);
  return out;
}

// ------------------------------------------------------------- subsolution

SubsolutionSample subsolution_eval(const AbsorptionLaw& g, double nu, double T, double R, int N, double t, double r) {
  require(nu > 1.0, ErrorCode::OutOfRange, "nu", "nu must exceed one");
  require(r >= 0.0 && r <= R, ErrorCode::OutOfRange, "r", "radius outside [0, R]");
  require(t >= 0.0 && t < T, ErrorCode::OutOfRange, "t", "time outside [0, T)");
  SubsolutionSample sample;
  sample.value = psi_inv(g, nu * (T - t + R - r));
  const double gradient_scale = std::sqrt(2.0 * g.primitive(sample.value));  // -(psi_inv)' at the argument
  sample.radial_derivative = nu * gradient_scale;
  const double second = nu * nu * g.value(sample.value);
  const double drift = r > 0.0 ? (N - 1) / r * sample.radial_derivative : kInf;
  sample.residual = -(second + drift) + g.value(sample.value);
  sample.residual_negative = sample.residual < 0.0;
  // r^{N-1} U' vanishes at the origin for N >= 2, so the cone tip carries no mass.
  sample.origin_mass = N >= 2 ? 0.0 : -sample.radial_derivative;
  return sample;
}

}  // namespace blowup
