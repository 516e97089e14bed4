#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "blowup/nonlinearity.hpp"

namespace blowup {

struct GridOptions {
  double h_bdry = 0.0;   ///< spacing at r = R; 0 means 1e-4 R
  double h_int = 0.0;    ///< interior spacing; 0 means 1e-2 R
  double growth = 1.05;  ///< spacing ratio between neighbouring cells near R
};

/// Nodes 0 = r_0 < ... < r_K = R for radially symmetric problems in dimension N.
struct RadialGrid {
  double R = 1.0;
  int N = 3;
  Eigen::VectorXd nodes;

  [[nodiscard]] static RadialGrid refined(double R, int N, const GridOptions& options = {});
  [[nodiscard]] static RadialGrid uniform(double R, int N, int intervals);
  [[nodiscard]] Eigen::Index size() const noexcept { return nodes.size(); }
  /// Grid with the midpoint of every cell inserted.
  [[nodiscard]] RadialGrid bisected() const;
};

struct RadialProfile {
  RadialGrid grid;
  Eigen::VectorXd u;
  Eigen::VectorXd u_prime;       ///< from the discrete flux balance
  double boundary_flux = 0.0;    ///< du/dr at r = R
  bool gradient_bound_ok = false;
  double gradient_ratio = 0.0;   ///< max u' / sqrt(2 G(u)) over nodes with G(u) > 0
  bool monotone = false;
  double residual = 0.0;         ///< scaled residual of the last Newton iterate
  int newton_iterations = 0;
};

struct DirichletOptions {
  double residual_tolerance = 1e-10;
  int max_iterations = 200;
  double damping_floor = 0x1p-20;
  double gradient_tolerance = 1e-3;  ///< relative slack in u' <= sqrt(2 G(u))
  double refinement_tolerance = 0.0; ///< > 0: compare with the bisected grid, NonConvergedGrid if worse
};

/// -(r^{N-1} u')' / r^{N-1} + g(u) = source(r) on (0, R), u'(0) = 0, u(R) = beta, by a
/// vertex-centred finite-volume scheme and damped Newton.
[[nodiscard]] RadialProfile solve_dirichlet(const AbsorptionLaw& g, const RadialGrid& grid, double beta,
                                            const DirichletOptions& options = {},
                                            const std::function<double(double)>& source = {});

struct LargeSolutionOptions {
  double first_distance = 0.1;       ///< relative to R
  double stage_factor = 3.1622776601683795;
  double tolerance = 1e-6;           ///< change between the last two stages on [0, inner_fraction R]
  double inner_fraction = 0.9;
  DirichletOptions dirichlet{};
};

struct LargeSolution {
  RadialProfile profile;                 ///< u(R) = +inf
  std::vector<double> stage_distances;   ///< d_k where u = psi_inv(d_k) was imposed
  std::vector<Eigen::VectorXd> stages;   ///< solved values on the full grid per stage
  bool monotone_in_stage = false;
  double last_change = 0.0;
};

/// Boundary blow-up solution as the limit of Dirichlet problems on [0, R - d_k] closed by
/// u(R - d) = psi_inv(d). Throws NonConvergedGrid if the last stages still move.
[[nodiscard]] LargeSolution large_solution(const AbsorptionLaw& g, const RadialGrid& grid,
                                           const LargeSolutionOptions& options = {});

struct SubsolutionSample {
  double value = 0.0;
  double radial_derivative = 0.0;
  double residual = 0.0;       ///< -Delta U + g(U)
  bool residual_negative = false;
  double origin_mass = 0.0;    ///< -lim r^{N-1} U'(r) as r -> 0, the point mass of -Delta U at 0
};

/// U(r, t) = psi_inv(nu (T - t + R - r)) and its interior residual.
[[nodiscard]] SubsolutionSample subsolution_eval(const AbsorptionLaw& g, double nu, double T, double R, int N, double t,
                                                 double r);

}  // namespace blowup
