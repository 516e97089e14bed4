#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "blowup/harness/config.hpp"
#include "blowup/harness/csv.hpp"

namespace blowup::harness {

inline constexpr std::string_view kToolName = "blowup_lab";
inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr std::string_view kOutputEnv = "BLOWUP_LAB_OUT";
inline constexpr std::string_view kSidecarName = "run.meta.toml";

enum class Experiment { Ode, ControlOde, Elliptic, Large, Dynbc, ControlPde, Selfsim, Check, Sweep };

[[nodiscard]] std::optional<Experiment> parse_experiment(std::string_view name) noexcept;
[[nodiscard]] std::string_view to_string(Experiment experiment) noexcept;
[[nodiscard]] const std::vector<Experiment>& all_experiments();

/// Every accepted key with its default value.
[[nodiscard]] const Config& default_config();

/// Fills defaults and rejects unknown keys, wrong types, non-integral counts and unknown law
/// kinds (UsageError). Keys under "meta." (written to sidecars) are ignored, so a sidecar can be
/// fed back as a config.
[[nodiscard]] Config resolve(const Config& user);

/// Re-validates the module contracts that can be checked without running (law construction,
/// positivity of geometry); throws ContractError with the parameter path.
void validate(const Config& resolved);

struct RunOptions {
  std::filesystem::path out_dir;  ///< empty: $BLOWUP_LAB_OUT, then "blowup_out"
  int workers = 1;
  bool force = false;             ///< run below the domination gate
  std::ostream* log = nullptr;    ///< progress and warnings; null discards them
};

/// Runs one cell of an experiment on a resolved config and returns its summary row. Detailed CSV
/// artifacts go to `artifact_dir` when non-null. Module errors propagate as ContractError.
[[nodiscard]] Record run_cell(Experiment experiment, const Config& resolved,
                              const std::filesystem::path* artifact_dir, std::ostream& log);

struct SweepCell {
  std::vector<double> axis_values;
  Config config;
};

/// Cartesian product of the "sweep.axes.<key>" arrays; axes sorted by key, first axis outermost.
[[nodiscard]] std::vector<SweepCell> sweep_cells(const Config& resolved);

/// Runs every cell on `workers` threads and writes one row per cell in cell order. Failures are
/// recorded in the status column. Returns the number of failed cells.
int run_sweep(const Config& resolved, int workers, std::ostream& csv, std::ostream& log);

/// Resolves, validates and dispatches; writes CSV artifacts and the metadata sidecar into the
/// output directory. Returns 0 on success and 2 on a contract violation; usage problems throw
/// UsageError for the caller to map to 1.
int run(Experiment experiment, const Config& user, const RunOptions& options);

[[nodiscard]] std::filesystem::path output_directory(const RunOptions& options);

}  // namespace blowup::harness
