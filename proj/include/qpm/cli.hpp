#ifndef QPM_CLI_HPP
#define QPM_CLI_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpm/problems.hpp"

namespace qpm {

// Raised for anything wrong with a run configuration: unreadable file, bad
// JSON, unknown keys, values out of range. Distinct from SolveError so the
// two map to different process exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergencePair {
  int N = 0;
  double M = 0.0;

  bool operator==(const ConvergencePair&) const = default;
};

// Settings for a refinement study over several (N, M) resolutions. For source
// runs the error is measured against either the closed-form solution (when
// the config carries one) or a self-reference run at `reference`; for
// eigenvalue runs it is the distance of the smallest eigenvalue from the
// reference run's.
struct ConvergenceSpec {
  std::vector<ConvergencePair> pairs;
  std::optional<ConvergencePair> reference;
  std::array<double, 2> box{-10.0, 10.0};  // per-coordinate sampling interval
  std::int64_t samples = 4096;
  // assemble the right-hand side at resolution n_ref and restrict, instead of
  // using the same-resolution discrete source
  bool analytic_g = false;
  int n_ref = 0;

  bool operator==(const ConvergenceSpec&) const = default;
};

// A cubic lattice of evaluation points, points^3 sites with each coordinate
// running from lo to hi inclusive.
struct FieldGridSpec {
  double lo = -10.0;
  double hi = 10.0;
  int points = 5;
  std::string field = "source";  // or "eigenvector"
  int eigenvector_id = 1;        // 1-based, ascending eigenvalue order

  bool operator==(const FieldGridSpec&) const = default;
};

// Everything a run needs, as read from a JSON config file. Matrix entries and
// field definitions stay in their source string form here; the
// *_from_config helpers parse them into expressions on demand, so a config
// can be loaded, edited, and written back without loss.
struct RunConfig {
  std::string kind = "source";  // or "eigen"
  std::vector<std::vector<std::string>> projection;  // d rows of n constant expressions
  int N = 8;
  double M = 6.0;
  double kappa = 1.0;
  std::string epsilon = "1";
  std::optional<std::array<std::string, 3>> w;        // manufactured source field
  std::optional<std::array<std::string, 3>> u_exact;  // closed-form solution
  int oversample = 1;
  std::uint64_t seed = 12345;  // error-sampling seed
  bool verbose = false;
  GmresConfig gmres;
  EigenSolverConfig eigensolver;
  std::optional<ConvergenceSpec> convergence;
  std::optional<FieldGridSpec> field_grid;

  bool operator==(const RunConfig&) const = default;
};

// Parses a JSON document into a RunConfig. `origin` (a file name, or any
// label) prefixes every error message. Unknown keys are rejected rather than
// ignored, so typos surface immediately.
RunConfig parse_config_text(const std::string& text, const std::string& origin);

RunConfig load_config(const std::string& path);

// Canonical JSON form, two-space indented, fixed key order, optional blocks
// only when set. Parsing the result yields the original config back; the
// solver-internal verbose switches are runtime-only and never serialized.
std::string serialize_config(const RunConfig& cfg);

ProjectionMatrix projection_from_config(const RunConfig& cfg);
SourceProblem source_problem_from_config(const RunConfig& cfg);
EigenProblem eigen_problem_from_config(const RunConfig& cfg);

// "id,eigenvalue,residual" rows, ids counting from 1 in ascending eigenvalue
// order, values printed with 17 significant digits so reruns are
// byte-identical.
void emit_eigen_csv(const EigenResult& result, std::ostream& os);
void emit_eigen_csv(const EigenResult& result, const std::string& path);

// Runs the study described by cfg.convergence and writes a CSV table:
// "N,M,l2,linf" rows for source runs, "N,M,eigenvalue_error" for eigenvalue
// runs. Throws ConfigError when the block is missing or incomplete.
void run_convergence_study(const RunConfig& cfg, std::ostream& os);

// The command-line entry point. Returns the process exit code: 0 on success,
// 2 when an iterative solve or a verification fixture fails, 1 for
// configuration and usage errors.
int run_cli(int argc, char** argv);

}  // namespace qpm

#endif
