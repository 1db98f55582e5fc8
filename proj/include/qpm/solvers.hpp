#ifndef QPM_SOLVERS_HPP
#define QPM_SOLVERS_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qpm/operators.hpp"

namespace qpm {

// A linear operator is anything that maps one coefficient vector to another
// of the same length. out never aliases in.
using LinearOp = std::function<void(std::span<const Complex>, std::span<Complex>)>;

struct GmresConfig {
  double rel_tolerance = 1e-10;
  int restart = 30;
  std::int64_t max_iterations = 5000;
  bool verbose = false;

  bool operator==(const GmresConfig&) const = default;
};

struct GmresStats {
  std::int64_t iterations = 0;
  double final_residual = 0.0;  // relative to |b|
  bool converged = false;
  // set when an invariant Krylov subspace was hit and the solve finished
  // exactly ahead of the tolerance
  bool breakdown = false;
  // estimated relative residual after each inner iteration, across cycles
  std::vector<double> residual_history;
};

struct GmresResult {
  std::vector<Complex> x;
  GmresStats stats;
};

GmresResult gmres(const LinearOp& apply, std::span<const Complex> b,
                  const GmresConfig& cfg);

enum class EigenWhich { SmallestMagnitude, LargestMagnitude };
enum class EigenMode { Direct, ShiftInvert };

struct EigenSolverConfig {
  int krylov_dim = 60;  // locked vectors plus the active basis stay within this
  int n_eigenvalues = 6;
  EigenWhich which = EigenWhich::SmallestMagnitude;
  // In ShiftInvert mode the operator handed to arnoldi_eigs is understood to
  // be (A - sigma I)^{-1}; Ritz values mu are reported as sigma + 1/mu and
  // selection is always nearest-to-sigma, so `which` is ignored.
  EigenMode mode = EigenMode::Direct;
  double sigma = 0.0;
  double residual_tolerance = 1e-9;
  int max_restarts = 400;
  std::uint64_t seed = 1234;
  bool verbose = false;

  bool operator==(const EigenSolverConfig&) const = default;
};

struct EigenResult {
  std::vector<double> eigenvalues;  // ascending; ties keep a deterministic
                                    // coefficient-lexicographic order
  // Residuals of the operator the solver actually iterated on, scaled as
  // |op v - mu v| / (|v| max(1, |mu|)). Drivers that run through a spectral
  // transformation recompute residuals against the original operator before
  // reporting (see solve_eigen).
  std::vector<double> residual_norms;
  std::vector<std::vector<Complex>> eigenvectors;
  std::int64_t iterations = 0;  // total operator applications
  bool converged = false;
};

// Restarted Arnoldi with exact deflation: converged Ritz vectors are locked,
// every later Krylov vector is orthogonalized against the locked block, and
// each restart draws a fresh seeded start vector so degenerate clusters are
// recovered one member per cycle. Ritz extraction is dense QR on the small
// Hessenberg matrix. Ritz values failing the real-spectrum check
// |Im| <= 1e-8 max(1, |Re|) are never locked.
EigenResult arnoldi_eigs(const LinearOp& apply, std::int64_t dof,
                         const EigenSolverConfig& cfg);

// Spectral transformation v -> (H_eig - sigma I)^{-1} v with the inner
// system solved by GMRES on the plan's eigen operator. The returned closure
// keeps a reference to the plan; inner non-convergence throws.
LinearOp shift_invert_apply(OperatorPlan& plan, double sigma, const GmresConfig& cfg);

}  // namespace qpm

#endif
