#ifndef QPM_PROBLEMS_HPP
#define QPM_PROBLEMS_HPP

#include <array>
#include <optional>

#include "qpm/expression.hpp"
#include "qpm/operators.hpp"
#include "qpm/solvers.hpp"

namespace qpm {

// Thrown when an iterative solve fails to reach its tolerance; the CLI maps
// this to its own exit code, distinct from configuration errors.
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SourceProblem {
  ProjectionMatrix P;
  int N = 8;
  double kappa = 1.0;
  Expression epsilon;
  // right-hand side: either a manufactured triple w (the source becomes the
  // operator applied to the curl coefficients of w) or explicit coefficients
  std::optional<std::array<Expression, 3>> w;
  std::optional<DivFreeCoeffs> rhs;
  int oversample = 1;
  GmresConfig gmres;
};

struct SourceSolution {
  IndexSet set;
  DivFreeCoeffs u;
  DivFreeCoeffs g;
  std::optional<DivFreeCoeffs> u_exact;  // curl coefficients of w, when manufactured
  GmresStats stats;
};

struct EigenProblem {
  ProjectionMatrix P;
  int N = 8;
  double M = 6.0;
  Expression epsilon;
  int oversample = 1;
  EigenSolverConfig solver;
  GmresConfig inner;  // the shift-invert inner solves
};

struct EigenSolution {
  IndexSet set;
  EigenResult result;
};

struct ErrorReport {
  double l2 = 0.0;
  double linf = 0.0;
  std::int64_t n_samples = 0;
  std::array<double, 2> box{0.0, 0.0};  // per-coordinate interval
};

struct ManufacturedRhs {
  DivFreeCoeffs g;
  DivFreeCoeffs u_exact;
};

struct DecayBin {
  double q_center = 0.0;
  double max_coeff = 0.0;
  std::int64_t count = 0;
};

// Source solve on the full index set. Throws SolveError when GMRES fails.
SourceSolution solve_source(const SourceProblem& prob);

// Smallest eigenpairs on the reduced index set by shift-invert iteration.
// Internally the similar Hermitian form |q| Mult |q| is iterated (its inner
// systems stay well conditioned independent of |q|); results are mapped back
// and every reported residual is recomputed against the actual eigenvalue
// operator, so residual_norms here are |H v - lambda v| / |v|.
EigenSolution solve_eigen(const EigenProblem& prob);

// Curl coefficients of the sampled w triple (u_exact) and the discrete
// source g consistent with the same-resolution operator.
ManufacturedRhs manufactured_rhs(const std::array<Expression, 3>& w,
                                 const Expression& epsilon, double kappa,
                                 const IndexSet& set, int oversample = 1);

// Same, but g is assembled at a finer resolution N_ref and restricted to the
// set, for studies of the true truncation error rather than the
// discretely-consistent system.
ManufacturedRhs manufactured_rhs_analytic(const std::array<Expression, 3>& w,
                                          const Expression& epsilon, double kappa,
                                          const IndexSet& set, int N_ref);

// Direct summation u(z) = sum (u1 d1 + u2 d2) e^{i<Pk,z>}. Reuses partial
// phase products across the column-major mode order, so consecutive modes
// cost about one complex multiply each.
class FieldEvaluator {
 public:
  FieldEvaluator(const IndexSet& set, const DivFreeCoeffs& coeffs);
  std::array<Complex, 3> at(std::span<const double> z);

 private:
  const IndexSet& set_;
  std::vector<Complex> W_;  // L x 3 vector coefficients
  std::vector<Complex> axis_phase_;
  std::vector<Complex> suffix_;
  std::vector<int> prev_k_;
};

std::vector<std::array<Complex, 3>> evaluate_field(
    const IndexSet& set, const DivFreeCoeffs& coeffs,
    std::span<const std::array<double, 3>> points);

using FieldFn = std::function<std::array<Complex, 3>(std::span<const double>)>;

// Discrete error norms over seeded uniform samples of [box_lo, box_hi]^3:
// l2 is the root mean square of the pointwise vector differences, linf the
// largest one.
ErrorReport error_norms(const FieldFn& numeric, const FieldFn& reference,
                        double box_lo, double box_hi, std::int64_t n_samples,
                        std::uint64_t seed);

// Envelope of max(|u1|, |u2|) per |q| bin, bins uniform on [0, max |q|].
std::vector<DecayBin> coefficient_decay_profile(const IndexSet& set,
                                                const DivFreeCoeffs& coeffs,
                                                int n_bins);

// Re-index coefficients from one set into another (zeros where a mode of dst
// is not in src). Both sets must share the projection matrix and N.
DivFreeCoeffs embed_divfree(const IndexSet& src, const DivFreeCoeffs& coeffs,
                            const IndexSet& dst);

// Multiply by a global unit phase making the largest-modulus coefficient
// real positive (ties to the lowest index), canonicalizing eigenvectors for
// output.
void normalize_phase(DivFreeCoeffs& coeffs);

}  // namespace qpm

#endif
