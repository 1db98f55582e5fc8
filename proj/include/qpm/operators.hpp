#ifndef QPM_OPERATORS_HPP
#define QPM_OPERATORS_HPP

#include <memory>

#include "qpm/basis.hpp"
#include "qpm/lattice.hpp"
#include "qpm/permittivity.hpp"
#include "qpm/transforms.hpp"

namespace qpm {

// Matrix-free application of the curl-curl operators in divergence-free
// coefficient space. One plan owns the FFT machinery, the frame tables, the
// sampled 1/eps grid and the scratch buffers, so a single instance must not
// run two applies concurrently; clone the plan per worker instead.
//
// The pointwise multiply runs on a grid of eps.points_per_dim points per
// dimension, which may exceed the mode box N (oversampled grid) to reduce
// aliasing in the product.
class OperatorPlan {
 public:
  OperatorPlan(IndexSet set, PermittivityField eps, double kappa);

  const IndexSet& set() const { return set_; }
  const FrameTables& tables() const { return tables_; }
  const GridSpec& grid() const { return grid_; }
  const PermittivityField& permittivity() const { return eps_; }
  double kappa() const { return kappa_; }
  std::int64_t dof() const { return set_.dof(); }

  // curl (1/eps) curl + kappa, the source-problem left-hand side.
  // Requires kappa > 0 (the source form is only coercive then).
  void apply_source(std::span<const Complex> b, std::span<Complex> out);

  // curl curl (1/eps .), i.e. |q|^2 times the projected multiplier, the
  // eigenvalue-problem operator.
  void apply_eigen(std::span<const Complex> b, std::span<Complex> out);

  // Projection of the pointwise 1/eps multiply back onto the
  // divergence-free basis: expand, inverse FFT, multiply, forward FFT,
  // project. Both operators above are cheap diagonal wrappers around this.
  void apply_multiplier(std::span<const Complex> b, std::span<Complex> out);

  DivFreeCoeffs apply_source(const DivFreeCoeffs& b);
  DivFreeCoeffs apply_eigen(const DivFreeCoeffs& b);

 private:
  IndexSet set_;
  FrameTables tables_;
  GridSpec grid_;
  PermittivityField eps_;
  double kappa_;
  std::unique_ptr<FourierTransformer> fft_;
  std::vector<std::int64_t> map_;
  std::vector<Complex> vmode_;  // L x 3 scratch
  std::vector<Complex> box_;    // one grid-sized component scratch

  void check_len(std::size_t len) const;
};

enum class OracleForm { Source, Eigen, Multiplier };

// Independent dense assembly of the same operators for small instances.
// The convolution kernel comes from a hand-rolled separable DFT of the
// sampled 1/eps grid (no FFTW, no scatter/gather), so agreement with the
// plan's applies genuinely cross-checks the pipeline. Row-major dof x dof.
std::vector<Complex> dense_oracle(const IndexSet& set, const PermittivityField& eps,
                                  double kappa, OracleForm form);

}  // namespace qpm

#endif
