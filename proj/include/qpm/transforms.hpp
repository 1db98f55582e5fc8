#ifndef QPM_TRANSFORMS_HPP
#define QPM_TRANSFORMS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "qpm/basis.hpp"
#include "qpm/lattice.hpp"

namespace qpm {

// Uniform n-dimensional torus grid with N points per dimension, mesh width
// h = 2*pi/N. Grid arrays are column-major (first coordinate fastest), the
// same convention the mode box uses.
struct GridSpec {
  int n = 0;
  int N = 0;
  double h = 0.0;
  std::int64_t total_points = 0;
};

GridSpec make_grid_spec(int n, int N);

// One or three complex component arrays sampled over a GridSpec.
struct GridField {
  std::vector<std::vector<Complex>> components;
};

// Complex-to-complex FFT pair on a fixed GridSpec. Forward applies the
// averaging normalization 1/N^n so a plane wave e^{i<k,x>} transforms to a
// single unit coefficient; backward is its exact inverse (unnormalized
// exponential sum). Holds FFTW plans plus one aligned scratch buffer, so a
// single instance must not run two transforms concurrently.
class FourierTransformer {
 public:
  explicit FourierTransformer(const GridSpec& spec);
  ~FourierTransformer();
  FourierTransformer(const FourierTransformer&) = delete;
  FourierTransformer& operator=(const FourierTransformer&) = delete;

  const GridSpec& spec() const { return spec_; }

  // grid samples -> box coefficients, box index per dim = (k + N) % N
  void forward(std::span<const Complex> grid, std::span<Complex> coeffs);
  // box coefficients -> grid samples
  void backward(std::span<const Complex> coeffs, std::span<Complex> grid);

 private:
  GridSpec spec_;
  void* plan_fwd_ = nullptr;
  void* plan_bwd_ = nullptr;
  Complex* buf_ = nullptr;

  void run(std::span<const Complex> in, std::span<Complex> out, void* plan, double scale);
};

// Convenience single-shot wrappers (plan construction per call; fine for
// tests, not for the solver hot path).
std::vector<Complex> forward_fft(const GridSpec& spec, std::span<const Complex> grid);
std::vector<Complex> inverse_fft(const GridSpec& spec, std::span<const Complex> coeffs);

// Column-major box position of each tracked mode on a grid with grid_N >= N
// points per dimension (grid_N > N when the pointwise multiply runs on an
// oversampled grid).
std::vector<std::int64_t> build_mode_map(const IndexSet& set, int grid_N);

// Embed tracked vector coefficients into three full-box arrays (zero
// elsewhere, zero at k = 0), and restrict back. The map argument must come
// from build_mode_map on the same set and grid size.
void scatter_modes(const std::vector<std::int64_t>& map, const VectorModeCoeffs& V,
                   std::span<Complex> box0, std::span<Complex> box1,
                   std::span<Complex> box2);
void gather_modes(const std::vector<std::int64_t>& map, std::span<const Complex> box0,
                  std::span<const Complex> box1, std::span<const Complex> box2,
                  VectorModeCoeffs& V);

// Spec-sized convenience forms used by tests.
GridField scatter_modes(const IndexSet& set, const VectorModeCoeffs& V, int grid_N);
VectorModeCoeffs gather_modes(const IndexSet& set, const GridField& box, int grid_N);

}  // namespace qpm

#endif
