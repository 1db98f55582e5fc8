#include "qpm/transforms.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace qpm {

GridSpec make_grid_spec(int n, int N) {
  if (n < 1) throw std::invalid_argument("grid dimension must be at least 1");
  if (N < 2 || N % 2 != 0)
    throw std::invalid_argument("grid size must be even and at least 2");
  GridSpec s;
  s.n = n;
  s.N = N;
  s.h = 2.0 * M_PI / N;
  s.total_points = 1;
  for (int i = 0; i < n; ++i) s.total_points *= N;
  return s;
}

FourierTransformer::FourierTransformer(const GridSpec& spec) : spec_(spec) {
  buf_ = reinterpret_cast<Complex*>(
      fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(spec.total_points)));
  if (!buf_) throw std::bad_alloc();

  // All dimensions are equal, so the exponent sum is symmetric under axis
  // reversal and FFTW's row-major transform of this buffer coincides with
  // the column-major transform we document. ESTIMATE keeps planning
  // deterministic (MEASURE picks algorithms by timing, which would let two
  // runs of the same config differ in the last bits).
  std::vector<int> dims(static_cast<std::size_t>(spec.n), spec.N);
  auto* b = reinterpret_cast<fftw_complex*>(buf_);
  plan_fwd_ = fftw_plan_dft(spec.n, dims.data(), b, b, FFTW_FORWARD, FFTW_ESTIMATE);
  plan_bwd_ = fftw_plan_dft(spec.n, dims.data(), b, b, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!plan_fwd_ || !plan_bwd_) {
    fftw_free(buf_);
    throw std::runtime_error("FFTW plan construction failed");
  }
}

FourierTransformer::~FourierTransformer() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
  fftw_free(buf_);
}

void FourierTransformer::run(std::span<const Complex> in, std::span<Complex> out,
                             void* plan, double scale) {
  const std::size_t total = static_cast<std::size_t>(spec_.total_points);
  if (in.size() != total || out.size() != total)
    throw std::invalid_argument("transform buffer size does not match grid");
  std::memcpy(buf_, in.data(), total * sizeof(Complex));
  fftw_execute(static_cast<fftw_plan>(plan));
  if (scale == 1.0) {
    std::memcpy(out.data(), buf_, total * sizeof(Complex));
  } else {
    for (std::size_t i = 0; i < total; ++i) out[i] = buf_[i] * scale;
  }
}

void FourierTransformer::forward(std::span<const Complex> grid, std::span<Complex> coeffs) {
  run(grid, coeffs, plan_fwd_, 1.0 / static_cast<double>(spec_.total_points));
}

void FourierTransformer::backward(std::span<const Complex> coeffs, std::span<Complex> grid) {
  run(coeffs, grid, plan_bwd_, 1.0);
}

std::vector<Complex> forward_fft(const GridSpec& spec, std::span<const Complex> grid) {
  FourierTransformer t(spec);
  std::vector<Complex> out(static_cast<std::size_t>(spec.total_points));
  t.forward(grid, out);
  return out;
}

std::vector<Complex> inverse_fft(const GridSpec& spec, std::span<const Complex> coeffs) {
  FourierTransformer t(spec);
  std::vector<Complex> out(static_cast<std::size_t>(spec.total_points));
  t.backward(coeffs, out);
  return out;
}

std::vector<std::int64_t> build_mode_map(const IndexSet& set, int grid_N) {
  if (grid_N < set.N())
    throw std::invalid_argument("grid is smaller than the mode box");
  std::vector<std::int64_t> map(static_cast<std::size_t>(set.size()));
  for (std::int64_t j = 0; j < set.size(); ++j) {
    auto k = set.k(j);
    std::int64_t lin = 0;
    std::int64_t stride = 1;
    for (int i = 0; i < set.n(); ++i) {
      int bin = (k[i] + grid_N) % grid_N;
      lin += bin * stride;
      stride *= grid_N;
    }
    map[static_cast<std::size_t>(j)] = lin;
  }
  return map;
}

void scatter_modes(const std::vector<std::int64_t>& map, const VectorModeCoeffs& V,
                   std::span<Complex> box0, std::span<Complex> box1,
                   std::span<Complex> box2) {
  if (V.values.size() != map.size() * 3)
    throw std::invalid_argument("vector coefficients do not match mode map");
  std::fill(box0.begin(), box0.end(), Complex(0.0));
  std::fill(box1.begin(), box1.end(), Complex(0.0));
  std::fill(box2.begin(), box2.end(), Complex(0.0));
  for (std::size_t j = 0; j < map.size(); ++j) {
    const std::size_t p = static_cast<std::size_t>(map[j]);
    box0[p] = V.values[j * 3 + 0];
    box1[p] = V.values[j * 3 + 1];
    box2[p] = V.values[j * 3 + 2];
  }
}

void gather_modes(const std::vector<std::int64_t>& map, std::span<const Complex> box0,
                  std::span<const Complex> box1, std::span<const Complex> box2,
                  VectorModeCoeffs& V) {
  V.values.resize(map.size() * 3);
  for (std::size_t j = 0; j < map.size(); ++j) {
    const std::size_t p = static_cast<std::size_t>(map[j]);
    V.values[j * 3 + 0] = box0[p];
    V.values[j * 3 + 1] = box1[p];
    V.values[j * 3 + 2] = box2[p];
  }
}

GridField scatter_modes(const IndexSet& set, const VectorModeCoeffs& V, int grid_N) {
  auto map = build_mode_map(set, grid_N);
  std::int64_t total = 1;
  for (int i = 0; i < set.n(); ++i) total *= grid_N;
  GridField f;
  f.components.assign(3, std::vector<Complex>(static_cast<std::size_t>(total)));
  scatter_modes(map, V, f.components[0], f.components[1], f.components[2]);
  return f;
}

VectorModeCoeffs gather_modes(const IndexSet& set, const GridField& box, int grid_N) {
  auto map = build_mode_map(set, grid_N);
  if (box.components.size() != 3)
    throw std::invalid_argument("expected a 3-component box");
  VectorModeCoeffs V;
  gather_modes(map, box.components[0], box.components[1], box.components[2], V);
  return V;
}

}  // namespace qpm
