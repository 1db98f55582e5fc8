#ifndef QPM_BASIS_HPP
#define QPM_BASIS_HPP

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "qpm/lattice.hpp"

namespace qpm {

using Complex = std::complex<double>;

// Orthonormal pair spanning the plane orthogonal to one wavevector q, with
// d1 x d2 = q/|q|. Every divergence-free Fourier mode lives in this plane.
struct PolarizationFrame {
  std::array<double, 3> d1;
  std::array<double, 3> d2;
};

// Frames for all modes of an IndexSet, stored as flat row-major L x 3 blocks
// so the operator pipeline can walk them linearly. t_abs holds |q| per mode;
// the curl factor is i*t_abs.
struct FrameTables {
  std::int64_t size = 0;
  std::vector<double> r;      // rows = d1 components
  std::vector<double> s;      // rows = d2 components
  std::vector<double> t_abs;  // |q| per mode
};

// Coefficients in the divergence-free basis: length 2L, the u1 block for all
// modes followed by the u2 block, both in IndexSet order.
struct DivFreeCoeffs {
  std::vector<Complex> values;
};

// Full 3-vector Fourier coefficients, row-major L x 3 in IndexSet order.
struct VectorModeCoeffs {
  std::vector<Complex> values;
};

// Deterministic frame for q != 0: cross q with the coordinate axis it is
// least aligned with (ties resolved to the lowest axis index), normalize,
// then complete the right-handed pair. q may have fewer than 3 components;
// missing ones are treated as zero.
PolarizationFrame polarization_frame(std::span<const double> q);

FrameTables assemble_frame_tables(const IndexSet& set);

// Per-mode curl action (u1, u2) -> (-i|q| u2, +i|q| u1).
DivFreeCoeffs curl_coeff_apply(const FrameTables& tables, const DivFreeCoeffs& b);

// Row j = u1_j * d1_j + u2_j * d2_j.
VectorModeCoeffs divfree_to_vector(const FrameTables& tables, const DivFreeCoeffs& b);

// u1_j = <V_j, d1_j>, u2_j = <V_j, d2_j>: per-mode orthogonal projection
// onto the divergence-free plane, discarding any q-parallel component.
DivFreeCoeffs vector_to_divfree(const FrameTables& tables, const VectorModeCoeffs& V);

// Largest violation of the real-field conjugate symmetry u1(-k) = -conj(u1(k)),
// u2(-k) = conj(u2(k)) over all paired (k, -k) in the set. Modes whose mirror
// falls outside the half-open box are skipped.
double conjugate_pair_defect(const IndexSet& set, const DivFreeCoeffs& b);

}  // namespace qpm

#endif
