#include "qpm/basis.hpp"

#include <cmath>
#include <stdexcept>

namespace qpm {

namespace {

std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1],
          a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

void check_lengths(const FrameTables& tables, std::size_t coeff_len) {
  if (coeff_len != static_cast<std::size_t>(2 * tables.size))
    throw std::invalid_argument("divergence-free coefficient length " +
                                std::to_string(coeff_len) + " does not match 2 x " +
                                std::to_string(tables.size) + " modes");
}

}  // namespace

PolarizationFrame polarization_frame(std::span<const double> q) {
  if (q.size() > 3)
    throw std::invalid_argument("wavevector has more than 3 components");
  std::array<double, 3> q3{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < q.size(); ++i) q3[i] = q[i];

  double norm = std::sqrt(q3[0] * q3[0] + q3[1] * q3[1] + q3[2] * q3[2]);
  if (norm == 0.0)
    throw std::invalid_argument("polarization frame undefined for the zero mode");

  int a = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(q3[i]) < std::abs(q3[a])) a = i;
  std::array<double, 3> e{0.0, 0.0, 0.0};
  e[a] = 1.0;

  PolarizationFrame f;
  f.d1 = cross(q3, e);
  double d1n = std::sqrt(f.d1[0] * f.d1[0] + f.d1[1] * f.d1[1] + f.d1[2] * f.d1[2]);
  for (double& v : f.d1) v /= d1n;
  // |q x d1| = |q| exactly since d1 is a unit vector orthogonal to q, so
  // dividing by |q| normalizes and gives d1 x d2 = q/|q|
  f.d2 = cross(q3, f.d1);
  for (double& v : f.d2) v /= norm;
  return f;
}

FrameTables assemble_frame_tables(const IndexSet& set) {
  if (set.size() == 0)
    throw std::invalid_argument("cannot assemble frame tables for an empty set");
  FrameTables t;
  t.size = set.size();
  t.r.resize(static_cast<std::size_t>(t.size) * 3);
  t.s.resize(static_cast<std::size_t>(t.size) * 3);
  t.t_abs.resize(static_cast<std::size_t>(t.size));
  for (std::int64_t j = 0; j < t.size; ++j) {
    PolarizationFrame f = polarization_frame(set.q(j));
    for (int c = 0; c < 3; ++c) {
      t.r[static_cast<std::size_t>(j) * 3 + c] = f.d1[c];
      t.s[static_cast<std::size_t>(j) * 3 + c] = f.d2[c];
    }
    t.t_abs[static_cast<std::size_t>(j)] = set.qnorm(j);
  }
  return t;
}

DivFreeCoeffs curl_coeff_apply(const FrameTables& tables, const DivFreeCoeffs& b) {
  check_lengths(tables, b.values.size());
  const std::size_t L = static_cast<std::size_t>(tables.size);
  DivFreeCoeffs out;
  out.values.resize(2 * L);
  for (std::size_t j = 0; j < L; ++j) {
    const Complex iq(0.0, tables.t_abs[j]);
    out.values[j] = -iq * b.values[L + j];
    out.values[L + j] = iq * b.values[j];
  }
  return out;
}

VectorModeCoeffs divfree_to_vector(const FrameTables& tables, const DivFreeCoeffs& b) {
  check_lengths(tables, b.values.size());
  const std::size_t L = static_cast<std::size_t>(tables.size);
  VectorModeCoeffs out;
  out.values.resize(L * 3);
  for (std::size_t j = 0; j < L; ++j) {
    const Complex u1 = b.values[j];
    const Complex u2 = b.values[L + j];
    for (int c = 0; c < 3; ++c)
      out.values[j * 3 + c] = u1 * tables.r[j * 3 + c] + u2 * tables.s[j * 3 + c];
  }
  return out;
}

DivFreeCoeffs vector_to_divfree(const FrameTables& tables, const VectorModeCoeffs& V) {
  if (V.values.size() != static_cast<std::size_t>(tables.size) * 3)
    throw std::invalid_argument("vector coefficient shape does not match frame tables");
  const std::size_t L = static_cast<std::size_t>(tables.size);
  DivFreeCoeffs out;
  out.values.resize(2 * L);
  for (std::size_t j = 0; j < L; ++j) {
    Complex u1 = 0.0, u2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      u1 += V.values[j * 3 + c] * tables.r[j * 3 + c];
      u2 += V.values[j * 3 + c] * tables.s[j * 3 + c];
    }
    out.values[j] = u1;
    out.values[L + j] = u2;
  }
  return out;
}

double conjugate_pair_defect(const IndexSet& set, const DivFreeCoeffs& b) {
  if (b.values.size() != static_cast<std::size_t>(set.dof()))
    throw std::invalid_argument("coefficient length does not match set DOF");
  const std::size_t L = static_cast<std::size_t>(set.size());
  double worst = 0.0;
  std::vector<int> neg(set.n());
  for (std::int64_t j = 0; j < set.size(); ++j) {
    auto kj = set.k(j);
    for (int i = 0; i < set.n(); ++i) neg[i] = -kj[i];
    auto jm = linear_index(set, neg);
    if (!jm) continue;
    std::size_t m = static_cast<std::size_t>(*jm);
    worst = std::max(worst,
                     std::abs(b.values[m] + std::conj(b.values[static_cast<std::size_t>(j)])));
    worst = std::max(worst,
                     std::abs(b.values[L + m] - std::conj(b.values[L + static_cast<std::size_t>(j)])));
  }
  return worst;
}

}  // namespace qpm
