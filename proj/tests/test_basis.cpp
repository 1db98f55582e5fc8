#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "qpm/basis.hpp"

using qpm::assemble_frame_tables;
using qpm::build_index_set;
using qpm::Complex;
using qpm::curl_coeff_apply;
using qpm::divfree_to_vector;
using qpm::DivFreeCoeffs;
using qpm::FrameTables;
using qpm::IndexSet;
using qpm::PolarizationFrame;
using qpm::polarization_frame;
using qpm::ProjectionMatrix;
using qpm::vector_to_divfree;
using qpm::VectorModeCoeffs;

namespace {

const double kSqrt5 = std::sqrt(5.0);

ProjectionMatrix prom() {
  return ProjectionMatrix(3, 6,
                          {1, 0, 0, kSqrt5, 0, 0,
                           0, 1, 0, 0, kSqrt5, 0,
                           0, 0, 1, 0, 0, kSqrt5});
}

ProjectionMatrix prom0() {
  const double s = std::sqrt(2.0);
  return ProjectionMatrix(3, 6,
                          {1, 0, 0, s, 0, 0,
                           0, 1, 0, 0, s, 0,
                           0, 0, 1, 0, 0, s});
}

DivFreeCoeffs random_coeffs(std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DivFreeCoeffs b;
  b.values.reserve(len);
  for (std::size_t i = 0; i < len; ++i) b.values.emplace_back(u(rng), u(rng));
  return b;
}

Complex dot(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * std::conj(b[i]);
  return s;
}

}  // namespace

TEST_CASE("frame convention on axis-aligned wavevectors") {
  std::vector<double> qx{1.0, 0.0, 0.0};
  PolarizationFrame f = polarization_frame(qx);
  CHECK(f.d1[0] == 0.0);
  CHECK(f.d1[1] == 0.0);
  CHECK(f.d1[2] == 1.0);
  CHECK(f.d2[0] == 0.0);
  CHECK(f.d2[1] == -1.0);
  CHECK(f.d2[2] == 0.0);

  std::vector<double> qz{0.0, 0.0, 2.0};
  PolarizationFrame g = polarization_frame(qz);
  CHECK(g.d1[0] == 0.0);
  CHECK(g.d1[1] == 1.0);
  CHECK(g.d1[2] == 0.0);
  CHECK(g.d2[0] == -1.0);
  CHECK(g.d2[1] == 0.0);
  CHECK(g.d2[2] == 0.0);
}

TEST_CASE("frame rejects the zero mode and over-long vectors") {
  std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(polarization_frame(zero), std::invalid_argument);
  std::vector<double> four{1.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(polarization_frame(four), std::invalid_argument);
}

TEST_CASE("shorter wavevectors are padded with zeros") {
  std::vector<double> q1{1.0};
  PolarizationFrame f = polarization_frame(q1);
  CHECK(f.d1[2] == 1.0);
  CHECK(f.d2[1] == -1.0);
}

TEST_CASE("frame properties across a full set") {
  IndexSet set = build_index_set(prom0(), 4);
  for (std::int64_t j = 0; j < set.size(); ++j) {
    PolarizationFrame f = polarization_frame(set.q(j));
    const auto q = set.q(j);
    double d1q = 0.0, d2q = 0.0, d11 = 0.0, d22 = 0.0, d12 = 0.0;
    for (int c = 0; c < 3; ++c) {
      d1q += f.d1[c] * q[c];
      d2q += f.d2[c] * q[c];
      d11 += f.d1[c] * f.d1[c];
      d22 += f.d2[c] * f.d2[c];
      d12 += f.d1[c] * f.d2[c];
    }
    CHECK(std::abs(d1q) <= 1e-13 * set.qnorm(j));
    CHECK(std::abs(d2q) <= 1e-13 * set.qnorm(j));
    CHECK(std::abs(d11 - 1.0) <= 1e-13);
    CHECK(std::abs(d22 - 1.0) <= 1e-13);
    CHECK(std::abs(d12) <= 1e-13);
    // right-handed: d1 x d2 = q/|q|
    const double cx = f.d1[1] * f.d2[2] - f.d1[2] * f.d2[1];
    const double cy = f.d1[2] * f.d2[0] - f.d1[0] * f.d2[2];
    const double cz = f.d1[0] * f.d2[1] - f.d1[1] * f.d2[0];
    CHECK(std::abs(cx - q[0] / set.qnorm(j)) <= 1e-13);
    CHECK(std::abs(cy - q[1] / set.qnorm(j)) <= 1e-13);
    CHECK(std::abs(cz - q[2] / set.qnorm(j)) <= 1e-13);
  }
}

TEST_CASE("frames of opposite wavevectors pair up exactly") {
  IndexSet set = build_index_set(prom0(), 4);
  for (std::int64_t j = 0; j < set.size(); ++j) {
    std::vector<int> mk(set.k(j).begin(), set.k(j).end());
    for (int& v : mk) v = -v;
    auto mirror = qpm::linear_index(set, mk);
    if (!mirror) continue;  // unpaired boundary mode
    PolarizationFrame f = polarization_frame(set.q(j));
    PolarizationFrame g = polarization_frame(set.q(*mirror));
    for (int c = 0; c < 3; ++c) {
      CHECK(g.d1[c] == -f.d1[c]);
      CHECK(g.d2[c] == f.d2[c]);
    }
  }
}

TEST_CASE("frame tables mirror the per-mode frames") {
  IndexSet set = build_index_set(prom(), 6);
  FrameTables t = assemble_frame_tables(set);
  REQUIRE(t.size == set.size());
  for (std::int64_t j : {std::int64_t(0), set.size() / 2, set.size() - 1}) {
    PolarizationFrame f = polarization_frame(set.q(j));
    for (int c = 0; c < 3; ++c) {
      CHECK(t.r[3 * j + c] == f.d1[c]);
      CHECK(t.s[3 * j + c] == f.d2[c]);
    }
    CHECK(t.t_abs[j] == set.qnorm(j));
  }

  std::vector<int> k{-2, 0, 0, 1, 0, 0};
  auto pos = qpm::linear_index(set, k);
  REQUIRE(pos.has_value());
  CHECK(t.t_abs[*pos] == doctest::Approx(kSqrt5 - 2.0).epsilon(1e-12));
}

TEST_CASE("per-mode curl action on a single mode") {
  FrameTables t{1, {0, 0, 1}, {0, -1, 0}, {2.0}};
  DivFreeCoeffs b{{Complex(1.0, 0.0), Complex(0.0, 0.0)}};
  DivFreeCoeffs c = curl_coeff_apply(t, b);
  CHECK(c.values[0] == Complex(0.0, 0.0));
  CHECK(c.values[1] == Complex(0.0, 2.0));

  // twice gives |q|^2 times the input
  DivFreeCoeffs cc = curl_coeff_apply(t, c);
  CHECK(cc.values[0] == Complex(4.0, 0.0));
  CHECK(cc.values[1] == Complex(0.0, 0.0));
}

TEST_CASE("curl of a plane wave matches the symbolic cross product") {
  // field d1 e^{i z1} at q = (1,0,0): curl = i q x d1 = i d2
  FrameTables t{1, {0, 0, 1}, {0, -1, 0}, {1.0}};
  DivFreeCoeffs b{{Complex(1.0, 0.0), Complex(0.0, 0.0)}};
  DivFreeCoeffs c = curl_coeff_apply(t, b);
  CHECK(c.values[0] == Complex(0.0, 0.0));
  CHECK(c.values[1] == Complex(0.0, 1.0));
}

TEST_CASE("curl is Hermitian and squares to |q|^2") {
  IndexSet set = build_index_set(prom0(), 4);
  FrameTables t = assemble_frame_tables(set);
  const std::size_t len = static_cast<std::size_t>(set.dof());
  DivFreeCoeffs b = random_coeffs(len, 11);
  DivFreeCoeffs c = random_coeffs(len, 12);

  DivFreeCoeffs Cb = curl_coeff_apply(t, b);
  DivFreeCoeffs Cc = curl_coeff_apply(t, c);
  double qmax = 0.0;
  for (std::int64_t j = 0; j < set.size(); ++j) qmax = std::max(qmax, set.qnorm(j));
  const double scale =
      std::sqrt(std::abs(dot(b.values, b.values)) * std::abs(dot(c.values, c.values))) *
      qmax;
  CHECK(std::abs(dot(Cb.values, c.values) - dot(b.values, Cc.values)) <= 1e-12 * scale);

  DivFreeCoeffs CCb = curl_coeff_apply(t, Cb);
  for (std::int64_t j = 0; j < set.size(); ++j) {
    const double q2 = set.qnorm(j) * set.qnorm(j);
    const std::size_t L = static_cast<std::size_t>(set.size());
    CHECK(std::abs(CCb.values[j] - q2 * b.values[j]) <= 1e-13 * q2 * std::abs(b.values[j]) + 1e-15);
    CHECK(std::abs(CCb.values[L + j] - q2 * b.values[L + j]) <=
          1e-13 * q2 * std::abs(b.values[L + j]) + 1e-15);
  }
}

TEST_CASE("expansion into vector coefficients and back") {
  FrameTables t{1, {0, 0, 1}, {0, -1, 0}, {1.0}};
  DivFreeCoeffs b{{Complex(1.0, 0.0), Complex(0.0, 0.0)}};
  VectorModeCoeffs V = divfree_to_vector(t, b);
  REQUIRE(V.values.size() == 3);
  CHECK(V.values[0] == Complex(0.0, 0.0));
  CHECK(V.values[1] == Complex(0.0, 0.0));
  CHECK(V.values[2] == Complex(1.0, 0.0));

  // a row equal to d1 projects to (1, 0)
  VectorModeCoeffs d1row{{Complex(0.0, 0.0), Complex(0.0, 0.0), Complex(1.0, 0.0)}};
  DivFreeCoeffs back = vector_to_divfree(t, d1row);
  CHECK(back.values[0] == Complex(1.0, 0.0));
  CHECK(back.values[1] == Complex(0.0, 0.0));

  // a pure-gradient row (along q) projects to zero
  VectorModeCoeffs qrow{{Complex(1.0, 0.0), Complex(0.0, 0.0), Complex(0.0, 0.0)}};
  DivFreeCoeffs zero = vector_to_divfree(t, qrow);
  CHECK(zero.values[0] == Complex(0.0, 0.0));
  CHECK(zero.values[1] == Complex(0.0, 0.0));

  DivFreeCoeffs none{{Complex(0.0, 0.0), Complex(0.0, 0.0)}};
  VectorModeCoeffs vz = divfree_to_vector(t, none);
  for (const Complex& v : vz.values) CHECK(v == Complex(0.0, 0.0));
}

TEST_CASE("expansion rows are orthogonal to their wavevectors") {
  IndexSet set = build_index_set(prom(), 4);
  FrameTables t = assemble_frame_tables(set);
  DivFreeCoeffs b = random_coeffs(static_cast<std::size_t>(set.dof()), 21);
  VectorModeCoeffs V = divfree_to_vector(t, b);
  for (std::int64_t j = 0; j < set.size(); ++j) {
    Complex s = 0.0;
    for (int c = 0; c < 3; ++c) s += V.values[3 * j + c] * set.q(j)[c];
    CHECK(std::abs(s) <= 1e-13 * set.qnorm(j) * 10.0);
  }
}

TEST_CASE("projection round trip and idempotency") {
  IndexSet set = build_index_set(prom0(), 4);
  FrameTables t = assemble_frame_tables(set);
  const std::size_t len = static_cast<std::size_t>(set.dof());

  DivFreeCoeffs b = random_coeffs(len, 31);
  DivFreeCoeffs rb = vector_to_divfree(t, divfree_to_vector(t, b));
  for (std::size_t i = 0; i < len; ++i)
    CHECK(std::abs(rb.values[i] - b.values[i]) <= 1e-13 * (1.0 + std::abs(b.values[i])));

  // reverse composition is an orthogonal projector, idempotent on vector rows
  VectorModeCoeffs V;
  V.values.resize(3 * static_cast<std::size_t>(set.size()));
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Complex& v : V.values) v = Complex(u(rng), u(rng));
  VectorModeCoeffs P1 = divfree_to_vector(t, vector_to_divfree(t, V));
  VectorModeCoeffs P2 = divfree_to_vector(t, vector_to_divfree(t, P1));
  for (std::size_t i = 0; i < V.values.size(); ++i)
    CHECK(std::abs(P2.values[i] - P1.values[i]) <= 1e-13 * (1.0 + std::abs(P1.values[i])));
}

TEST_CASE("length mismatches are rejected") {
  IndexSet set = build_index_set(prom0(), 4);
  FrameTables t = assemble_frame_tables(set);
  DivFreeCoeffs bad{{Complex(1.0, 0.0)}};
  CHECK_THROWS_AS(curl_coeff_apply(t, bad), std::invalid_argument);
  CHECK_THROWS_AS(divfree_to_vector(t, bad), std::invalid_argument);
  VectorModeCoeffs badv{{Complex(1.0, 0.0)}};
  CHECK_THROWS_AS(vector_to_divfree(t, badv), std::invalid_argument);
}

TEST_CASE("conjugate-pair defect detects broken real-field symmetry") {
  IndexSet set = build_index_set(prom0(), 4);
  const std::size_t L = static_cast<std::size_t>(set.size());
  DivFreeCoeffs b;
  b.values.assign(2 * L, Complex(0.0, 0.0));

  // pick one paired mode and populate it per the convention
  std::int64_t j = -1, jm = -1;
  for (std::int64_t cand = 0; cand < set.size(); ++cand) {
    std::vector<int> mk(set.k(cand).begin(), set.k(cand).end());
    for (int& v : mk) v = -v;
    auto mirror = qpm::linear_index(set, mk);
    if (mirror && *mirror != cand) {
      j = cand;
      jm = *mirror;
      break;
    }
  }
  REQUIRE(j >= 0);
  const Complex c1(0.3, -0.7), c2(-0.2, 0.4);
  b.values[static_cast<std::size_t>(j)] = c1;
  b.values[static_cast<std::size_t>(jm)] = -std::conj(c1);
  b.values[L + static_cast<std::size_t>(j)] = c2;
  b.values[L + static_cast<std::size_t>(jm)] = std::conj(c2);
  CHECK(qpm::conjugate_pair_defect(set, b) <= 1e-15);

  b.values[static_cast<std::size_t>(jm)] += Complex(0.5, 0.0);
  CHECK(qpm::conjugate_pair_defect(set, b) == doctest::Approx(0.5).epsilon(1e-12));
}
