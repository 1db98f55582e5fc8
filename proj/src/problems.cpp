#include "qpm/problems.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qpm/permittivity.hpp"
#include "qpm/transforms.hpp"

namespace qpm {

namespace {

// Curl coefficients of the sampled w triple on the set's own grid: FFT the
// samples, keep the tracked modes, apply i q x per mode, project onto the
// polarization pair (lossless, since i q x w is orthogonal to q already).
DivFreeCoeffs curl_of_sampled(const std::array<Expression, 3>& w, const IndexSet& set) {
  if (set.dim() != 3)
    throw std::invalid_argument("manufactured sources require a 3-row projection matrix");
  const int n = set.n();
  const int N = set.N();
  const std::size_t L = static_cast<std::size_t>(set.size());

  GridSpec gs = make_grid_spec(n, N);
  FourierTransformer fft(gs);
  const auto map = build_mode_map(set, N);
  std::vector<Complex> box(static_cast<std::size_t>(gs.total_points));

  VectorModeCoeffs what;
  what.values.resize(L * 3);
  for (int c = 0; c < 3; ++c) {
    const std::vector<double> samples = sample_values(w[static_cast<std::size_t>(c)], n, N);
    for (std::size_t i = 0; i < box.size(); ++i) box[i] = samples[i];
    fft.forward(box, box);
    for (std::size_t j = 0; j < L; ++j)
      what.values[j * 3 + c] = box[static_cast<std::size_t>(map[j])];
  }

  VectorModeCoeffs curled;
  curled.values.resize(L * 3);
  const Complex iu(0.0, 1.0);
  for (std::size_t j = 0; j < L; ++j) {
    auto q = set.q(j);
    const Complex w1 = what.values[j * 3 + 0];
    const Complex w2 = what.values[j * 3 + 1];
    const Complex w3 = what.values[j * 3 + 2];
    curled.values[j * 3 + 0] = iu * (q[1] * w3 - q[2] * w2);
    curled.values[j * 3 + 1] = iu * (q[2] * w1 - q[0] * w3);
    curled.values[j * 3 + 2] = iu * (q[0] * w2 - q[1] * w1);
  }

  const FrameTables tables = assemble_frame_tables(set);
  return vector_to_divfree(tables, curled);
}

}  // namespace

ManufacturedRhs manufactured_rhs(const std::array<Expression, 3>& w,
                                 const Expression& epsilon, double kappa,
                                 const IndexSet& set, int oversample) {
  if (oversample < 1) throw std::invalid_argument("oversample factor must be >= 1");
  ManufacturedRhs out;
  out.u_exact = curl_of_sampled(w, set);
  PermittivityField eps = sample_on_grid(epsilon, set.n(), set.N() * oversample);
  OperatorPlan plan(set, std::move(eps), kappa);
  out.g = plan.apply_source(out.u_exact);
  return out;
}

ManufacturedRhs manufactured_rhs_analytic(const std::array<Expression, 3>& w,
                                          const Expression& epsilon, double kappa,
                                          const IndexSet& set, int N_ref) {
  if (N_ref < set.N())
    throw std::invalid_argument("reference resolution must be at least the working N");
  ManufacturedRhs out;
  out.u_exact = curl_of_sampled(w, set);

  const IndexSet ref_set = build_index_set(set.projection(), N_ref);
  const DivFreeCoeffs u_ref = curl_of_sampled(w, ref_set);
  PermittivityField eps = sample_on_grid(epsilon, set.n(), N_ref);
  OperatorPlan plan(ref_set, std::move(eps), kappa);
  const DivFreeCoeffs g_ref = plan.apply_source(u_ref);

  const std::size_t L = static_cast<std::size_t>(set.size());
  const std::size_t Lr = static_cast<std::size_t>(ref_set.size());
  out.g.values.assign(2 * L, Complex(0.0));
  std::vector<int> k(static_cast<std::size_t>(set.n()));
  for (std::size_t j = 0; j < L; ++j) {
    auto kj = set.k(j);
    std::copy(kj.begin(), kj.end(), k.begin());
    const auto jr = linear_index(ref_set, k);
    if (!jr) continue;  // cannot happen while N_ref >= N
    out.g.values[j] = g_ref.values[static_cast<std::size_t>(*jr)];
    out.g.values[L + j] = g_ref.values[Lr + static_cast<std::size_t>(*jr)];
  }
  return out;
}

SourceSolution solve_source(const SourceProblem& prob) {
  if (prob.kappa <= 0.0)
    throw std::invalid_argument("source problems require kappa > 0");
  if (prob.oversample < 1)
    throw std::invalid_argument("oversample factor must be >= 1");
  if (!prob.w && !prob.rhs)
    throw std::invalid_argument("source problem needs either w expressions or explicit rhs");

  IndexSet set = build_index_set(prob.P, prob.N);
  PermittivityField eps =
      sample_on_grid(prob.epsilon, set.n(), set.N() * prob.oversample);
  OperatorPlan plan(set, std::move(eps), prob.kappa);

  SourceSolution sol{std::move(set), {}, {}, std::nullopt, {}};
  if (prob.w) {
    sol.u_exact = curl_of_sampled(*prob.w, sol.set);
    sol.g = plan.apply_source(*sol.u_exact);
  } else {
    if (prob.rhs->values.size() != static_cast<std::size_t>(plan.dof()))
      throw std::invalid_argument("explicit rhs length does not match the DOF");
    sol.g = *prob.rhs;
  }

  LinearOp apply = [&plan](std::span<const Complex> in, std::span<Complex> out) {
    plan.apply_source(in, out);
  };
  GmresResult r = gmres(apply, sol.g.values, prob.gmres);
  sol.stats = r.stats;
  if (!r.stats.converged)
    throw SolveError("source solve did not converge: relative residual " +
                     std::to_string(r.stats.final_residual) + " after " +
                     std::to_string(r.stats.iterations) + " iterations");
  sol.u.values = std::move(r.x);
  return sol;
}

EigenSolution solve_eigen(const EigenProblem& prob) {
  if (prob.M <= 0.0) throw std::invalid_argument("reduced bound M must be positive");
  if (prob.oversample < 1)
    throw std::invalid_argument("oversample factor must be >= 1");

  IndexSet set = build_reduced_index_set(prob.P, prob.N, prob.M);
  if (set.size() == 0)
    throw std::invalid_argument("reduced index set is empty; increase M");
  PermittivityField eps =
      sample_on_grid(prob.epsilon, set.n(), set.N() * prob.oversample);
  OperatorPlan plan(set, std::move(eps), 0.0);

  const std::int64_t dof = plan.dof();
  const std::size_t n = static_cast<std::size_t>(dof);
  const std::size_t L = static_cast<std::size_t>(plan.set().size());

  // |q| weights: H_eig = diag(|q|^2) Mult is similar to the Hermitian
  // A = diag(|q|) Mult diag(|q|), which is what we iterate on.
  std::vector<double> dh(n);
  for (std::size_t j = 0; j < L; ++j) {
    dh[j] = plan.tables().t_abs[j];
    dh[L + j] = plan.tables().t_abs[j];
  }

  const double sigma = prob.solver.sigma;
  LinearOp apply_A = [&plan, &dh, n](std::span<const Complex> in, std::span<Complex> out) {
    std::vector<Complex> tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = dh[i] * in[i];
    plan.apply_multiplier(tmp, out);
    for (std::size_t i = 0; i < n; ++i) out[i] *= dh[i];
  };
  // (A - sigma I)^{-1} via the weight-stripped inner system
  // (Mult - sigma diag(|q|^-2)) u = diag(|q|^-1) v, whose conditioning does
  // not involve the |q| spread at sigma = 0.
  LinearOp apply_B = [&plan, &dh, sigma, n](std::span<const Complex> in,
                                            std::span<Complex> out) {
    plan.apply_multiplier(in, out);
    if (sigma != 0.0)
      for (std::size_t i = 0; i < n; ++i) out[i] -= sigma / (dh[i] * dh[i]) * in[i];
  };
  GmresConfig inner = prob.inner;
  std::int64_t inner_iterations = 0;
  LinearOp apply_W = [&apply_B, &inner, &dh, n, &inner_iterations](
                         std::span<const Complex> in, std::span<Complex> out) {
    std::vector<Complex> rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = in[i] / dh[i];
    GmresResult r = gmres(apply_B, rhs, inner);
    inner_iterations += r.stats.iterations;
    if (!r.stats.converged)
      throw SolveError("shift-invert inner solve stalled at relative residual " +
                       std::to_string(r.stats.final_residual));
    for (std::size_t i = 0; i < n; ++i) out[i] = r.x[i] / dh[i];
  };

  EigenSolverConfig cfg = prob.solver;
  cfg.mode = EigenMode::ShiftInvert;
  cfg.n_eigenvalues = static_cast<int>(
      std::min<std::int64_t>(cfg.n_eigenvalues, dof));
  cfg.krylov_dim = static_cast<int>(std::min<std::int64_t>(
      std::max(cfg.krylov_dim, cfg.n_eigenvalues), dof));

  EigenResult res = arnoldi_eigs(apply_W, dof, cfg);

  // Rayleigh-Ritz polish on the locked subspace, which also yields residuals
  // of the actual eigenvalue operator: H_eig (diag(|q|) y) = diag(|q|) A y.
  const std::size_t ne = res.eigenvectors.size();
  if (ne > 0) {
    std::vector<std::vector<Complex>> AY(ne);
    for (std::size_t t = 0; t < ne; ++t) {
      AY[t].resize(n);
      apply_A(res.eigenvectors[t], AY[t]);
      ++res.iterations;
    }
    Eigen::MatrixXcd G(ne, ne), S(ne, ne);
    for (std::size_t a = 0; a < ne; ++a)
      for (std::size_t b = 0; b < ne; ++b) {
        Complex g = 0.0, s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          g += std::conj(res.eigenvectors[a][i]) * AY[b][i];
          s += std::conj(res.eigenvectors[a][i]) * res.eigenvectors[b][i];
        }
        G(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = g;
        S(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = s;
      }
    G = ((G + G.adjoint()) / 2.0).eval();
    S = ((S + S.adjoint()) / 2.0).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(G, S);
    if (ges.info() != Eigen::Success)
      throw SolveError("subspace polish failed");

    std::vector<double> values(ne);
    std::vector<double> residuals(ne);
    std::vector<std::vector<Complex>> vectors(ne);
    std::vector<Complex> yv(n), hv(n);
    for (std::size_t t = 0; t < ne; ++t) {
      const double lambda = ges.eigenvalues()(static_cast<Eigen::Index>(t));
      std::fill(yv.begin(), yv.end(), Complex(0.0));
      std::fill(hv.begin(), hv.end(), Complex(0.0));
      for (std::size_t a = 0; a < ne; ++a) {
        const Complex u = ges.eigenvectors()(static_cast<Eigen::Index>(a),
                                             static_cast<Eigen::Index>(t));
        for (std::size_t i = 0; i < n; ++i) {
          yv[i] += u * res.eigenvectors[a][i];
          hv[i] += u * AY[a][i];
        }
      }
      // back to eigenvalue-operator coordinates v = diag(|q|) y
      double vnorm2 = 0.0, rnorm2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const Complex v = dh[i] * yv[i];
        const Complex r = dh[i] * hv[i] - lambda * v;
        vnorm2 += std::norm(v);
        rnorm2 += std::norm(r);
        yv[i] = v;
      }
      const double vnorm = std::sqrt(vnorm2);
      values[t] = lambda;
      residuals[t] = std::sqrt(rnorm2) / vnorm;
      vectors[t].resize(n);
      for (std::size_t i = 0; i < n; ++i) vectors[t][i] = yv[i] / vnorm;
    }
    res.eigenvalues = std::move(values);
    res.residual_norms = std::move(residuals);
    res.eigenvectors = std::move(vectors);
  }
  res.iterations += inner_iterations;

  return EigenSolution{std::move(set), std::move(res)};
}

FieldEvaluator::FieldEvaluator(const IndexSet& set, const DivFreeCoeffs& coeffs)
    : set_(set) {
  const FrameTables tables = assemble_frame_tables(set);
  W_ = divfree_to_vector(tables, coeffs).values;
  axis_phase_.resize(static_cast<std::size_t>(set.n()) * set.N());
  suffix_.resize(static_cast<std::size_t>(set.n()) + 1);
  prev_k_.resize(static_cast<std::size_t>(set.n()));
}

std::array<Complex, 3> FieldEvaluator::at(std::span<const double> z) {
  const int n = set_.n();
  const int N = set_.N();
  const int half = N / 2;
  const ProjectionMatrix& P = set_.projection();
  if (static_cast<int>(z.size()) != P.rows)
    throw std::invalid_argument("evaluation point dimension mismatch");

  for (int i = 0; i < n; ++i) {
    double y = 0.0;
    for (int r = 0; r < P.rows; ++r) y += P(r, i) * z[static_cast<std::size_t>(r)];
    for (int v = -half; v < half; ++v)
      axis_phase_[static_cast<std::size_t>(i) * N + (v + half)] =
          std::polar(1.0, v * y);
  }
  std::fill(prev_k_.begin(), prev_k_.end(), std::numeric_limits<int>::min());
  suffix_[static_cast<std::size_t>(n)] = Complex(1.0);

  std::array<Complex, 3> acc{Complex(0.0), Complex(0.0), Complex(0.0)};
  const std::int64_t L = set_.size();
  for (std::int64_t j = 0; j < L; ++j) {
    auto k = set_.k(j);
    int t = -1;
    for (int a = n - 1; a >= 0; --a)
      if (k[static_cast<std::size_t>(a)] != prev_k_[static_cast<std::size_t>(a)]) {
        t = a;
        break;
      }
    for (int a = t; a >= 0; --a) {
      const int ka = k[static_cast<std::size_t>(a)];
      suffix_[static_cast<std::size_t>(a)] =
          axis_phase_[static_cast<std::size_t>(a) * N + (ka + half)] *
          suffix_[static_cast<std::size_t>(a) + 1];
      prev_k_[static_cast<std::size_t>(a)] = ka;
    }
    const Complex phase = suffix_[0];
    const std::size_t js = static_cast<std::size_t>(j) * 3;
    acc[0] += W_[js + 0] * phase;
    acc[1] += W_[js + 1] * phase;
    acc[2] += W_[js + 2] * phase;
  }
  return acc;
}

std::vector<std::array<Complex, 3>> evaluate_field(
    const IndexSet& set, const DivFreeCoeffs& coeffs,
    std::span<const std::array<double, 3>> points) {
  FieldEvaluator eval(set, coeffs);
  std::vector<std::array<Complex, 3>> out;
  out.reserve(points.size());
  for (const auto& z : points) out.push_back(eval.at(z));
  return out;
}

ErrorReport error_norms(const FieldFn& numeric, const FieldFn& reference,
                        double box_lo, double box_hi, std::int64_t n_samples,
                        std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("need at least one sample point");
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  ErrorReport rep;
  rep.n_samples = n_samples;
  rep.box = {box_lo, box_hi};
  double sum_sq = 0.0;
  for (std::int64_t s = 0; s < n_samples; ++s) {
    std::array<double, 3> z;
    for (double& c : z) c = box_lo + (box_hi - box_lo) * unit();
    const auto a = numeric(z);
    const auto b = reference(z);
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) d2 += std::norm(a[static_cast<std::size_t>(c)] -
                                                b[static_cast<std::size_t>(c)]);
    sum_sq += d2;
    rep.linf = std::max(rep.linf, std::sqrt(d2));
  }
  rep.l2 = std::sqrt(sum_sq / static_cast<double>(n_samples));
  return rep;
}

std::vector<DecayBin> coefficient_decay_profile(const IndexSet& set,
                                                const DivFreeCoeffs& coeffs,
                                                int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("need at least one bin");
  if (coeffs.values.size() != static_cast<std::size_t>(set.dof()))
    throw std::invalid_argument("coefficient length does not match set DOF");
  const std::size_t L = static_cast<std::size_t>(set.size());
  double qmax = 0.0;
  for (std::int64_t j = 0; j < set.size(); ++j) qmax = std::max(qmax, set.qnorm(j));

  std::vector<DecayBin> bins(static_cast<std::size_t>(n_bins));
  const double width = qmax / n_bins;
  for (int b = 0; b < n_bins; ++b)
    bins[static_cast<std::size_t>(b)].q_center = (b + 0.5) * width;
  for (std::size_t j = 0; j < L; ++j) {
    int b = static_cast<int>(set.qnorm(static_cast<std::int64_t>(j)) / qmax * n_bins);
    b = std::min(b, n_bins - 1);
    auto& bin = bins[static_cast<std::size_t>(b)];
    bin.max_coeff = std::max(
        {bin.max_coeff, std::abs(coeffs.values[j]), std::abs(coeffs.values[L + j])});
    ++bin.count;
  }
  return bins;
}

DivFreeCoeffs embed_divfree(const IndexSet& src, const DivFreeCoeffs& coeffs,
                            const IndexSet& dst) {
  if (src.n() != dst.n() || src.N() != dst.N())
    throw std::invalid_argument("source and destination sets do not match");
  if (coeffs.values.size() != static_cast<std::size_t>(src.dof()))
    throw std::invalid_argument("coefficient length does not match source set");
  const std::size_t Ls = static_cast<std::size_t>(src.size());
  const std::size_t Ld = static_cast<std::size_t>(dst.size());
  DivFreeCoeffs out;
  out.values.assign(2 * Ld, Complex(0.0));
  std::vector<int> k(static_cast<std::size_t>(src.n()));
  for (std::int64_t j = 0; j < dst.size(); ++j) {
    auto kj = dst.k(j);
    std::copy(kj.begin(), kj.end(), k.begin());
    const auto js = linear_index(src, k);
    if (!js) continue;
    out.values[static_cast<std::size_t>(j)] =
        coeffs.values[static_cast<std::size_t>(*js)];
    out.values[Ld + static_cast<std::size_t>(j)] =
        coeffs.values[Ls + static_cast<std::size_t>(*js)];
  }
  return out;
}

void normalize_phase(DivFreeCoeffs& coeffs) {
  double best = 0.0;
  std::size_t best_idx = coeffs.values.size();
  for (std::size_t i = 0; i < coeffs.values.size(); ++i) {
    const double m = std::abs(coeffs.values[i]);
    if (m > best) {
      best = m;
      best_idx = i;
    }
  }
  if (best == 0.0) return;
  const Complex factor = std::conj(coeffs.values[best_idx]) / best;
  for (Complex& v : coeffs.values) v *= factor;
}

}  // namespace qpm
