#include "qpm/solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>

namespace qpm {

namespace {

Complex dot(std::span<const Complex> a, std::span<const Complex> b) {
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double nrm2(std::span<const Complex> a) {
  double s = 0.0;
  for (const Complex& v : a) s += std::norm(v);
  return std::sqrt(s);
}

void axpy(Complex alpha, std::span<const Complex> x, std::span<Complex> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// uniform in [-0.5, 0.5) built from the top 53 bits of the generator stream,
// so the draw sequence is reproducible across platforms
double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
}

}  // namespace

GmresResult gmres(const LinearOp& apply, std::span<const Complex> b,
                  const GmresConfig& cfg) {
  if (cfg.rel_tolerance <= 0.0)
    throw std::invalid_argument("gmres tolerance must be positive");
  if (cfg.restart < 1) throw std::invalid_argument("gmres restart must be at least 1");
  if (cfg.max_iterations < 1)
    throw std::invalid_argument("gmres iteration budget must be at least 1");

  const std::size_t n = b.size();
  GmresResult res;
  res.x.assign(n, Complex(0.0));
  GmresStats& st = res.stats;

  const double bnorm = nrm2(b);
  if (bnorm == 0.0) {
    st.converged = true;
    return res;
  }

  const int m = cfg.restart;
  std::vector<std::vector<Complex>> V;
  std::vector<std::vector<Complex>> Hc(static_cast<std::size_t>(m));
  std::vector<double> cs(static_cast<std::size_t>(m), 0.0);
  std::vector<Complex> sn(static_cast<std::size_t>(m), 0.0);
  std::vector<Complex> g(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<Complex> r(n), w(n);

  bool first_cycle = true;
  while (st.iterations < cfg.max_iterations) {
    if (first_cycle) {
      std::copy(b.begin(), b.end(), r.begin());
      first_cycle = false;
    } else {
      apply(res.x, w);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - w[i];
    }
    const double beta = nrm2(r);
    st.final_residual = beta / bnorm;
    if (st.final_residual <= cfg.rel_tolerance) {
      st.converged = true;
      return res;
    }

    V.clear();
    V.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), Complex(0.0));
    g[0] = beta;

    int j = 0;
    bool broke_down = false;
    bool inner_converged = false;
    while (j < m && st.iterations < cfg.max_iterations) {
      apply(V[static_cast<std::size_t>(j)], w);
      ++st.iterations;
      const double wnorm0 = nrm2(w);

      auto& col = Hc[static_cast<std::size_t>(j)];
      col.assign(static_cast<std::size_t>(j) + 2, Complex(0.0));
      // modified Gram-Schmidt with one reorthogonalization pass
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          Complex h = dot(V[static_cast<std::size_t>(i)], w);
          col[static_cast<std::size_t>(i)] += h;
          axpy(-h, V[static_cast<std::size_t>(i)], w);
        }
      }
      const double hlast = nrm2(w);
      col[static_cast<std::size_t>(j) + 1] = hlast;
      broke_down = hlast <= 1e-14 * std::max(wnorm0, 1e-300);
      if (!broke_down) {
        V.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i) V.back()[i] = w[i] / hlast;
      }

      // previously computed Givens rotations, then a fresh one for this column
      for (int i = 0; i < j; ++i) {
        const Complex t = cs[static_cast<std::size_t>(i)] * col[static_cast<std::size_t>(i)] +
                          sn[static_cast<std::size_t>(i)] * col[static_cast<std::size_t>(i) + 1];
        col[static_cast<std::size_t>(i) + 1] =
            -std::conj(sn[static_cast<std::size_t>(i)]) * col[static_cast<std::size_t>(i)] +
            cs[static_cast<std::size_t>(i)] * col[static_cast<std::size_t>(i) + 1];
        col[static_cast<std::size_t>(i)] = t;
      }
      {
        const Complex a = col[static_cast<std::size_t>(j)];
        const double bb = hlast;  // untouched by the rotations above
        const double absa = std::abs(a);
        const double t = std::sqrt(absa * absa + bb * bb);
        std::size_t js = static_cast<std::size_t>(j);
        if (t == 0.0) {
          cs[js] = 1.0;
          sn[js] = 0.0;
        } else if (absa == 0.0) {
          cs[js] = 0.0;
          sn[js] = 1.0;
        } else {
          cs[js] = absa / t;
          sn[js] = (a / absa) * (bb / t);
        }
        col[js] = cs[js] * a + sn[js] * bb;
        col[js + 1] = 0.0;
        const Complex gj = g[js];
        g[js] = cs[js] * gj;
        g[js + 1] = -std::conj(sn[js]) * gj;
      }
      ++j;
      const double rel = std::abs(g[static_cast<std::size_t>(j)]) / bnorm;
      st.residual_history.push_back(rel);
      if (cfg.verbose)
        std::cerr << "gmres iteration=" << st.iterations << " residual=" << rel << "\n";
      if (broke_down || rel <= cfg.rel_tolerance) {
        inner_converged = rel <= cfg.rel_tolerance;
        break;
      }
    }

    // back substitution on the rotated triangular system of size j
    std::vector<Complex> y(static_cast<std::size_t>(j));
    for (int i = j - 1; i >= 0; --i) {
      Complex s = g[static_cast<std::size_t>(i)];
      for (int i2 = i + 1; i2 < j; ++i2)
        s -= Hc[static_cast<std::size_t>(i2)][static_cast<std::size_t>(i)] *
             y[static_cast<std::size_t>(i2)];
      const Complex diag = Hc[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(i)] = (diag == Complex(0.0)) ? Complex(0.0) : s / diag;
    }
    for (int i = 0; i < j; ++i)
      axpy(y[static_cast<std::size_t>(i)], V[static_cast<std::size_t>(i)], res.x);

    if (broke_down) {
      // invariant subspace: the iterate is exact up to roundoff
      st.converged = true;
      st.breakdown = true;
      st.final_residual = std::abs(g[static_cast<std::size_t>(j)]) / bnorm;
      return res;
    }
    if (!inner_converged && st.iterations >= cfg.max_iterations) break;
  }

  apply(res.x, w);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - w[i];
  st.final_residual = nrm2(r) / bnorm;
  st.converged = st.final_residual <= cfg.rel_tolerance;
  return res;
}

namespace {

struct LockedPair {
  double value = 0.0;     // mapped eigenvalue
  double pref = 0.0;      // |theta| of the iterated operator, the window key
  double residual = 0.0;  // scaled residual of the iterated operator
  std::vector<Complex> vec;
};

// Strict ordering for exactly tied eigenvalues: first differing coefficient,
// real part before imaginary part.
bool lex_less(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].real() != b[i].real()) return a[i].real() < b[i].real();
    if (a[i].imag() != b[i].imag()) return a[i].imag() < b[i].imag();
  }
  return false;
}

}  // namespace

EigenResult arnoldi_eigs(const LinearOp& apply, std::int64_t dof,
                         const EigenSolverConfig& cfg) {
  if (cfg.n_eigenvalues < 1)
    throw std::invalid_argument("need at least one requested eigenvalue");
  if (cfg.krylov_dim < cfg.n_eigenvalues || cfg.krylov_dim > dof)
    throw std::invalid_argument("need n_eigenvalues <= krylov_dim <= DOF");
  if (cfg.residual_tolerance <= 0.0)
    throw std::invalid_argument("residual tolerance must be positive");
  if (cfg.mode == EigenMode::ShiftInvert && cfg.sigma < 0.0)
    throw std::invalid_argument("shift must be nonnegative");

  const std::size_t n = static_cast<std::size_t>(dof);
  // Once the window is full, short probe cycles look for strictly better
  // pairs; a few quiet probes in a row mean the window has settled. A quiet
  // probe that still sees a nearly converged pair good enough to displace a
  // locked one does not settle anything: the probe depth doubles instead, up
  // to the configured Krylov budget, with a hard cap on fruitless probes so
  // a residual stuck just above the gate cannot spin forever.
  const int probe_cap = 32;
  const int quiet_limit = 2;
  const int fruitless_cap = 8;
  const double near_factor = 1e3;
  const double real_check = 1e-8;
  // A newcomer must clear the weakest locked pair by this relative margin
  // before it evicts, so round-off inside an exactly degenerate cluster
  // cannot churn the window.
  const double evict_margin = 1e-8;

  EigenResult out;
  std::mt19937_64 rng(cfg.seed);
  std::vector<LockedPair> locked;
  locked.reserve(static_cast<std::size_t>(cfg.n_eigenvalues));

  std::vector<Complex> w(n), y(n);
  std::vector<std::vector<Complex>> V;
  std::vector<std::vector<Complex>> Hc;

  auto project_locked = [&](std::span<Complex> v) {
    for (const LockedPair& p : locked) {
      const Complex c = dot(p.vec, v);
      axpy(-c, p.vec, v);
    }
  };

  int stagnant_cycles = 0;
  int quiet_probes = 0;
  int probe_dim = probe_cap;
  bool last_near = false;
  int cycle = 0;
  for (; cycle < cfg.max_restarts; ++cycle) {
    const bool probing = static_cast<int>(locked.size()) >= cfg.n_eigenvalues;
    if (probing && quiet_probes >= quiet_limit && !last_near) break;
    if (probing && quiet_probes >= fruitless_cap) break;
    std::int64_t mlim = std::min<std::int64_t>(
        static_cast<std::int64_t>(cfg.krylov_dim) - static_cast<std::int64_t>(locked.size()),
        dof - static_cast<std::int64_t>(locked.size()));
    if (probing) mlim = std::min<std::int64_t>(mlim, probe_dim);
    const int m = static_cast<int>(mlim);
    if (m < 1) break;

    // seeded random start, orthogonal to everything already locked
    double vnorm = 0.0;
    for (int attempt = 0; attempt < 5 && vnorm < 1e-8; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) y[i] = Complex(unit_double(rng), unit_double(rng));
      project_locked(y);
      project_locked(y);
      vnorm = nrm2(y);
    }
    if (vnorm < 1e-8) break;

    V.clear();
    V.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) V[0][i] = y[i] / vnorm;
    Hc.assign(static_cast<std::size_t>(m), {});

    int meff = 0;
    double beta = 0.0;
    for (int j = 0; j < m; ++j) {
      apply(V[static_cast<std::size_t>(j)], w);
      ++out.iterations;
      const double wnorm0 = nrm2(w);
      project_locked(w);
      auto& col = Hc[static_cast<std::size_t>(j)];
      col.assign(static_cast<std::size_t>(j) + 2, Complex(0.0));
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const Complex h = dot(V[static_cast<std::size_t>(i)], w);
          col[static_cast<std::size_t>(i)] += h;
          axpy(-h, V[static_cast<std::size_t>(i)], w);
        }
      }
      const double hlast = nrm2(w);
      col[static_cast<std::size_t>(j) + 1] = hlast;
      meff = j + 1;
      beta = hlast;
      if (hlast <= 1e-13 * std::max(wnorm0, 1e-300)) {
        beta = 0.0;  // exhausted an invariant subspace
        break;
      }
      if (j + 1 < m) {
        V.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i) V.back()[i] = w[i] / hlast;
      }
    }
    if (meff == 0) break;

    Eigen::MatrixXcd Hm = Eigen::MatrixXcd::Zero(meff, meff);
    for (int j = 0; j < meff; ++j)
      for (int i = 0; i <= std::min(j + 1, meff - 1); ++i)
        Hm(i, j) = Hc[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Hm);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("dense Ritz extraction failed");

    std::vector<int> order(static_cast<std::size_t>(meff));
    for (int t = 0; t < meff; ++t) order[static_cast<std::size_t>(t)] = t;
    const bool take_largest =
        cfg.mode == EigenMode::ShiftInvert || cfg.which == EigenWhich::LargestMagnitude;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double ma = std::abs(es.eigenvalues()(a));
      const double mb = std::abs(es.eigenvalues()(b));
      return take_largest ? ma > mb : ma < mb;
    });

    bool locked_any = false;
    bool evicted_any = false;
    bool near_evictor = false;
    double best_unconverged = -1.0;
    for (int t : order) {
      const Complex theta = es.eigenvalues()(t);
      const double pref = std::abs(theta);
      const double scale = std::max(1.0, pref);
      const double est = beta * std::abs(es.eigenvectors()(meff - 1, t));
      if (est > cfg.residual_tolerance * scale) {
        if (best_unconverged < 0.0 || est / scale < best_unconverged)
          best_unconverged = est / scale;
        if (static_cast<int>(locked.size()) >= cfg.n_eigenvalues &&
            est <= near_factor * cfg.residual_tolerance * scale) {
          double bar = locked.front().pref;
          for (const LockedPair& q : locked)
            bar = take_largest ? std::min(bar, q.pref) : std::max(bar, q.pref);
          const bool beats = take_largest ? pref > bar * (1.0 + evict_margin)
                                          : pref < bar * (1.0 - evict_margin);
          if (beats) near_evictor = true;
        }
        continue;
      }
      if (std::abs(theta.imag()) > real_check * std::max(1.0, std::abs(theta.real())))
        continue;
      if (cfg.mode == EigenMode::ShiftInvert && std::abs(theta.real()) < 1e-300)
        continue;

      // With a full window a candidate must displace the weakest locked pair,
      // and only a clear win counts; members of the boundary cluster tie and
      // leave the window alone.
      int worst = -1;
      if (static_cast<int>(locked.size()) >= cfg.n_eigenvalues) {
        worst = 0;
        for (std::size_t i = 1; i < locked.size(); ++i) {
          const bool i_worse = take_largest ? locked[i].pref < locked[static_cast<std::size_t>(worst)].pref
                                            : locked[i].pref > locked[static_cast<std::size_t>(worst)].pref;
          if (i_worse) worst = static_cast<int>(i);
        }
        const double bar = locked[static_cast<std::size_t>(worst)].pref;
        const bool better = take_largest ? pref > bar * (1.0 + evict_margin)
                                         : pref < bar * (1.0 - evict_margin);
        if (!better) continue;
      }

      std::fill(y.begin(), y.end(), Complex(0.0));
      for (int i = 0; i < meff; ++i)
        axpy(es.eigenvectors()(i, t), V[static_cast<std::size_t>(i)], y);
      project_locked(y);
      project_locked(y);
      const double ynorm = nrm2(y);
      // a candidate living almost entirely in the locked space duplicates an
      // already-locked direction of its cluster
      if (ynorm < 0.1) continue;
      for (std::size_t i = 0; i < n; ++i) y[i] /= ynorm;

      apply(y, w);
      ++out.iterations;
      axpy(-theta, y, w);
      const double res_true = nrm2(w) / scale;
      if (res_true > cfg.residual_tolerance) continue;

      LockedPair p;
      p.value = cfg.mode == EigenMode::ShiftInvert ? cfg.sigma + 1.0 / theta.real()
                                                   : theta.real();
      p.pref = pref;
      p.residual = res_true;
      p.vec = y;
      if (worst >= 0) {
        locked[static_cast<std::size_t>(worst)] = std::move(p);
        evicted_any = true;
      } else {
        locked.push_back(std::move(p));
        locked_any = true;
      }
    }

    if (cfg.verbose)
      std::cerr << "eigen cycle=" << cycle << " dim=" << meff << " locked="
                << locked.size() << "/" << cfg.n_eigenvalues
                << (evicted_any ? " evicted" : "")
                << (near_evictor ? " near" : "")
                << " best_unconverged=" << best_unconverged << "\n";
    if (probing) {
      const bool acted = locked_any || evicted_any;
      quiet_probes = acted ? 0 : quiet_probes + 1;
      if (!acted && near_evictor)
        probe_dim = std::min(probe_dim * 2, cfg.krylov_dim);
      last_near = near_evictor;
    } else {
      stagnant_cycles = (locked_any || evicted_any) ? 0 : stagnant_cycles + 1;
      if (stagnant_cycles >= 20) break;
    }
  }

  out.converged = static_cast<int>(locked.size()) >= cfg.n_eigenvalues;

  std::vector<std::size_t> order(locked.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (locked[a].value != locked[b].value) return locked[a].value < locked[b].value;
    return lex_less(locked[a].vec, locked[b].vec);
  });
  for (std::size_t i : order) {
    out.eigenvalues.push_back(locked[i].value);
    out.residual_norms.push_back(locked[i].residual);
    out.eigenvectors.push_back(std::move(locked[i].vec));
  }
  return out;
}

LinearOp shift_invert_apply(OperatorPlan& plan, double sigma, const GmresConfig& cfg) {
  LinearOp shifted = [&plan, sigma](std::span<const Complex> v, std::span<Complex> o) {
    plan.apply_eigen(v, o);
    if (sigma != 0.0)
      for (std::size_t i = 0; i < v.size(); ++i) o[i] -= sigma * v[i];
  };
  return [shifted, cfg](std::span<const Complex> v, std::span<Complex> o) {
    GmresResult r = gmres(shifted, v, cfg);
    if (!r.stats.converged)
      throw std::runtime_error(
          "shift-invert inner solve did not converge: relative residual " +
          std::to_string(r.stats.final_residual) + " after " +
          std::to_string(r.stats.iterations) + " iterations");
    std::copy(r.x.begin(), r.x.end(), o.begin());
  };
}

}  // namespace qpm
