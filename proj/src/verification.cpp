#include "qpm/verification.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <utility>

#include "qpm/operators.hpp"
#include "qpm/permittivity.hpp"
#include "qpm/problems.hpp"
#include "qpm/transforms.hpp"

namespace qpm {

bool TolerancePolicy::accepts(double expected, double actual) const {
  switch (kind) {
    case ToleranceKind::Exact:
      return expected == actual;
    case ToleranceKind::Absolute:
      return std::abs(actual - expected) <= tau;
    case ToleranceKind::Relative:
      return std::abs(actual - expected) <= tau * std::abs(expected);
    case ToleranceKind::OrderOfMagnitude: {
      if (expected == 0.0) return actual == 0.0;
      const double ratio = actual / expected;
      return ratio >= 0.1 && ratio <= 10.0;
    }
  }
  return false;
}

double TolerancePolicy::deviation(double expected, double actual) const {
  switch (kind) {
    case ToleranceKind::Exact:
    case ToleranceKind::Absolute:
      return std::abs(actual - expected);
    case ToleranceKind::Relative:
      return expected == 0.0 ? std::abs(actual)
                             : std::abs(actual - expected) / std::abs(expected);
    case ToleranceKind::OrderOfMagnitude:
      return expected == 0.0 ? std::abs(actual) : actual / expected;
  }
  return 0.0;
}

std::string TolerancePolicy::describe() const {
  std::ostringstream os;
  switch (kind) {
    case ToleranceKind::Exact:
      os << "exact";
      break;
    case ToleranceKind::Absolute:
      os << "abs<=" << tau;
      break;
    case ToleranceKind::Relative:
      os << "rel<=" << tau;
      break;
    case ToleranceKind::OrderOfMagnitude:
      os << "ratio in [0.1,10]";
      break;
  }
  return os.str();
}

namespace {

constexpr double kSqrt5 = 2.2360679774997896964091736687747;
constexpr double kSqrt2 = 1.4142135623730950488016887242097;

// icosahedral-symmetry projection [I3 | sqrt(5) I3]
ProjectionMatrix prom() {
  return {3, 6,
          {1, 0, 0, kSqrt5, 0,      0,       //
           0, 1, 0, 0,      kSqrt5, 0,       //
           0, 0, 1, 0,      0,      kSqrt5}};
}

// manufactured-source projection [I3 | sqrt(2) I3]
ProjectionMatrix prom0() {
  return {3, 6,
          {1, 0, 0, kSqrt2, 0,      0,       //
           0, 1, 0, 0,      kSqrt2, 0,       //
           0, 0, 1, 0,      0,      kSqrt2}};
}

// 2-D instance small enough for the dense oracle
ProjectionMatrix tiny_projection() { return {2, 2, {1, kSqrt2, 0, 1}}; }

const char* kEpsReduced =
    "1/(10+cos(x1)+cos(x2)+cos(x3)+cos(x4)+cos(x5)+cos(x6))";

const char* kW1 = "exp(sin(x1)*sin(x2)*sin(x3))";
const char* kW2 = "exp(sin(x4)*sin(x5)*sin(x6))";
const char* kW3 = "0";

// closed-form curl of (kW1, kW2, kW3) under prom0, in parent variables
const char* kU1 = "-sqrt(2)*exp(sin(x4)*sin(x5)*sin(x6))*sin(x4)*sin(x5)*cos(x6)";
const char* kU2 = "exp(sin(x1)*sin(x2)*sin(x3))*sin(x1)*sin(x2)*cos(x3)";
const char* kU3 =
    "sqrt(2)*exp(sin(x4)*sin(x5)*sin(x6))*cos(x4)*sin(x5)*sin(x6)"
    "-exp(sin(x1)*sin(x2)*sin(x3))*sin(x1)*cos(x2)*sin(x3)";

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
}

std::vector<Complex> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::vector<Complex> v(n);
  for (Complex& c : v) c = Complex(unit_double(rng), unit_double(rng));
  return v;
}

double nrm2(std::span<const Complex> a) {
  double s = 0.0;
  for (const Complex& v : a) s += std::norm(v);
  return std::sqrt(s);
}

Complex cdot(std::span<const Complex> a, std::span<const Complex> b) {
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

CheckRow row(std::string label, double expected, double actual) {
  return {std::move(label), expected, actual, std::nullopt};
}

CheckRow row(std::string label, double expected, double actual, TolerancePolicy p) {
  return {std::move(label), expected, actual, p};
}

CheckRow bool_row(std::string label, bool ok) {
  return {std::move(label), 1.0, ok ? 1.0 : 0.0, TolerancePolicy::exact()};
}

struct LogFit {
  double slope = 0.0;
  double misfit = 0.0;  // sqrt(1 - R^2) of log10(err) vs N
};

LogFit fit_log10(std::span<const double> xs, std::span<const double> errs) {
  const std::size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    ys[i] = std::log10(errs[i]);
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  LogFit fit;
  const double den = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / den;
  const double intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = intercept + fit.slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  const double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.misfit = std::sqrt(std::max(0.0, 1.0 - r2));
  return fit;
}

FieldFn analytic_field(const ProjectionMatrix& P, std::array<Expression, 3> comps) {
  return [P, comps](std::span<const double> z) {
    std::vector<double> y(static_cast<std::size_t>(P.cols), 0.0);
    for (int i = 0; i < P.cols; ++i) {
      double s = 0.0;
      for (int r = 0; r < P.rows; ++r) s += P(r, i) * z[static_cast<std::size_t>(r)];
      y[static_cast<std::size_t>(i)] = s;
    }
    std::array<Complex, 3> out;
    for (int c = 0; c < 3; ++c)
      out[static_cast<std::size_t>(c)] =
          Complex(comps[static_cast<std::size_t>(c)].evaluate(y), 0.0);
    return out;
  };
}

// Memoized eigenvalue runs for the variable-coefficient reduced-method
// fixtures; the decay fixture reuses the (N=8, M=6) run.
struct ReducedRunCache {
  std::map<std::pair<int, int>, EigenSolution> runs;

  const EigenSolution& get(int N, int M) {
    const auto key = std::make_pair(N, M);
    auto it = runs.find(key);
    if (it != runs.end()) return it->second;
    EigenProblem p;
    p.P = prom();
    p.N = N;
    p.M = static_cast<double>(M);
    p.epsilon = parse_expression(kEpsReduced, 6);
    p.solver.n_eigenvalues = 4;  // slack around the ground value
    // Deep single cycle: the perturbed ground cluster splits at the 1e-8
    // scale, and a shallower basis cannot push Ritz residuals under the
    // locking tolerance.
    p.solver.krylov_dim = 140;
    p.solver.residual_tolerance = 1e-9;
    p.solver.seed = 1234;
    return runs.emplace(key, solve_eigen(p)).first->second;
  }
};

GoldenFixture vacuum_spectrum_fixture() {
  GoldenFixture f;
  f.name = "vacuum-spectrum";
  f.config = "P=[I3|sqrt(5)I3], eps=1, N=8, M=6, n_eig=110, tol=1e-12, seed=1234";
  f.provenance =
      "published-table: eigenvalue ladder with IDs 1-106; closed-form: "
      "cluster values m*(9-4*sqrt(5)), m=1..6, exact multiplicities by "
      "lattice enumeration";
  f.policy = TolerancePolicy::relative(1e-6);
  f.run = []() {
    EigenProblem p;
    p.P = prom();
    p.N = 8;
    p.M = 6.0;
    p.epsilon = parse_expression("1", 6);
    // 110 requested: the six asserted clusters hold 106 values, and the
    // solver keeps the smallest converged pairs once the window is full,
    // so strays from deeper clusters get evicted as the ladder fills in.
    // The last four slots land in the next cluster up and stay put.
    p.solver.n_eigenvalues = 110;
    p.solver.krylov_dim = 186;
    p.solver.residual_tolerance = 1e-12;
    p.solver.seed = 1234;
    p.inner.rel_tolerance = 1e-12;
    const EigenSolution sol = solve_eigen(p);
    const auto& ev = sol.result.eigenvalues;

    std::vector<CheckRow> rows;
    rows.push_back(bool_row("at least 106 eigenvalues converged", ev.size() >= 106));
    if (ev.size() < 106) return rows;

    const double base = 9.0 - 4.0 * kSqrt5;
    const std::array<int, 6> mults{12, 24, 16, 6, 24, 24};
    std::size_t idx = 0;
    for (int c = 0; c < 6; ++c) {
      const double value = (c + 1) * base;
      for (int t = 0; t < mults[static_cast<std::size_t>(c)]; ++t, ++idx) {
        std::ostringstream label;
        label << "eigenvalue " << idx + 1 << " matches cluster " << c + 1;
        rows.push_back(row(label.str(), value, ev[idx]));
      }
    }
    for (int c = 0; c < 6; ++c) {
      const double value = (c + 1) * base;
      std::int64_t count = 0;
      for (double v : ev)
        if (std::abs(v - value) <= 1e-6 * value) ++count;
      std::ostringstream label;
      label << "multiplicity of cluster " << c + 1;
      rows.push_back(row(label.str(), mults[static_cast<std::size_t>(c)],
                         static_cast<double>(count), TolerancePolicy::exact()));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < 106; ++i)
      worst = std::max(worst, sol.result.residual_norms[i]);
    rows.push_back(row("largest residual over IDs 1-106", 0.0, worst,
                       TolerancePolicy::absolute(1e-9)));
    return rows;
  };
  return f;
}

GoldenFixture mode_count_fixture() {
  GoldenFixture f;
  f.name = "mode-count-table";
  f.config = "P=[I3|sqrt(5)I3], unreduced N=6..14, reduced (6,10) and (8,6)";
  f.provenance =
      "published-table: unreduced row and reduced entries; closed-form: "
      "2(N^6-1)";
  f.policy = TolerancePolicy::exact();
  f.run = []() {
    std::vector<CheckRow> rows;
    const std::array<std::pair<int, double>, 5> full{{{6, 93310.0},
                                                      {8, 524286.0},
                                                      {10, 1999998.0},
                                                      {12, 5971966.0},
                                                      {14, 15059070.0}}};
    for (const auto& [N, dof] : full) {
      std::ostringstream label;
      label << "unreduced count at N=" << N;
      rows.push_back(row(label.str(), dof, static_cast<double>(full_dof(6, N))));
    }
    const ProjectionMatrix P = prom();
    rows.push_back(row("reduced count at N=6, M=10", 93310.0,
                       static_cast<double>(reduced_dof_count(P, 6, 10.0))));
    rows.push_back(row("reduced count at N=8, M=6", 148174.0,
                       static_cast<double>(reduced_dof_count(P, 8, 6.0))));
    return rows;
  };
  return f;
}

GoldenFixture source_convergence_fixture() {
  GoldenFixture f;
  f.name = "source-convergence";
  f.config =
      "P=[I3|sqrt(2)I3], eps=1, kappa=100, manufactured w, N in {4,6,8,10}, "
      "4096 samples of [-10,10]^3, seed=12345";
  f.provenance =
      "closed-form: hand-derived curl of the manufactured source, "
      "finite-difference checked; property-level decay assertions";
  f.policy = TolerancePolicy::exact();
  f.run = []() {
    const ProjectionMatrix P = prom0();
    const std::array<Expression, 3> w{parse_expression(kW1, 6),
                                      parse_expression(kW2, 6),
                                      parse_expression(kW3, 6)};
    const FieldFn reference = analytic_field(
        P, {parse_expression(kU1, 6), parse_expression(kU2, 6),
            parse_expression(kU3, 6)});

    const std::array<int, 4> Ns{4, 6, 8, 10};
    std::vector<double> xs, l2s, linfs;
    for (int N : Ns) {
      SourceProblem sp;
      sp.P = P;
      sp.N = N;
      sp.kappa = 100.0;
      sp.epsilon = parse_expression("1", 6);
      sp.w = w;
      sp.gmres.rel_tolerance = 1e-11;
      const SourceSolution sol = solve_source(sp);
      FieldEvaluator eval(sol.set, sol.u);
      const FieldFn numeric = [&eval](std::span<const double> z) {
        return eval.at(z);
      };
      const ErrorReport rep = error_norms(numeric, reference, -10.0, 10.0, 4096, 12345);
      xs.push_back(static_cast<double>(N));
      l2s.push_back(rep.l2);
      linfs.push_back(rep.linf);
    }

    std::vector<CheckRow> rows;
    for (std::size_t i = 0; i + 1 < l2s.size(); ++i) {
      std::ostringstream a, b;
      a << "l2 error strictly decreases N=" << Ns[i] << "->" << Ns[i + 1];
      b << "linf error strictly decreases N=" << Ns[i] << "->" << Ns[i + 1];
      rows.push_back(bool_row(a.str(), l2s[i + 1] < l2s[i]));
      rows.push_back(bool_row(b.str(), linfs[i + 1] < linfs[i]));
    }
    const LogFit fl2 = fit_log10(xs, l2s);
    const LogFit fli = fit_log10(xs, linfs);
    rows.push_back(bool_row("l2 log-linear fit slope negative", fl2.slope < 0.0));
    rows.push_back(row("l2 log-linear fit misfit", 0.0, fl2.misfit,
                       TolerancePolicy::absolute(0.20)));
    rows.push_back(bool_row("linf log-linear fit slope negative", fli.slope < 0.0));
    rows.push_back(row("linf log-linear fit misfit", 0.0, fli.misfit,
                       TolerancePolicy::absolute(0.20)));
    return rows;
  };
  return f;
}

GoldenFixture reduced_plateau_fixture(std::shared_ptr<ReducedRunCache> cache) {
  GoldenFixture f;
  f.name = "reduced-plateau";
  f.config =
      "P=[I3|sqrt(5)I3], eps=1/(10+sum cos), sweeps M in {4,5,6} at N=8 and "
      "N in {6,8} at M=6, reference own (N=10, M=8) run, unreduced N=8 via "
      "M=13";
  f.provenance =
      "published-table: ground error magnitude at N=8; self-reference: own "
      "(N=10, M=8) run as the error baseline";
  f.policy = TolerancePolicy::exact();
  f.run = [cache]() {
    std::vector<CheckRow> rows;
    const std::array<std::pair<int, int>, 6> wanted{
        {{10, 8}, {8, 4}, {8, 5}, {8, 6}, {6, 6}, {8, 13}}};
    bool all_converged = true;
    for (const auto& [N, M] : wanted) {
      const EigenResult& r = cache->get(N, M).result;
      all_converged &= r.converged && !r.eigenvalues.empty();
    }
    rows.push_back(bool_row("every eigensolve converged", all_converged));
    if (!all_converged) return rows;

    const double ref = cache->get(10, 8).result.eigenvalues.at(0);
    const double e84 = std::abs(cache->get(8, 4).result.eigenvalues.at(0) - ref);
    const double e85 = std::abs(cache->get(8, 5).result.eigenvalues.at(0) - ref);
    const double e86 = std::abs(cache->get(8, 6).result.eigenvalues.at(0) - ref);
    const double e66 = std::abs(cache->get(6, 6).result.eigenvalues.at(0) - ref);
    const EigenSolution& full = cache->get(8, 13);
    const double efull = std::abs(full.result.eigenvalues.at(0) - ref);

    rows.push_back(row("bound M=13 covers the whole N=8 box",
                       static_cast<double>(full_dof(6, 8)),
                       static_cast<double>(full.set.dof())));
    rows.push_back(bool_row("ground error decreases M=4->5 at N=8", e85 < e84));
    rows.push_back(bool_row("ground error decreases M=5->6 at N=8", e86 < e85));
    rows.push_back(bool_row("ground error decreases N=6->8 at M=6", e86 < e66));
    rows.push_back(row("unreduced N=8 ground error magnitude", 6.58e-8, efull,
                       TolerancePolicy::order_of_magnitude()));
    return rows;
  };
  return f;
}

void frame_rows(std::vector<CheckRow>& rows) {
  const IndexSet set = build_index_set(prom(), 6);
  double defect = 0.0;
  double parity = 0.0;
  std::vector<int> mk(6);
  for (std::int64_t j = 0; j < set.size(); ++j) {
    const auto q = set.q(j);
    const PolarizationFrame fr = polarization_frame(q);
    const double qn = set.qnorm(j);
    double n1 = 0, n2 = 0, d12 = 0, d1q = 0, d2q = 0;
    for (int c = 0; c < 3; ++c) {
      n1 += fr.d1[static_cast<std::size_t>(c)] * fr.d1[static_cast<std::size_t>(c)];
      n2 += fr.d2[static_cast<std::size_t>(c)] * fr.d2[static_cast<std::size_t>(c)];
      d12 += fr.d1[static_cast<std::size_t>(c)] * fr.d2[static_cast<std::size_t>(c)];
      d1q += fr.d1[static_cast<std::size_t>(c)] * q[static_cast<std::size_t>(c)];
      d2q += fr.d2[static_cast<std::size_t>(c)] * q[static_cast<std::size_t>(c)];
    }
    const std::array<double, 3> cr{
        fr.d1[1] * fr.d2[2] - fr.d1[2] * fr.d2[1],
        fr.d1[2] * fr.d2[0] - fr.d1[0] * fr.d2[2],
        fr.d1[0] * fr.d2[1] - fr.d1[1] * fr.d2[0]};
    for (int c = 0; c < 3; ++c)
      defect = std::max(defect, std::abs(cr[static_cast<std::size_t>(c)] -
                                         q[static_cast<std::size_t>(c)] / qn));
    defect = std::max({defect, std::abs(std::sqrt(n1) - 1.0),
                       std::abs(std::sqrt(n2) - 1.0), std::abs(d12),
                       std::abs(d1q) / qn, std::abs(d2q) / qn});

    const auto kj = set.k(j);
    for (int c = 0; c < 6; ++c) mk[static_cast<std::size_t>(c)] = -kj[static_cast<std::size_t>(c)];
    if (const auto jm = linear_index(set, mk)) {
      const PolarizationFrame fm = polarization_frame(set.q(*jm));
      for (int c = 0; c < 3; ++c) {
        parity = std::max(parity, std::abs(fm.d1[static_cast<std::size_t>(c)] +
                                           fr.d1[static_cast<std::size_t>(c)]));
        parity = std::max(parity, std::abs(fm.d2[static_cast<std::size_t>(c)] -
                                           fr.d2[static_cast<std::size_t>(c)]));
      }
    }
  }
  rows.push_back(row("frame orthonormality and handedness defect", 0.0, defect,
                     TolerancePolicy::absolute(1e-13)));
  rows.push_back(row("frame parity defect under k -> -k", 0.0, parity,
                     TolerancePolicy::absolute(1e-13)));
}

void curl_rows(std::vector<CheckRow>& rows, std::mt19937_64& rng) {
  const IndexSet set = build_index_set(prom(), 6);
  const FrameTables tables = assemble_frame_tables(set);
  const std::size_t dof = static_cast<std::size_t>(set.dof());
  const DivFreeCoeffs x{random_vector(dof, rng)};
  const DivFreeCoeffs y{random_vector(dof, rng)};

  double qmax = 0.0;
  for (double t : tables.t_abs) qmax = std::max(qmax, t);

  const DivFreeCoeffs cy = curl_coeff_apply(tables, y);
  const DivFreeCoeffs cx = curl_coeff_apply(tables, x);
  const Complex lhs = cdot(x.values, cy.values);
  const Complex rhs = cdot(cx.values, y.values);
  const double herm = std::abs(lhs - rhs) /
                      (nrm2(x.values) * nrm2(y.values) * qmax);
  rows.push_back(row("curl matrix Hermiticity defect", 0.0, herm,
                     TolerancePolicy::absolute(1e-12)));

  const DivFreeCoeffs ccy = curl_coeff_apply(tables, cy);
  const std::size_t L = static_cast<std::size_t>(set.size());
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < L; ++j) {
    const double t2 = tables.t_abs[j] * tables.t_abs[j];
    num += std::norm(ccy.values[j] - t2 * y.values[j]);
    num += std::norm(ccy.values[L + j] - t2 * y.values[L + j]);
    den += std::norm(t2 * y.values[j]) + std::norm(t2 * y.values[L + j]);
  }
  rows.push_back(row("squared curl equals |q|^2 scaling", 0.0,
                     std::sqrt(num / den), TolerancePolicy::absolute(1e-12)));
}

void operator_rows(std::vector<CheckRow>& rows, std::mt19937_64& rng) {
  const IndexSet set = build_index_set(tiny_projection(), 4);
  const Expression eps = parse_expression("3+cos(x1)+0.5*sin(x2)", 2);
  const double kappa = 0.7;
  OperatorPlan plan(set, sample_on_grid(eps, 2, 4), kappa);
  const std::size_t dof = static_cast<std::size_t>(plan.dof());

  const std::vector<Complex> x = random_vector(dof, rng);
  const std::vector<Complex> y = random_vector(dof, rng);
  std::vector<Complex> hx(dof), hy(dof);
  plan.apply_source(x, hx);
  plan.apply_source(y, hy);
  const double herm = std::abs(cdot(x, hy) - cdot(hx, y)) / (nrm2(x) * nrm2(y));
  rows.push_back(row("source operator Hermiticity defect", 0.0, herm,
                     TolerancePolicy::absolute(1e-11)));

  double min_quotient = std::numeric_limits<double>::infinity();
  double imag_defect = 0.0;
  for (int t = 0; t < 5; ++t) {
    const std::vector<Complex> v = random_vector(dof, rng);
    std::vector<Complex> hv(dof);
    plan.apply_source(v, hv);
    const Complex q = cdot(v, hv);
    const double nn = nrm2(v);
    min_quotient = std::min(min_quotient, q.real() / (nn * nn));
    imag_defect = std::max(imag_defect, std::abs(q.imag()) / std::abs(q));
  }
  rows.push_back(bool_row("source operator quadratic form stays above kappa",
                          min_quotient >= kappa - 1e-9));
  rows.push_back(row("source operator quadratic form imaginary part", 0.0,
                     imag_defect, TolerancePolicy::absolute(1e-11)));

  // dense assemblies against the matrix-free applies, all three forms
  const struct {
    OracleForm form;
    const char* name;
    double kap;
  } forms[] = {{OracleForm::Source, "source", kappa},
               {OracleForm::Eigen, "eigen", 0.0},
               {OracleForm::Multiplier, "multiplier", 0.0}};
  for (const auto& fm : forms) {
    const std::vector<Complex> dense =
        dense_oracle(set, plan.permittivity(), fm.kap, fm.form);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::vector<Complex> b = random_vector(dof, rng);
      std::vector<Complex> fast(dof), slow(dof, Complex(0.0));
      if (fm.form == OracleForm::Source)
        plan.apply_source(b, fast);
      else if (fm.form == OracleForm::Eigen)
        plan.apply_eigen(b, fast);
      else
        plan.apply_multiplier(b, fast);
      for (std::size_t r = 0; r < dof; ++r) {
        Complex s = 0.0;
        for (std::size_t c = 0; c < dof; ++c) s += dense[r * dof + c] * b[c];
        slow[r] = s;
      }
      double num = 0.0;
      for (std::size_t i = 0; i < dof; ++i) num += std::norm(fast[i] - slow[i]);
      worst = std::max(worst, std::sqrt(num) / nrm2(fast));
    }
    std::ostringstream label;
    label << "dense " << fm.name << " oracle agreement";
    rows.push_back(row(label.str(), 0.0, worst, TolerancePolicy::absolute(1e-12)));
  }
}

void fft_rows(std::vector<CheckRow>& rows, std::mt19937_64& rng) {
  const struct {
    int n, N;
  } cases[] = {{2, 8}, {3, 6}};
  for (const auto& c : cases) {
    const GridSpec spec = make_grid_spec(c.n, c.N);
    const std::vector<Complex> f =
        random_vector(static_cast<std::size_t>(spec.total_points), rng);
    const std::vector<Complex> coeffs = forward_fft(spec, f);
    const std::vector<Complex> back = inverse_fft(spec, coeffs);
    double num = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) num += std::norm(back[i] - f[i]);
    std::ostringstream label;
    label << "fft round trip n=" << c.n << " N=" << c.N;
    rows.push_back(row(label.str(), 0.0, std::sqrt(num) / nrm2(f),
                       TolerancePolicy::absolute(1e-12)));

    double grid_energy = 0.0, coeff_energy = 0.0;
    for (const Complex& v : f) grid_energy += std::norm(v);
    for (const Complex& v : coeffs) coeff_energy += std::norm(v);
    const double scaled = coeff_energy * static_cast<double>(spec.total_points);
    std::ostringstream plabel;
    plabel << "fft energy identity n=" << c.n << " N=" << c.N;
    rows.push_back(row(plabel.str(), 0.0,
                       std::abs(scaled - grid_energy) / grid_energy,
                       TolerancePolicy::absolute(1e-12)));
  }
}

void divergence_rows(std::vector<CheckRow>& rows) {
  const IndexSet set = build_index_set(prom0(), 4);
  const std::array<Expression, 3> w{parse_expression(kW1, 6),
                                    parse_expression(kW2, 6),
                                    parse_expression(kW3, 6)};
  const ManufacturedRhs mr =
      manufactured_rhs(w, parse_expression("1", 6), 1.0, set);
  FieldEvaluator eval(set, mr.u_exact);

  std::mt19937_64 rng(40405);
  const double h = 1e-6;
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    std::array<double, 3> z;
    for (double& c : z) c = -3.0 + 6.0 * (unit_double(rng) + 0.5);
    Complex div = 0.0;
    double scale = 1.0;
    for (int c = 0; c < 3; ++c) {
      std::array<double, 3> zp = z, zm = z;
      zp[static_cast<std::size_t>(c)] += h;
      zm[static_cast<std::size_t>(c)] -= h;
      const Complex d = (eval.at(zp)[static_cast<std::size_t>(c)] -
                         eval.at(zm)[static_cast<std::size_t>(c)]) /
                        (2.0 * h);
      div += d;
      scale = std::max(scale, std::abs(d));
    }
    worst = std::max(worst, std::abs(div) / scale);
  }
  rows.push_back(row("pointwise divergence by finite differences", 0.0, worst,
                     TolerancePolicy::absolute(1e-8)));
}

void eigen_property_rows(std::vector<CheckRow>& rows) {
  // all 52 eigenpairs of the small vacuum instance, twice for determinism
  EigenProblem p;
  p.P = prom();
  p.N = 6;
  p.M = 0.3;
  p.epsilon = parse_expression("1", 6);
  p.solver.n_eigenvalues = 52;
  p.solver.krylov_dim = 52;
  p.solver.residual_tolerance = 1e-10;
  p.solver.seed = 1234;
  const EigenSolution a = solve_eigen(p);
  const EigenSolution b = solve_eigen(p);

  rows.push_back(bool_row("small vacuum eigensolve converged",
                          a.result.converged && a.result.eigenvalues.size() == 52));

  bool identical = a.result.eigenvalues == b.result.eigenvalues &&
                   a.result.residual_norms == b.result.residual_norms &&
                   a.result.eigenvectors == b.result.eigenvectors;
  rows.push_back(bool_row("eigensolve rerun is bit-identical", identical));

  OperatorPlan plan(a.set, sample_on_grid(parse_expression("1", 6), 6, 6), 0.0);
  const std::size_t dof = static_cast<std::size_t>(plan.dof());
  double imag_defect = 0.0;
  for (const auto& v : a.result.eigenvectors) {
    std::vector<Complex> hv(dof);
    plan.apply_eigen(v, hv);
    const Complex rq = cdot(v, hv);
    imag_defect = std::max(
        imag_defect, std::abs(rq.imag()) / std::max(1.0, std::abs(rq.real())));
  }
  rows.push_back(row("eigenvector quotient imaginary part", 0.0, imag_defect,
                     TolerancePolicy::absolute(1e-8)));

  // deterministic source path as well
  SourceProblem sp;
  sp.P = prom0();
  sp.N = 4;
  sp.kappa = 100.0;
  sp.epsilon = parse_expression("1", 6);
  sp.w = std::array<Expression, 3>{parse_expression(kW1, 6),
                                   parse_expression(kW2, 6),
                                   parse_expression(kW3, 6)};
  const SourceSolution s1 = solve_source(sp);
  const SourceSolution s2 = solve_source(sp);
  rows.push_back(bool_row("source solve rerun is bit-identical",
                          s1.u.values == s2.u.values));
}

GoldenFixture property_suite_fixture() {
  GoldenFixture f;
  f.name = "property-suite";
  f.config =
      "frames and curl on the (6-D, N=6) box, operator and dense-oracle "
      "checks on the 2-D tiny instance, fft n in {2,3}, small vacuum "
      "eigenpairs, seeded reruns";
  f.provenance =
      "derived-oracle: dense convolution assembly; closed-form identities "
      "for frames, curl, fft normalization and divergence";
  f.policy = TolerancePolicy::exact();
  f.run = []() {
    std::vector<CheckRow> rows;
    std::mt19937_64 rng(8675309);
    frame_rows(rows);
    curl_rows(rows, rng);
    operator_rows(rows, rng);
    fft_rows(rows, rng);
    divergence_rows(rows);
    eigen_property_rows(rows);
    return rows;
  };
  return f;
}

GoldenFixture coefficient_decay_fixture(std::shared_ptr<ReducedRunCache> cache) {
  GoldenFixture f;
  f.name = "coefficient-decay";
  f.config =
      "ground eigenvector of the (N=8, M=6) variable-coefficient run, "
      "12 |q| bins, upper half of the resolved range";
  f.provenance =
      "self-reference: own ground eigenvector; property-level envelope "
      "monotonicity";
  f.policy = TolerancePolicy::exact();
  f.run = [cache]() {
    const EigenSolution& sol = cache->get(8, 6);
    if (sol.result.eigenvectors.empty()) {
      std::vector<CheckRow> rows;
      rows.push_back(bool_row("ground eigenvector available", false));
      return rows;
    }
    const DivFreeCoeffs ground{sol.result.eigenvectors.at(0)};
    const std::vector<DecayBin> bins =
        coefficient_decay_profile(sol.set, ground, 12);

    double global_max = 0.0;
    for (const DecayBin& b : bins) global_max = std::max(global_max, b.max_coeff);
    const double floor = 1e-13 * global_max;
    const double qmax = bins.back().q_center + bins.front().q_center;

    std::vector<std::pair<double, double>> kept;  // (center, clamped envelope)
    for (const DecayBin& b : bins)
      if (b.count > 0 && b.q_center >= 0.5 * qmax)
        kept.emplace_back(b.q_center, std::max(b.max_coeff, floor));

    std::vector<CheckRow> rows;
    rows.push_back(bool_row("at least three populated bins in the upper half",
                            kept.size() >= 3));
    for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
      std::ostringstream label;
      label << "envelope non-increasing across |q|=" << std::setprecision(3)
            << kept[i].first << " -> " << kept[i + 1].first;
      rows.push_back(bool_row(label.str(), kept[i + 1].second <= kept[i].second));
    }
    return rows;
  };
  return f;
}

}  // namespace

std::vector<GoldenFixture> acceptance_fixtures() {
  auto cache = std::make_shared<ReducedRunCache>();
  std::vector<GoldenFixture> fixtures;
  fixtures.push_back(vacuum_spectrum_fixture());
  fixtures.push_back(mode_count_fixture());
  fixtures.push_back(source_convergence_fixture());
  fixtures.push_back(reduced_plateau_fixture(cache));
  fixtures.push_back(property_suite_fixture());
  fixtures.push_back(coefficient_decay_fixture(cache));
  return fixtures;
}

SuiteReport run_suite(const std::vector<GoldenFixture>& fixtures,
                      const std::string& filter) {
  SuiteReport report;
  for (const GoldenFixture& fixture : fixtures) {
    if (!filter.empty() && fixture.name.find(filter) == std::string::npos)
      continue;
    FixtureOutcome outcome;
    outcome.name = fixture.name;
    outcome.config = fixture.config;
    outcome.provenance = fixture.provenance;

    const auto start = std::chrono::steady_clock::now();
    if (fixture.provenance.empty()) {
      outcome.errored = true;
      outcome.error = "fixture has no provenance entry";
    } else if (!fixture.run) {
      outcome.errored = true;
      outcome.error = "fixture has no run callable";
    } else {
      try {
        const std::vector<CheckRow> rows = fixture.run();
        outcome.passed = true;
        for (const CheckRow& r : rows) {
          const TolerancePolicy& policy = r.policy ? *r.policy : fixture.policy;
          RowOutcome ro;
          ro.label = r.label;
          ro.expected = r.expected;
          ro.actual = r.actual;
          ro.deviation = policy.deviation(r.expected, r.actual);
          ro.passed = policy.accepts(r.expected, r.actual);
          ro.policy = policy.describe();
          outcome.passed &= ro.passed;
          outcome.rows.push_back(std::move(ro));
        }
        if (outcome.rows.empty()) {
          outcome.passed = false;
          outcome.error = "fixture produced no checks";
        }
      } catch (const std::exception& e) {
        outcome.errored = true;
        outcome.error = e.what();
      }
    }
    if (outcome.errored) outcome.passed = false;
    outcome.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();

    report.seconds += outcome.seconds;
    if (outcome.passed)
      ++report.passed;
    else
      ++report.failed;
    report.fixtures.push_back(std::move(outcome));
  }
  return report;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

void print_row(std::ostream& os, const RowOutcome& row) {
  os << (row.passed ? "  ok   " : "  BAD  ") << row.label << ": expected "
     << std::setprecision(17) << row.expected << " actual " << row.actual
     << " deviation " << std::setprecision(3) << row.deviation << " ["
     << row.policy << "]\n";
}

}  // namespace

void write_text_report(const SuiteReport& report, std::ostream& os) {
  os << "golden fixture report\n";
  for (const FixtureOutcome& f : report.fixtures) {
    os << "\n" << (f.passed ? "PASS" : "FAIL") << "  " << f.name << "  ("
       << std::fixed << std::setprecision(1) << f.seconds << " s)\n";
    os.unsetf(std::ios_base::floatfield);
    os << "  config: " << f.config << "\n";
    os << "  provenance: " << f.provenance << "\n";
    if (!f.error.empty()) os << "  error: " << f.error << "\n";
    for (const RowOutcome& row : f.rows) print_row(os, row);
  }
  os << "\nsummary: " << report.passed << "/" << report.fixtures.size()
     << " fixtures passed in " << std::fixed << std::setprecision(1)
     << report.seconds << " s\n";
  os.unsetf(std::ios_base::floatfield);
}

void write_junit_report(const SuiteReport& report, std::ostream& os) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<testsuites tests=\"" << report.fixtures.size() << "\" failures=\""
     << report.failed << "\">\n";
  os << "  <testsuite name=\"golden-fixtures\" tests=\"" << report.fixtures.size()
     << "\" failures=\"" << report.failed << "\" time=\"" << std::fixed
     << std::setprecision(3) << report.seconds << "\">\n";
  os.unsetf(std::ios_base::floatfield);
  for (const FixtureOutcome& f : report.fixtures) {
    os << "    <testcase classname=\"golden\" name=\"" << xml_escape(f.name)
       << "\" time=\"" << std::fixed << std::setprecision(3) << f.seconds
       << "\"";
    os.unsetf(std::ios_base::floatfield);
    if (f.passed) {
      os << "/>\n";
      continue;
    }
    std::size_t bad = 0;
    for (const RowOutcome& row : f.rows)
      if (!row.passed) ++bad;
    std::ostringstream msg;
    if (f.errored)
      msg << "execution error: " << f.error;
    else
      msg << bad << " of " << f.rows.size() << " checks out of tolerance";
    os << ">\n      <failure message=\"" << xml_escape(msg.str()) << "\">";
    std::ostringstream body;
    if (!f.error.empty()) body << f.error << "\n";
    for (const RowOutcome& row : f.rows)
      if (!row.passed) print_row(body, row);
    os << xml_escape(body.str()) << "</failure>\n    </testcase>\n";
  }
  os << "  </testsuite>\n</testsuites>\n";
}

}  // namespace qpm
