#include "qpm/cli.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <memory>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

#include "qpm/verification.hpp"

namespace qpm {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// 17 significant digits: enough to reproduce any double exactly, and integral
// values like M = 6 come out as plain "6".
std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw ConfigError(origin + ": " + msg);
}

void check_keys(const json& obj, const std::string& origin, const char* where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail(origin, "unknown key \"" + it.key() + "\" in " + where);
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void take_int(const json& obj, const char* key, int& dst, const std::string& origin) {
  if (const json* v = find(obj, key)) {
    if (!v->is_number_integer()) fail(origin, std::string("\"") + key + "\" must be an integer");
    dst = v->get<int>();
  }
}

void take_i64(const json& obj, const char* key, std::int64_t& dst,
              const std::string& origin) {
  if (const json* v = find(obj, key)) {
    if (!v->is_number_integer()) fail(origin, std::string("\"") + key + "\" must be an integer");
    dst = v->get<std::int64_t>();
  }
}

void take_u64(const json& obj, const char* key, std::uint64_t& dst,
              const std::string& origin) {
  if (const json* v = find(obj, key)) {
    const bool ok = v->is_number_unsigned() ||
                    (v->is_number_integer() && v->get<std::int64_t>() >= 0);
    if (!ok) fail(origin, std::string("\"") + key + "\" must be a nonnegative integer");
    dst = v->get<std::uint64_t>();
  }
}

void take_double(const json& obj, const char* key, double& dst,
                 const std::string& origin) {
  if (const json* v = find(obj, key)) {
    if (!v->is_number()) fail(origin, std::string("\"") + key + "\" must be a number");
    dst = v->get<double>();
  }
}

void take_bool(const json& obj, const char* key, bool& dst, const std::string& origin) {
  if (const json* v = find(obj, key)) {
    if (!v->is_boolean()) fail(origin, std::string("\"") + key + "\" must be a boolean");
    dst = v->get<bool>();
  }
}

void take_string(const json& obj, const char* key, std::string& dst,
                 const std::string& origin) {
  if (const json* v = find(obj, key)) {
    if (!v->is_string()) fail(origin, std::string("\"") + key + "\" must be a string");
    dst = v->get<std::string>();
  }
}

std::string entry_to_string(const json& v, const std::string& origin) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return fmt_double(v.get<double>());
  fail(origin, "projection-matrix entries must be strings or numbers");
}

ConvergencePair parse_pair(const json& v, const std::string& origin, const char* what) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number())
    fail(origin, std::string(what) + " must be an [N, M] pair");
  return {v[0].get<int>(), v[1].get<double>()};
}

Expression parse_expr(const std::string& text, int n_vars, const std::string& role) {
  try {
    return Expression::parse(text, n_vars);
  } catch (const ParseError& e) {
    throw ConfigError(role + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!j.is_object()) fail(origin, "top level must be a JSON object");
  check_keys(j, origin, "the top level",
             {"kind", "projection-matrix", "N", "M", "kappa", "epsilon", "w1", "w2",
              "w3", "u-exact", "oversample", "seed", "verbose", "gmres", "eigensolver",
              "convergence", "field-grid"});

  RunConfig cfg;
  take_string(j, "kind", cfg.kind, origin);
  if (cfg.kind != "source" && cfg.kind != "eigen")
    fail(origin, "kind must be \"source\" or \"eigen\"");

  const json* pm = find(j, "projection-matrix");
  if (!pm) fail(origin, "\"projection-matrix\" is required");
  if (!pm->is_array() || pm->empty())
    fail(origin, "projection-matrix must be a non-empty array of rows");
  std::size_t cols = 0;
  for (const json& row : *pm) {
    if (!row.is_array() || row.empty())
      fail(origin, "projection-matrix rows must be non-empty arrays");
    if (cols == 0)
      cols = row.size();
    else if (row.size() != cols)
      fail(origin, "projection-matrix rows have unequal lengths");
    std::vector<std::string> out_row;
    out_row.reserve(cols);
    for (const json& v : row) out_row.push_back(entry_to_string(v, origin));
    cfg.projection.push_back(std::move(out_row));
  }

  take_int(j, "N", cfg.N, origin);
  take_double(j, "M", cfg.M, origin);
  take_double(j, "kappa", cfg.kappa, origin);
  take_string(j, "epsilon", cfg.epsilon, origin);

  const int have_w = (find(j, "w1") != nullptr) + (find(j, "w2") != nullptr) +
                     (find(j, "w3") != nullptr);
  if (have_w == 3) {
    std::array<std::string, 3> w;
    take_string(j, "w1", w[0], origin);
    take_string(j, "w2", w[1], origin);
    take_string(j, "w3", w[2], origin);
    cfg.w = std::move(w);
  } else if (have_w != 0) {
    fail(origin, "w1, w2, w3 must be given together");
  }

  if (const json* ue = find(j, "u-exact")) {
    if (!ue->is_array() || ue->size() != 3)
      fail(origin, "u-exact must be an array of 3 component expressions");
    std::array<std::string, 3> u;
    for (int c = 0; c < 3; ++c) {
      if (!(*ue)[c].is_string()) fail(origin, "u-exact components must be strings");
      u[c] = (*ue)[c].get<std::string>();
    }
    cfg.u_exact = std::move(u);
  }

  take_int(j, "oversample", cfg.oversample, origin);
  take_u64(j, "seed", cfg.seed, origin);
  take_bool(j, "verbose", cfg.verbose, origin);

  if (const json* g = find(j, "gmres")) {
    if (!g->is_object()) fail(origin, "gmres must be an object");
    check_keys(*g, origin, "the gmres block",
               {"rel-tolerance", "restart", "max-iterations"});
    take_double(*g, "rel-tolerance", cfg.gmres.rel_tolerance, origin);
    take_int(*g, "restart", cfg.gmres.restart, origin);
    take_i64(*g, "max-iterations", cfg.gmres.max_iterations, origin);
  }

  if (const json* e = find(j, "eigensolver")) {
    if (!e->is_object()) fail(origin, "eigensolver must be an object");
    check_keys(*e, origin, "the eigensolver block",
               {"n-eigenvalues", "krylov-dim", "residual-tolerance", "max-restarts",
                "seed", "sigma", "which", "mode"});
    take_int(*e, "n-eigenvalues", cfg.eigensolver.n_eigenvalues, origin);
    take_int(*e, "krylov-dim", cfg.eigensolver.krylov_dim, origin);
    take_double(*e, "residual-tolerance", cfg.eigensolver.residual_tolerance, origin);
    take_int(*e, "max-restarts", cfg.eigensolver.max_restarts, origin);
    take_u64(*e, "seed", cfg.eigensolver.seed, origin);
    take_double(*e, "sigma", cfg.eigensolver.sigma, origin);
    if (find(*e, "which")) {
      std::string s;
      take_string(*e, "which", s, origin);
      if (s == "smallest-magnitude")
        cfg.eigensolver.which = EigenWhich::SmallestMagnitude;
      else if (s == "largest-magnitude")
        cfg.eigensolver.which = EigenWhich::LargestMagnitude;
      else
        fail(origin, "eigensolver which must be \"smallest-magnitude\" or \"largest-magnitude\"");
    }
    if (find(*e, "mode")) {
      std::string s;
      take_string(*e, "mode", s, origin);
      if (s == "direct")
        cfg.eigensolver.mode = EigenMode::Direct;
      else if (s == "shift-invert")
        cfg.eigensolver.mode = EigenMode::ShiftInvert;
      else
        fail(origin, "eigensolver mode must be \"direct\" or \"shift-invert\"");
    }
  }

  if (const json* c = find(j, "convergence")) {
    if (!c->is_object()) fail(origin, "convergence must be an object");
    check_keys(*c, origin, "the convergence block",
               {"pairs", "reference", "box", "samples", "analytic-g", "n-ref"});
    ConvergenceSpec conv;
    if (const json* ps = find(*c, "pairs")) {
      if (!ps->is_array()) fail(origin, "convergence pairs must be an array");
      for (const json& p : *ps)
        conv.pairs.push_back(parse_pair(p, origin, "convergence pair"));
    }
    if (const json* r = find(*c, "reference"))
      conv.reference = parse_pair(*r, origin, "convergence reference");
    if (const json* b = find(*c, "box")) {
      if (!b->is_array() || b->size() != 2 || !(*b)[0].is_number() || !(*b)[1].is_number())
        fail(origin, "convergence box must be [lo, hi]");
      conv.box = {(*b)[0].get<double>(), (*b)[1].get<double>()};
    }
    take_i64(*c, "samples", conv.samples, origin);
    take_bool(*c, "analytic-g", conv.analytic_g, origin);
    take_int(*c, "n-ref", conv.n_ref, origin);
    cfg.convergence = std::move(conv);
  }

  if (const json* f = find(j, "field-grid")) {
    if (!f->is_object()) fail(origin, "field-grid must be an object");
    check_keys(*f, origin, "the field-grid block",
               {"lo", "hi", "points", "field", "eigenvector-id"});
    FieldGridSpec fg;
    fg.field = cfg.kind == "eigen" ? "eigenvector" : "source";
    take_double(*f, "lo", fg.lo, origin);
    take_double(*f, "hi", fg.hi, origin);
    take_int(*f, "points", fg.points, origin);
    take_string(*f, "field", fg.field, origin);
    if (fg.field != "source" && fg.field != "eigenvector")
      fail(origin, "field-grid field must be \"source\" or \"eigenvector\"");
    take_int(*f, "eigenvector-id", fg.eigenvector_id, origin);
    cfg.field_grid = std::move(fg);
  }

  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string serialize_config(const RunConfig& cfg) {
  ordered_json j;
  j["kind"] = cfg.kind;
  ordered_json pm = ordered_json::array();
  for (const auto& row : cfg.projection) {
    ordered_json r = ordered_json::array();
    for (const auto& s : row) r.push_back(s);
    pm.push_back(std::move(r));
  }
  j["projection-matrix"] = std::move(pm);
  j["N"] = cfg.N;
  j["M"] = cfg.M;
  j["kappa"] = cfg.kappa;
  j["epsilon"] = cfg.epsilon;
  if (cfg.w) {
    j["w1"] = (*cfg.w)[0];
    j["w2"] = (*cfg.w)[1];
    j["w3"] = (*cfg.w)[2];
  }
  if (cfg.u_exact)
    j["u-exact"] =
        ordered_json::array({(*cfg.u_exact)[0], (*cfg.u_exact)[1], (*cfg.u_exact)[2]});
  j["oversample"] = cfg.oversample;
  j["seed"] = cfg.seed;
  j["verbose"] = cfg.verbose;
  j["gmres"] = ordered_json{
      {"rel-tolerance", cfg.gmres.rel_tolerance},
      {"restart", cfg.gmres.restart},
      {"max-iterations", cfg.gmres.max_iterations},
  };
  j["eigensolver"] = ordered_json{
      {"n-eigenvalues", cfg.eigensolver.n_eigenvalues},
      {"krylov-dim", cfg.eigensolver.krylov_dim},
      {"residual-tolerance", cfg.eigensolver.residual_tolerance},
      {"max-restarts", cfg.eigensolver.max_restarts},
      {"seed", cfg.eigensolver.seed},
      {"sigma", cfg.eigensolver.sigma},
      {"which", cfg.eigensolver.which == EigenWhich::SmallestMagnitude
                    ? "smallest-magnitude"
                    : "largest-magnitude"},
      {"mode", cfg.eigensolver.mode == EigenMode::Direct ? "direct" : "shift-invert"},
  };
  if (cfg.convergence) {
    const ConvergenceSpec& conv = *cfg.convergence;
    ordered_json c;
    ordered_json ps = ordered_json::array();
    for (const auto& p : conv.pairs) ps.push_back(ordered_json::array({p.N, p.M}));
    c["pairs"] = std::move(ps);
    if (conv.reference)
      c["reference"] = ordered_json::array({conv.reference->N, conv.reference->M});
    c["box"] = ordered_json::array({conv.box[0], conv.box[1]});
    c["samples"] = conv.samples;
    c["analytic-g"] = conv.analytic_g;
    c["n-ref"] = conv.n_ref;
    j["convergence"] = std::move(c);
  }
  if (cfg.field_grid) {
    const FieldGridSpec& fg = *cfg.field_grid;
    j["field-grid"] = ordered_json{
        {"lo", fg.lo},
        {"hi", fg.hi},
        {"points", fg.points},
        {"field", fg.field},
        {"eigenvector-id", fg.eigenvector_id},
    };
  }
  return j.dump(2) + "\n";
}

ProjectionMatrix projection_from_config(const RunConfig& cfg) {
  if (cfg.projection.empty()) throw ConfigError("projection-matrix is missing");
  const std::size_t cols = cfg.projection.front().size();
  if (cols == 0) throw ConfigError("projection-matrix rows are empty");
  std::vector<double> vals;
  vals.reserve(cfg.projection.size() * cols);
  for (const auto& row : cfg.projection) {
    if (row.size() != cols)
      throw ConfigError("projection-matrix rows have unequal lengths");
    for (const std::string& s : row) {
      Expression e = parse_expr(s, 0, "projection-matrix entry \"" + s + "\"");
      try {
        vals.push_back(e.evaluate({}));
      } catch (const EvalError& err) {
        throw ConfigError("projection-matrix entry \"" + s + "\": " + err.what());
      }
    }
  }
  try {
    return ProjectionMatrix(static_cast<int>(cfg.projection.size()),
                            static_cast<int>(cols), std::move(vals));
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("projection-matrix: ") + err.what());
  }
}

SourceProblem source_problem_from_config(const RunConfig& cfg) {
  if (cfg.kind != "source")
    throw ConfigError("config kind is \"" + cfg.kind + "\", expected \"source\"");
  SourceProblem sp;
  sp.P = projection_from_config(cfg);
  sp.N = cfg.N;
  sp.kappa = cfg.kappa;
  sp.epsilon = parse_expr(cfg.epsilon, sp.P.cols, "epsilon");
  if (cfg.w) {
    std::array<Expression, 3> w;
    for (int c = 0; c < 3; ++c)
      w[c] = parse_expr((*cfg.w)[c], sp.P.cols, "w" + std::to_string(c + 1));
    sp.w = std::move(w);
  }
  sp.oversample = cfg.oversample;
  sp.gmres = cfg.gmres;
  return sp;
}

EigenProblem eigen_problem_from_config(const RunConfig& cfg) {
  if (cfg.kind != "eigen")
    throw ConfigError("config kind is \"" + cfg.kind + "\", expected \"eigen\"");
  EigenProblem ep;
  ep.P = projection_from_config(cfg);
  ep.N = cfg.N;
  ep.M = cfg.M;
  ep.epsilon = parse_expr(cfg.epsilon, ep.P.cols, "epsilon");
  ep.oversample = cfg.oversample;
  ep.solver = cfg.eigensolver;
  ep.inner = cfg.gmres;
  return ep;
}

void emit_eigen_csv(const EigenResult& result, std::ostream& os) {
  os << "id,eigenvalue,residual\n";
  for (std::size_t i = 0; i < result.eigenvalues.size(); ++i) {
    const double res = i < result.residual_norms.size() ? result.residual_norms[i] : 0.0;
    os << (i + 1) << ',' << fmt_double(result.eigenvalues[i]) << ',' << fmt_double(res)
       << '\n';
  }
}

void emit_eigen_csv(const EigenResult& result, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file " + path);
  emit_eigen_csv(result, f);
}

namespace {

FieldFn wrap_solution(std::shared_ptr<SourceSolution> sol) {
  auto ev = std::make_shared<FieldEvaluator>(sol->set, sol->u);
  return [sol, ev](std::span<const double> z) { return ev->at(z); };
}

void run_source_study(const RunConfig& cfg, const ConvergenceSpec& conv,
                      std::ostream& os) {
  const ProjectionMatrix P = projection_from_config(cfg);
  if (P.rows != 3)
    throw ConfigError("convergence studies need a 3-row projection matrix");

  auto run_one = [&](int N_run) {
    SourceProblem sp = source_problem_from_config(cfg);
    sp.N = N_run;
    if (conv.analytic_g) {
      if (!sp.w) throw ConfigError("analytic-g requires w1, w2, w3");
      if (conv.n_ref < N_run)
        throw ConfigError("n-ref must cover every N in the study");
      IndexSet set = build_index_set(sp.P, N_run);
      ManufacturedRhs mr =
          manufactured_rhs_analytic(*sp.w, sp.epsilon, sp.kappa, set, conv.n_ref);
      sp.rhs = std::move(mr.g);
      sp.w.reset();
    }
    return std::make_shared<SourceSolution>(solve_source(sp));
  };

  FieldFn reference;
  if (cfg.u_exact) {
    std::array<Expression, 3> comps;
    for (int c = 0; c < 3; ++c)
      comps[c] = parse_expr((*cfg.u_exact)[c], P.cols, "u-exact component " +
                                                           std::to_string(c + 1));
    reference = [P, comps](std::span<const double> z) -> std::array<Complex, 3> {
      std::vector<double> y(static_cast<std::size_t>(P.cols), 0.0);
      for (int r = 0; r < P.rows; ++r)
        for (int c = 0; c < P.cols; ++c) y[c] += P(r, c) * z[r];
      return {Complex(comps[0].evaluate(y), 0.0), Complex(comps[1].evaluate(y), 0.0),
              Complex(comps[2].evaluate(y), 0.0)};
    };
  } else {
    if (!conv.reference)
      throw ConfigError("source convergence without u-exact needs a reference pair");
    reference = wrap_solution(run_one(conv.reference->N));
  }

  os << "N,M,l2,linf\n";
  for (const ConvergencePair& pr : conv.pairs) {
    FieldFn numeric = wrap_solution(run_one(pr.N));
    ErrorReport er = error_norms(numeric, reference, conv.box[0], conv.box[1],
                                 conv.samples, cfg.seed);
    os << pr.N << ',' << fmt_double(pr.M) << ',' << fmt_double(er.l2) << ','
       << fmt_double(er.linf) << '\n';
  }
}

void run_eigen_study(const RunConfig& cfg, const ConvergenceSpec& conv,
                     std::ostream& os) {
  if (!conv.reference)
    throw ConfigError("eigenvalue convergence needs a reference pair");

  auto smallest = [&](int N_run, double M_run) {
    EigenProblem ep = eigen_problem_from_config(cfg);
    ep.N = N_run;
    ep.M = M_run;
    EigenSolution sol = solve_eigen(ep);
    if (sol.result.eigenvalues.empty())
      throw SolveError("eigenvalue run N=" + std::to_string(N_run) + " M=" +
                       fmt_double(M_run) + " locked no eigenvalues");
    if (!sol.result.converged)
      std::cerr << "warning: run N=" << N_run << " M=" << fmt_double(M_run)
                << " converged only " << sol.result.eigenvalues.size()
                << " eigenvalues\n";
    return sol.result.eigenvalues.front();
  };

  const double lam_ref = smallest(conv.reference->N, conv.reference->M);
  os << "N,M,eigenvalue_error\n";
  for (const ConvergencePair& pr : conv.pairs) {
    const double lam = smallest(pr.N, pr.M);
    os << pr.N << ',' << fmt_double(pr.M) << ',' << fmt_double(std::abs(lam - lam_ref))
       << '\n';
  }
}

}  // namespace

void run_convergence_study(const RunConfig& cfg, std::ostream& os) {
  if (!cfg.convergence) throw ConfigError("config has no convergence block");
  const ConvergenceSpec& conv = *cfg.convergence;
  if (conv.pairs.empty()) throw ConfigError("convergence pairs are empty");
  if (cfg.kind == "source")
    run_source_study(cfg, conv, os);
  else
    run_eigen_study(cfg, conv, os);
}

namespace {

struct CommonFlags {
  std::string config_path;
  int N = 0;
  double M = 0.0;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  int oversample = 0;
  bool verbose = false;
  std::string out;
};

void add_common_options(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--N", f.N, "modes per dimension (overrides the config)");
  sub->add_option("--M", f.M, "reduced-set bound (overrides the config)");
  sub->add_option("--kappa", f.kappa, "source shift (overrides the config)");
  sub->add_option("--seed", f.seed, "sampling seed (overrides the config)");
  sub->add_option("--oversample", f.oversample,
                  "permittivity grid oversampling (overrides the config)");
  sub->add_flag("--verbose", f.verbose, "solver progress on stderr");
  sub->add_option("--out", f.out, "write the result here instead of stdout");
}

RunConfig config_for(const CLI::App* sub, const CommonFlags& f) {
  RunConfig cfg = load_config(f.config_path);
  if (sub->count("--N")) cfg.N = f.N;
  if (sub->count("--M")) cfg.M = f.M;
  if (sub->count("--kappa")) cfg.kappa = f.kappa;
  if (sub->count("--seed")) cfg.seed = f.seed;
  if (sub->count("--oversample")) cfg.oversample = f.oversample;
  if (f.verbose) cfg.verbose = true;
  if (cfg.verbose) {
    cfg.gmres.verbose = true;
    cfg.eigensolver.verbose = true;
  }
  return cfg;
}

// Routes output to --out when given, stdout otherwise.
class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw ConfigError("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

void write_coefficient_csv(const IndexSet& set, const DivFreeCoeffs& u,
                           std::ostream& os) {
  os << "id";
  for (int c = 1; c <= set.n(); ++c) os << ",k" << c;
  os << ",qnorm,u1_re,u1_im,u2_re,u2_im\n";
  const std::int64_t L = set.size();
  for (std::int64_t jm = 0; jm < L; ++jm) {
    os << (jm + 1);
    for (std::int32_t kc : set.k(jm)) os << ',' << kc;
    const Complex u1 = u.values[static_cast<std::size_t>(jm)];
    const Complex u2 = u.values[static_cast<std::size_t>(L + jm)];
    os << ',' << fmt_double(set.qnorm(jm)) << ',' << fmt_double(u1.real()) << ','
       << fmt_double(u1.imag()) << ',' << fmt_double(u2.real()) << ','
       << fmt_double(u2.imag()) << '\n';
  }
}

int cmd_solve_source(const RunConfig& cfg, const std::string& out) {
  SourceProblem sp = source_problem_from_config(cfg);
  SourceSolution sol = solve_source(sp);
  std::cout << "modes: " << sol.set.size() << "\n";
  std::cout << "dof: " << sol.set.dof() << "\n";
  std::cout << "gmres iterations: " << sol.stats.iterations << "\n";
  std::cout << "relative residual: " << fmt_double(sol.stats.final_residual) << "\n";
  if (sol.u_exact) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < sol.u.values.size(); ++i) {
      num += std::norm(sol.u.values[i] - sol.u_exact->values[i]);
      den += std::norm(sol.u_exact->values[i]);
    }
    const double rel = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    std::cout << "relative error vs manufactured solution: " << fmt_double(rel) << "\n";
  }
  if (!out.empty()) {
    OutputTarget t(out);
    write_coefficient_csv(sol.set, sol.u, t.stream());
  }
  return 0;
}

int cmd_solve_eigen(const RunConfig& cfg, const std::string& out) {
  EigenProblem ep = eigen_problem_from_config(cfg);
  EigenSolution sol = solve_eigen(ep);
  if (!sol.result.converged)
    std::cerr << "warning: solver stopped with " << sol.result.eigenvalues.size()
              << " of " << ep.solver.n_eigenvalues << " requested eigenvalues\n";
  OutputTarget t(out);
  emit_eigen_csv(sol.result, t.stream());
  return 0;
}

int cmd_convergence(const RunConfig& cfg, const std::string& out) {
  OutputTarget t(out);
  run_convergence_study(cfg, t.stream());
  return 0;
}

int cmd_dof_count(const RunConfig& cfg, bool explicit_pair, const std::string& out) {
  const ProjectionMatrix P = projection_from_config(cfg);
  std::vector<ConvergencePair> pairs;
  if (!explicit_pair && cfg.convergence && !cfg.convergence->pairs.empty())
    pairs = cfg.convergence->pairs;
  else
    pairs.push_back({cfg.N, cfg.M});
  OutputTarget t(out);
  std::ostream& os = t.stream();
  os << "N,M,DOF\n";
  for (const ConvergencePair& pr : pairs) {
    // M <= 0 selects the unfiltered mode box
    const std::int64_t dof =
        pr.M <= 0.0 ? full_dof(P.cols, pr.N) : reduced_dof_count(P, pr.N, pr.M);
    os << pr.N << ',' << fmt_double(pr.M <= 0.0 ? 0.0 : pr.M) << ',' << dof << '\n';
  }
  return 0;
}

int cmd_eval_field(const RunConfig& cfg, const std::string& out) {
  FieldGridSpec fg;
  if (cfg.field_grid)
    fg = *cfg.field_grid;
  else
    fg.field = cfg.kind == "eigen" ? "eigenvector" : "source";
  if (fg.points < 2) throw ConfigError("field-grid needs at least 2 points per axis");
  if (!(fg.hi > fg.lo)) throw ConfigError("field-grid interval is empty");

  IndexSet set;
  DivFreeCoeffs coeffs;
  if (fg.field == "source") {
    SourceSolution sol = solve_source(source_problem_from_config(cfg));
    coeffs = std::move(sol.u);
    set = std::move(sol.set);
  } else {
    EigenSolution sol = solve_eigen(eigen_problem_from_config(cfg));
    const int id = fg.eigenvector_id;
    const int got = static_cast<int>(sol.result.eigenvectors.size());
    if (id < 1 || id > got)
      throw ConfigError("eigenvector-id " + std::to_string(id) +
                        " is out of range (the run produced " + std::to_string(got) +
                        " eigenvectors)");
    coeffs.values = sol.result.eigenvectors[static_cast<std::size_t>(id - 1)];
    normalize_phase(coeffs);
    set = std::move(sol.set);
  }
  if (set.dim() != 3)
    throw ConfigError("field evaluation needs a 3-row projection matrix");

  FieldEvaluator ev(set, coeffs);
  OutputTarget t(out);
  std::ostream& os = t.stream();
  os << "z1,z2,z3,ux,uy,uz\n";
  std::array<double, 3> z;
  for (int i = 0; i < fg.points; ++i) {
    z[0] = fg.lo + (fg.hi - fg.lo) * i / (fg.points - 1);
    for (int jj = 0; jj < fg.points; ++jj) {
      z[1] = fg.lo + (fg.hi - fg.lo) * jj / (fg.points - 1);
      for (int l = 0; l < fg.points; ++l) {
        z[2] = fg.lo + (fg.hi - fg.lo) * l / (fg.points - 1);
        const std::array<Complex, 3> u = ev.at(z);
        os << fmt_double(z[0]) << ',' << fmt_double(z[1]) << ',' << fmt_double(z[2])
           << ',' << fmt_double(u[0].real()) << ',' << fmt_double(u[1].real()) << ','
           << fmt_double(u[2].real()) << '\n';
      }
    }
  }
  return 0;
}

int cmd_verify(const std::string& filter, const std::string& out) {
  SuiteReport rep = run_suite(acceptance_fixtures(), filter);
  write_text_report(rep, std::cout);
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file " + out);
    write_junit_report(rep, f);
  }
  return rep.all_passed() ? 0 : 2;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"matrix-free spectral solver for quasiperiodic Maxwell problems"};
  app.require_subcommand(1);

  CommonFlags source_flags, eigen_flags, conv_flags, dof_flags, field_flags;
  CLI::App* s_source = app.add_subcommand(
      "solve-source", "solve the shifted source problem on the full mode set");
  add_common_options(s_source, source_flags);
  CLI::App* s_eigen = app.add_subcommand(
      "solve-eigen", "compute the smallest eigenvalues on the reduced mode set");
  add_common_options(s_eigen, eigen_flags);
  CLI::App* s_conv = app.add_subcommand(
      "convergence", "run a refinement study and print an error table");
  add_common_options(s_conv, conv_flags);
  CLI::App* s_dof =
      app.add_subcommand("dof-count", "count divergence-free degrees of freedom");
  add_common_options(s_dof, dof_flags);
  CLI::App* s_field = app.add_subcommand(
      "eval-field", "evaluate the solution field on a cubic lattice of points");
  add_common_options(s_field, field_flags);

  std::string verify_filter, verify_out;
  CLI::App* s_verify =
      app.add_subcommand("verify", "run the bundled verification fixtures");
  s_verify->add_option("--filter", verify_filter,
                       "only fixtures whose name contains this substring");
  s_verify->add_option("--out", verify_out, "also write a JUnit XML report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (s_source->parsed())
      return cmd_solve_source(config_for(s_source, source_flags), source_flags.out);
    if (s_eigen->parsed())
      return cmd_solve_eigen(config_for(s_eigen, eigen_flags), eigen_flags.out);
    if (s_conv->parsed())
      return cmd_convergence(config_for(s_conv, conv_flags), conv_flags.out);
    if (s_dof->parsed()) {
      const bool explicit_pair =
          s_dof->count("--N") > 0 || s_dof->count("--M") > 0;
      return cmd_dof_count(config_for(s_dof, dof_flags), explicit_pair, dof_flags.out);
    }
    if (s_field->parsed())
      return cmd_eval_field(config_for(s_field, field_flags), field_flags.out);
    if (s_verify->parsed()) return cmd_verify(verify_filter, verify_out);
  } catch (const SolveError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace qpm
