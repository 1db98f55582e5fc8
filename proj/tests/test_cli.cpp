#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qpm/cli.hpp"

using qpm::ConfigError;
using qpm::EigenResult;
using qpm::RunConfig;

namespace {

const char* kTinyEigen = R"json({
  "kind": "eigen",
  "projection-matrix": [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
  "N": 4,
  "M": 1.5,
  "epsilon": "1",
  "eigensolver": {"n-eigenvalues": 4, "krylov-dim": 30}
})json";

const char* kTinySource = R"json({
  "kind": "source",
  "projection-matrix": [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
  "N": 4,
  "kappa": 1.0,
  "epsilon": "1",
  "w1": "0",
  "w2": "0",
  "w3": "sin(x1)"
})json";

// Writes text to a unique file under the system temp directory and removes
// it when the guard dies.
class TempFile {
 public:
  explicit TempFile(const std::string& text, const std::string& tag) {
    path_ = (std::filesystem::temp_directory_path() /
             ("qpm_test_" + tag + "_" + std::to_string(counter_++) + ".json"))
                .string();
    std::ofstream out(path_, std::ios::binary);
    out << text;
  }
  ~TempFile() { std::remove(path_.c_str()); }
  const std::string& path() const { return path_; }

 private:
  static int counter_;
  std::string path_;
};

int TempFile::counter_ = 0;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "qpm");
  std::vector<char*> argv;
  argv.reserve(args.size());
  for (std::string& a : args) argv.push_back(a.data());
  return qpm::run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("minimal config parses with defaults filled in") {
  RunConfig cfg = qpm::parse_config_text(kTinySource, "inline");
  CHECK(cfg.kind == "source");
  CHECK(cfg.N == 4);
  CHECK(cfg.M == 6.0);  // untouched default
  CHECK(cfg.kappa == 1.0);
  CHECK(cfg.epsilon == "1");
  REQUIRE(cfg.w.has_value());
  CHECK((*cfg.w)[2] == "sin(x1)");
  CHECK(!cfg.u_exact.has_value());
  CHECK(cfg.gmres.rel_tolerance == 1e-10);
  CHECK(cfg.eigensolver.n_eigenvalues == 6);
  CHECK(!cfg.convergence.has_value());
}

TEST_CASE("config rejection catalogue") {
  auto reject = [](const std::string& text) {
    CHECK_THROWS_AS(qpm::parse_config_text(text, "inline"), ConfigError);
  };
  reject("not json at all");
  reject(R"json({"kind": "source"})json");  // no projection matrix
  reject(R"json({"kind": "banana", "projection-matrix": [["1"]]})json");
  reject(R"json({"kind": "source", "projection-matrix": []})json");
  reject(R"json({"kind": "source", "projection-matrix": [["1", "0"], ["1"]]})json");  // ragged
  reject(R"json({"kind": "source", "projection-matrix": [["1"]], "mystery": 3})json");
  reject(R"json({"kind": "source", "projection-matrix": [["1"]], "N": 4.5})json");
  reject(R"json({"kind": "source", "projection-matrix": [["1"]], "w1": "0"})json");  // partial w
  reject(R"json({"kind": "source", "projection-matrix": [["1"]], "u-exact": ["0", "0"]})json");
  reject(R"json({"kind": "eigen", "projection-matrix": [["1"]], "eigensolver": {"which": "tiny"}})json");
  reject(R"json({"kind": "eigen", "projection-matrix": [["1"]], "eigensolver": {"mode": "spin"}})json");
  reject(R"json({"kind": "eigen", "projection-matrix": [["1"]], "gmres": 7})json");
}

TEST_CASE("serialization round trips exactly") {
  RunConfig cfg = qpm::parse_config_text(kTinyEigen, "inline");
  std::string text = qpm::serialize_config(cfg);
  RunConfig back = qpm::parse_config_text(text, "serialized");
  CHECK(back == cfg);
  CHECK(qpm::serialize_config(back) == text);
}

TEST_CASE("projection matrices may use constant expressions") {
  RunConfig cfg;
  cfg.projection = {{"1", "0"}, {"sqrt(5)", "1/2"}};
  qpm::ProjectionMatrix P = qpm::projection_from_config(cfg);
  CHECK(P.rows == 2);
  CHECK(P.cols == 2);
  CHECK(P(1, 0) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  CHECK(P(1, 1) == 0.5);

  cfg.projection = {{"x1"}};
  CHECK_THROWS_AS(qpm::projection_from_config(cfg), ConfigError);
  cfg.projection.clear();
  CHECK_THROWS_AS(qpm::projection_from_config(cfg), ConfigError);
}

TEST_CASE("problem builders check the config kind") {
  RunConfig source = qpm::parse_config_text(kTinySource, "inline");
  RunConfig eigen = qpm::parse_config_text(kTinyEigen, "inline");
  CHECK_THROWS_AS(qpm::source_problem_from_config(eigen), ConfigError);
  CHECK_THROWS_AS(qpm::eigen_problem_from_config(source), ConfigError);

  qpm::SourceProblem sp = qpm::source_problem_from_config(source);
  CHECK(sp.N == 4);
  CHECK(sp.kappa == 1.0);
  REQUIRE(sp.w.has_value());

  qpm::EigenProblem ep = qpm::eigen_problem_from_config(eigen);
  CHECK(ep.N == 4);
  CHECK(ep.M == 1.5);
  CHECK(ep.solver.n_eigenvalues == 4);
}

TEST_CASE("eigenvalue csv format") {
  EigenResult r;
  std::ostringstream empty;
  qpm::emit_eigen_csv(r, empty);
  CHECK(empty.str() == "id,eigenvalue,residual\n");

  r.eigenvalues = {1.0, 2.5};
  r.residual_norms = {0.0009765625, 0.0625};
  std::ostringstream two;
  qpm::emit_eigen_csv(r, two);
  CHECK(two.str() == "id,eigenvalue,residual\n1,1,0.0009765625\n2,2.5,0.0625\n");

  std::ostringstream again;
  qpm::emit_eigen_csv(r, again);
  CHECK(again.str() == two.str());
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run({}) == 1);
  CHECK(run({"no-such-command"}) == 1);
  CHECK(run({"solve-source"}) == 1);  // --config is required
  CHECK(run({"solve-source", "--config", "/nonexistent/config.json"}) == 1);
  CHECK(run({"--help"}) == 0);
  CHECK(run({"solve-eigen", "--help"}) == 0);
}

TEST_CASE("dof-count reports the published cell") {
  TempFile cfg(R"json({
    "kind": "eigen",
    "projection-matrix": [
      ["1", "0", "0", "sqrt(5)", "0", "0"],
      ["0", "1", "0", "0", "sqrt(5)", "0"],
      ["0", "0", "1", "0", "0", "sqrt(5)"]
    ],
    "epsilon": "1"
  })json",
               "dof");
  TempFile out("", "dofout");
  CHECK(run({"dof-count", "--config", cfg.path(), "--N", "8", "--M", "6",
             "--out", out.path()}) == 0);
  std::string text = slurp(out.path());
  CHECK(text.find("N,M,DOF") != std::string::npos);
  CHECK(text.find("8,6,148174") != std::string::npos);

  // M <= 0 switches to the full box count: 2*(8^6 - 1)
  TempFile out2("", "dofout2");
  CHECK(run({"dof-count", "--config", cfg.path(), "--N", "8", "--M", "0",
             "--out", out2.path()}) == 0);
  CHECK(slurp(out2.path()).find("8,0,524286") != std::string::npos);
}

TEST_CASE("solve-source writes a coefficient table") {
  TempFile cfg(kTinySource, "src");
  TempFile out("", "srcout");
  CHECK(run({"solve-source", "--config", cfg.path(), "--out", out.path()}) == 0);
  std::string text = slurp(out.path());
  CHECK(text.rfind("id,k1,k2,k3,qnorm,u1_re,u1_im,u2_re,u2_im\n", 0) == 0);

  // byte-identical on a rerun
  TempFile out2("", "srcout2");
  CHECK(run({"solve-source", "--config", cfg.path(), "--out", out2.path()}) == 0);
  CHECK(slurp(out2.path()) == text);
}

TEST_CASE("solve-eigen emits the csv with one row per eigenvalue") {
  TempFile cfg(kTinyEigen, "eig");
  TempFile out("", "eigout");
  CHECK(run({"solve-eigen", "--config", cfg.path(), "--out", out.path()}) == 0);
  std::string text = slurp(out.path());
  REQUIRE(text.rfind("id,eigenvalue,residual\n", 0) == 0);
  int rows = 0;
  for (char c : text)
    if (c == '\n') ++rows;
  CHECK(rows == 1 + 4);
  CHECK(text.find("\n1,") != std::string::npos);
  CHECK(text.find("\n4,") != std::string::npos);
}

TEST_CASE("a self-referenced eigen study reports zero error") {
  TempFile cfg(R"json({
    "kind": "eigen",
    "projection-matrix": [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
    "N": 4,
    "M": 1.5,
    "epsilon": "1",
    "eigensolver": {"n-eigenvalues": 4, "krylov-dim": 30},
    "convergence": {"pairs": [[4, 1.5]], "reference": [4, 1.5]}
  })json",
               "conv");
  TempFile out("", "convout");
  CHECK(run({"convergence", "--config", cfg.path(), "--out", out.path()}) == 0);
  std::string text = slurp(out.path());
  CHECK(text.rfind("N,M,eigenvalue_error\n", 0) == 0);
  CHECK(text.find("4,1.5,0\n") != std::string::npos);
}

TEST_CASE("eval-field writes a point per grid site") {
  TempFile cfg(R"json({
    "kind": "source",
    "projection-matrix": [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
    "N": 4,
    "epsilon": "1",
    "w1": "0",
    "w2": "0",
    "w3": "sin(x1)",
    "field-grid": {"lo": 0.0, "hi": 1.0, "points": 2}
  })json",
               "grid");
  TempFile out("", "gridout");
  CHECK(run({"eval-field", "--config", cfg.path(), "--out", out.path()}) == 0);
  std::string text = slurp(out.path());
  REQUIRE(text.rfind("z1,z2,z3,ux,uy,uz\n", 0) == 0);
  int rows = 0;
  for (char c : text)
    if (c == '\n') ++rows;
  CHECK(rows == 1 + 8);
  // the first site is the box corner
  CHECK(text.find("\n0,0,0,") != std::string::npos);
}

TEST_CASE("convergence block is required for the study") {
  RunConfig cfg = qpm::parse_config_text(kTinyEigen, "inline");
  std::ostringstream os;
  CHECK_THROWS_AS(qpm::run_convergence_study(cfg, os), ConfigError);
}
