#ifndef QPM_VERIFICATION_HPP
#define QPM_VERIFICATION_HPP

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qpm {

enum class ToleranceKind { Exact, Absolute, Relative, OrderOfMagnitude };

// How a fixture row's actual value is compared against its expected value.
// OrderOfMagnitude accepts a ratio within [0.1, 10]; it is meant for error
// magnitudes whose reference runs are not bit-reproducible.
struct TolerancePolicy {
  ToleranceKind kind = ToleranceKind::Exact;
  double tau = 0.0;

  static TolerancePolicy exact() { return {ToleranceKind::Exact, 0.0}; }
  static TolerancePolicy absolute(double tau) { return {ToleranceKind::Absolute, tau}; }
  static TolerancePolicy relative(double tau) { return {ToleranceKind::Relative, tau}; }
  static TolerancePolicy order_of_magnitude() {
    return {ToleranceKind::OrderOfMagnitude, 10.0};
  }

  bool accepts(double expected, double actual) const;
  // the measured delta under this policy (absolute difference, relative
  // difference, or ratio), for reporting
  double deviation(double expected, double actual) const;
  std::string describe() const;
};

// One expected-vs-actual comparison produced by a fixture run. Rows without
// their own policy fall back to the fixture default.
struct CheckRow {
  std::string label;
  double expected = 0.0;
  double actual = 0.0;
  std::optional<TolerancePolicy> policy;
};

// A golden check: a frozen parameter snapshot, the origin of its expected
// numbers, and a callable producing the comparisons. Fixtures without a
// provenance entry are rejected by the suite runner.
struct GoldenFixture {
  std::string name;
  std::string config;
  std::string provenance;
  TolerancePolicy policy = TolerancePolicy::exact();
  std::function<std::vector<CheckRow>()> run;
};

struct RowOutcome {
  std::string label;
  double expected = 0.0;
  double actual = 0.0;
  double deviation = 0.0;
  bool passed = false;
  std::string policy;
};

struct FixtureOutcome {
  std::string name;
  std::string config;
  std::string provenance;
  bool passed = false;
  bool errored = false;    // the run callable threw; message in `error`
  std::string error;
  double seconds = 0.0;    // informational timing, not asserted
  std::vector<RowOutcome> rows;
};

struct SuiteReport {
  std::vector<FixtureOutcome> fixtures;
  int passed = 0;
  int failed = 0;
  double seconds = 0.0;

  bool all_passed() const { return failed == 0; }
};

// The bundled acceptance fixtures, one per headline claim the artifact
// reproduces. Heavy runs happen inside the run callables, not here.
std::vector<GoldenFixture> acceptance_fixtures();

// Runs every fixture whose name contains `filter` (all when empty) and
// compares rows under the applicable policies. Exceptions inside a fixture
// become a failed outcome, never a crash of the suite.
SuiteReport run_suite(const std::vector<GoldenFixture>& fixtures,
                      const std::string& filter = {});

void write_text_report(const SuiteReport& report, std::ostream& os);
void write_junit_report(const SuiteReport& report, std::ostream& os);

}  // namespace qpm

#endif
