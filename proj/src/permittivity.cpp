#include "qpm/permittivity.hpp"

#include <cmath>
#include <cstdint>

namespace qpm {

Expression parse_expression(const std::string& text, int n_vars) {
  return Expression::parse(text, n_vars);
}

std::vector<double> sample_values(const Expression& e, int n, int N) {
  if (n < 1) throw EvalError("grid dimension must be at least 1");
  if (N < 2 || N % 2 != 0) throw EvalError("grid size must be even and at least 2");

  std::int64_t total = 1;
  for (int i = 0; i < n; ++i) total *= N;

  const double h = 2.0 * M_PI / N;
  std::vector<double> out(static_cast<std::size_t>(total));
  std::vector<int> m(n, 0);
  std::vector<double> x(n, 0.0);
  for (std::int64_t g = 0; g < total; ++g) {
    out[static_cast<std::size_t>(g)] = e.evaluate(x);
    // odometer over grid indices, first coordinate fastest
    for (int i = 0; i < n; ++i) {
      if (++m[i] < N) {
        x[i] = m[i] * h;
        break;
      }
      m[i] = 0;
      x[i] = 0.0;
    }
  }
  return out;
}

PermittivityField sample_on_grid(const Expression& e, int n, int N) {
  PermittivityField f;
  f.n = n;
  f.points_per_dim = N;
  f.grid_values = sample_values(e, n, N);

  f.eps_min = f.grid_values[0];
  f.eps_max = f.grid_values[0];
  for (double v : f.grid_values) {
    if (v < f.eps_min) f.eps_min = v;
    if (v > f.eps_max) f.eps_max = v;
  }
  if (f.eps_min <= 0.0)
    throw EvalError("permittivity must be strictly positive on the grid (min " +
                    std::to_string(f.eps_min) + ")");

  f.inverse_values.resize(f.grid_values.size());
  for (std::size_t i = 0; i < f.grid_values.size(); ++i)
    f.inverse_values[i] = 1.0 / f.grid_values[i];
  return f;
}

}  // namespace qpm
