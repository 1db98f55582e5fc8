#ifndef QPM_PERMITTIVITY_HPP
#define QPM_PERMITTIVITY_HPP

#include <vector>

#include "qpm/expression.hpp"

namespace qpm {

// Pointwise samples of a permittivity on the uniform n-dimensional torus grid
// x = (m1 h, ..., mn h), h = 2*pi/N, stored column-major (m1 fastest).  The
// reciprocal is precomputed because the solver only ever multiplies by 1/eps.
struct PermittivityField {
  std::vector<double> grid_values;
  std::vector<double> inverse_values;
  double eps_min = 0.0;
  double eps_max = 0.0;
  int n = 0;
  int points_per_dim = 0;
};

Expression parse_expression(const std::string& text, int n_vars);

// Evaluates e at every grid point of the N^n torus grid, column-major.
// No sign constraint; used for manufactured-source components as well.
std::vector<double> sample_values(const Expression& e, int n, int N);

// Same sampling, but validates strict positivity and records the observed
// bounds. Throws EvalError if any grid value is <= 0.
PermittivityField sample_on_grid(const Expression& e, int n, int N);

}  // namespace qpm

#endif
