#include "qpm/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qpm {

namespace {

// Slack on the reduced-set comparison ||Pk||_inf <= M so that irrational
// entries sitting numerically on the boundary do not flap between builds.
constexpr double kBoundSlack = 1e-12;

void check_even(int N) {
  if (N < 2 || N % 2 != 0)
    throw std::invalid_argument("per-dimension truncation N must be even and >= 2, got " +
                                std::to_string(N));
}

// Shared enumeration core. Walks the half-open box {-N/2..N/2-1}^n in
// column-major order (k1 fastest) and hands every nonzero k with q = Pk to
// the sink. Returns the count of accepted modes.
template <class Sink>
std::int64_t walk_box(const ProjectionMatrix& P, int N, double bound, Sink&& sink) {
  const int n = P.cols;
  const int d = P.rows;
  const int lo = -N / 2;
  const int hi = N / 2;  // exclusive

  std::vector<int> k(n, lo);
  std::vector<double> q(d);
  std::int64_t accepted = 0;
  for (;;) {
    bool zero = std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
    if (!zero) {
      for (int r = 0; r < d; ++r) {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += P(r, c) * k[c];
        q[r] = s;
      }
      double qinf = 0.0;
      for (int r = 0; r < d; ++r) qinf = std::max(qinf, std::abs(q[r]));
      if (qinf <= bound + kBoundSlack) {
        sink(k, q);
        ++accepted;
      }
    }
    int i = 0;
    while (i < n && ++k[i] == hi) k[i++] = lo;
    if (i == n) return accepted;
  }
}

std::int64_t box_rank(std::span<const int> k, int N) {
  std::int64_t rank = 0;
  std::int64_t stride = 1;
  for (std::size_t i = 0; i < k.size(); ++i) {
    rank += (k[i] + N / 2) * stride;
    stride *= N;
  }
  return rank;
}

}  // namespace

IndexSet IndexSet::build(const ProjectionMatrix& P, int N, std::optional<double> M) {
  check_even(N);
  if (M && *M <= 0.0)
    throw std::invalid_argument("reduced-set bound M must be positive");

  IndexSet set;
  set.P_ = P;
  set.N_ = N;
  set.bound_ = M;

  const double bound = M ? *M : std::numeric_limits<double>::infinity();
  std::int64_t count = walk_box(P, N, bound, [](auto&, auto&) {});
  set.ks_.reserve(count * P.cols);
  set.qs_.reserve(count * P.rows);
  set.qnorms_.reserve(count);
  set.ranks_.reserve(count);

  walk_box(P, N, bound, [&](const std::vector<int>& k, const std::vector<double>& q) {
    for (int v : k) set.ks_.push_back(v);
    double sq = 0.0;
    for (double v : q) {
      set.qs_.push_back(v);
      sq += v * v;
    }
    set.qnorms_.push_back(std::sqrt(sq));
    set.ranks_.push_back(box_rank(k, N));
  });
  // zero mode always passes the filter, so it contributes one to the total
  set.total_with_zero_ = count + 1;
  return set;
}

ProjectionMatrix::ProjectionMatrix(int d, int n, std::vector<double> vals)
    : rows(d), cols(n), entries(std::move(vals)) {
  if (d < 1 || n < d)
    throw std::invalid_argument("projection matrix needs 1 <= d <= n");
  if (entries.size() != static_cast<std::size_t>(d) * n)
    throw std::invalid_argument("projection matrix entry count does not match d*n");
  for (int c = 0; c < n; ++c) {
    bool all_zero = true;
    for (int r = 0; r < d; ++r)
      if ((*this)(r, c) != 0.0) all_zero = false;
    if (all_zero)
      throw std::invalid_argument("projection matrix column " + std::to_string(c + 1) +
                                  " is zero");
  }
}

std::vector<double> phi(const ProjectionMatrix& P, std::span<const int> k) {
  if (static_cast<int>(k.size()) != P.cols)
    throw std::invalid_argument("mode index length " + std::to_string(k.size()) +
                                " does not match projection matrix columns " +
                                std::to_string(P.cols));
  std::vector<double> q(P.rows, 0.0);
  for (int r = 0; r < P.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < P.cols; ++c) s += P(r, c) * k[c];
    q[r] = s;
  }
  return q;
}

ModeIndex IndexSet::mode(std::int64_t j) const {
  ModeIndex m;
  auto kk = k(j);
  auto qq = q(j);
  m.k.assign(kk.begin(), kk.end());
  m.q.assign(qq.begin(), qq.end());
  m.qnorm = qnorm(j);
  return m;
}

IndexSet build_index_set(const ProjectionMatrix& P, int N) {
  return IndexSet::build(P, N, std::nullopt);
}

IndexSet build_reduced_index_set(const ProjectionMatrix& P, int N, double M) {
  return IndexSet::build(P, N, M);
}

std::optional<std::int64_t> linear_index(const IndexSet& set, std::span<const int> k) {
  if (static_cast<int>(k.size()) != set.n()) return std::nullopt;
  const int half = set.N() / 2;
  bool zero = true;
  for (int v : k) {
    if (v < -half || v >= half) return std::nullopt;
    if (v != 0) zero = false;
  }
  if (zero) return std::nullopt;
  std::int64_t rank = box_rank(k, set.N());
  auto it = std::lower_bound(set.ranks_.begin(), set.ranks_.end(), rank);
  if (it == set.ranks_.end() || *it != rank) return std::nullopt;
  return static_cast<std::int64_t>(it - set.ranks_.begin());
}

std::int64_t full_dof(int n, int N) {
  check_even(N);
  std::int64_t total = 1;
  for (int i = 0; i < n; ++i) total *= N;
  return 2 * (total - 1);
}

std::int64_t reduced_dof_count(const ProjectionMatrix& P, int N, double M) {
  check_even(N);
  if (M <= 0.0) throw std::invalid_argument("reduced-set bound M must be positive");
  return 2 * walk_box(P, N, M, [](auto&, auto&) {});
}

}  // namespace qpm
