#ifndef QPM_LATTICE_HPP
#define QPM_LATTICE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qpm {

// The d x n matrix P mapping integer lattice modes k to physical wavevectors
// q = Pk. Physical dimension d is 3 for every solver path; smaller d appears
// only in unit tests. Entries are stored row-major.
struct ProjectionMatrix {
  int rows = 0;  // d
  int cols = 0;  // n
  std::vector<double> entries;

  ProjectionMatrix() = default;
  ProjectionMatrix(int d, int n, std::vector<double> vals);

  double operator()(int r, int c) const {
    return entries[static_cast<std::size_t>(r) * cols + c];
  }
};

// One lattice mode: integer index k, lifted wavevector q = Pk, and |q|.
struct ModeIndex {
  std::vector<int> k;
  std::vector<double> q;
  double qnorm = 0.0;
};

// Ordered set of nonzero modes k in the half-open box {-N/2, ..., N/2-1}^n,
// optionally filtered by the reduced-set bound on ||Pk||_inf. Ordering is
// column-major over the box (k1 fastest), which fixes the layout of every
// coefficient vector downstream. Storage is struct-of-arrays to keep large
// sets compact.
class IndexSet {
 public:
  const ProjectionMatrix& projection() const { return P_; }
  int n() const { return P_.cols; }
  int dim() const { return P_.rows; }
  int N() const { return N_; }
  bool reduced() const { return bound_.has_value(); }
  std::optional<double> bound() const { return bound_; }

  std::int64_t size() const { return static_cast<std::int64_t>(qnorms_.size()); }
  std::int64_t dof() const { return 2 * size(); }
  // cardinality counting the excluded zero mode as well
  std::int64_t total_with_zero() const { return total_with_zero_; }

  std::span<const std::int32_t> k(std::int64_t j) const {
    return {ks_.data() + static_cast<std::size_t>(j) * P_.cols,
            static_cast<std::size_t>(P_.cols)};
  }
  std::span<const double> q(std::int64_t j) const {
    return {qs_.data() + static_cast<std::size_t>(j) * P_.rows,
            static_cast<std::size_t>(P_.rows)};
  }
  double qnorm(std::int64_t j) const { return qnorms_[static_cast<std::size_t>(j)]; }

  ModeIndex mode(std::int64_t j) const;

 private:
  ProjectionMatrix P_;
  int N_ = 0;
  std::optional<double> bound_;
  std::int64_t total_with_zero_ = 0;
  std::vector<std::int32_t> ks_;
  std::vector<double> qs_;      // dim doubles per mode
  std::vector<double> qnorms_;  // |q| per mode
  std::vector<std::int64_t> ranks_;  // column-major box rank per mode, ascending

  static IndexSet build(const ProjectionMatrix& P, int N, std::optional<double> M);

  friend IndexSet build_index_set(const ProjectionMatrix& P, int N);
  friend IndexSet build_reduced_index_set(const ProjectionMatrix& P, int N, double M);
  friend std::optional<std::int64_t> linear_index(const IndexSet& set,
                                                 std::span<const int> k);
};

std::vector<double> phi(const ProjectionMatrix& P, std::span<const int> k);

IndexSet build_index_set(const ProjectionMatrix& P, int N);
IndexSet build_reduced_index_set(const ProjectionMatrix& P, int N, double M);

// Position of k in the set's ordering, or nullopt when k is the zero mode,
// outside the box, or filtered out by the reduced bound.
std::optional<std::int64_t> linear_index(const IndexSet& set, std::span<const int> k);

// Divergence-free DOF count of the full set without materializing it.
std::int64_t full_dof(int n, int N);

// Divergence-free DOF count of the reduced set, streaming over the box so
// that large N stay cheap in memory.
std::int64_t reduced_dof_count(const ProjectionMatrix& P, int N, double M);

}  // namespace qpm

#endif
