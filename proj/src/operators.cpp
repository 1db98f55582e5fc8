#include "qpm/operators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qpm {

OperatorPlan::OperatorPlan(IndexSet set, PermittivityField eps, double kappa)
    : set_(std::move(set)),
      tables_(assemble_frame_tables(set_)),
      grid_(make_grid_spec(set_.n(), eps.points_per_dim)),
      eps_(std::move(eps)),
      kappa_(kappa) {
  if (eps_.n != set_.n())
    throw std::invalid_argument("permittivity grid dimension does not match the index set");
  if (eps_.points_per_dim < set_.N())
    throw std::invalid_argument("permittivity grid is coarser than the mode box");
  if (kappa_ < 0.0) throw std::invalid_argument("kappa must be nonnegative");
  fft_ = std::make_unique<FourierTransformer>(grid_);
  map_ = build_mode_map(set_, grid_.N);
  vmode_.resize(static_cast<std::size_t>(set_.size()) * 3);
  box_.resize(static_cast<std::size_t>(grid_.total_points));
}

void OperatorPlan::check_len(std::size_t len) const {
  if (len != static_cast<std::size_t>(dof()))
    throw std::invalid_argument("coefficient length " + std::to_string(len) +
                                " does not match operator DOF " + std::to_string(dof()));
}

void OperatorPlan::apply_multiplier(std::span<const Complex> b, std::span<Complex> out) {
  check_len(b.size());
  check_len(out.size());
  const std::size_t L = static_cast<std::size_t>(set_.size());

  // expand (u1, u2) -> full 3-vector coefficients via the frame rows
  for (std::size_t j = 0; j < L; ++j) {
    const Complex u1 = b[j];
    const Complex u2 = b[L + j];
    for (int c = 0; c < 3; ++c)
      vmode_[j * 3 + c] = u1 * tables_.r[j * 3 + c] + u2 * tables_.s[j * 3 + c];
  }

  // one Cartesian component at a time through the grid: scatter into the
  // box, to physical space, multiply by 1/eps, back, and gather in place
  for (int c = 0; c < 3; ++c) {
    std::fill(box_.begin(), box_.end(), Complex(0.0));
    for (std::size_t j = 0; j < L; ++j)
      box_[static_cast<std::size_t>(map_[j])] = vmode_[j * 3 + c];
    fft_->backward(box_, box_);
    for (std::size_t i = 0; i < box_.size(); ++i) box_[i] *= eps_.inverse_values[i];
    fft_->forward(box_, box_);
    for (std::size_t j = 0; j < L; ++j)
      vmode_[j * 3 + c] = box_[static_cast<std::size_t>(map_[j])];
  }

  // project back onto the divergence-free pair, dropping the q-parallel part
  for (std::size_t j = 0; j < L; ++j) {
    Complex u1 = 0.0, u2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      u1 += vmode_[j * 3 + c] * tables_.r[j * 3 + c];
      u2 += vmode_[j * 3 + c] * tables_.s[j * 3 + c];
    }
    out[j] = u1;
    out[L + j] = u2;
  }
}

void OperatorPlan::apply_source(std::span<const Complex> b, std::span<Complex> out) {
  check_len(b.size());
  check_len(out.size());
  if (kappa_ <= 0.0)
    throw std::invalid_argument("source operator requires kappa > 0");
  const std::size_t L = static_cast<std::size_t>(set_.size());

  // first curl into out, used as scratch for the multiplier input
  std::vector<Complex> curled(2 * L);
  for (std::size_t j = 0; j < L; ++j) {
    const Complex iq(0.0, tables_.t_abs[j]);
    curled[j] = -iq * b[L + j];
    curled[L + j] = iq * b[j];
  }
  apply_multiplier(curled, out);
  // second curl plus the kappa shift
  for (std::size_t j = 0; j < L; ++j) {
    const Complex iq(0.0, tables_.t_abs[j]);
    const Complex o1 = out[j];
    const Complex o2 = out[L + j];
    out[j] = -iq * o2 + kappa_ * b[j];
    out[L + j] = iq * o1 + kappa_ * b[L + j];
  }
}

void OperatorPlan::apply_eigen(std::span<const Complex> b, std::span<Complex> out) {
  check_len(b.size());
  check_len(out.size());
  const std::size_t L = static_cast<std::size_t>(set_.size());
  apply_multiplier(b, out);
  for (std::size_t j = 0; j < L; ++j) {
    const double q2 = tables_.t_abs[j] * tables_.t_abs[j];
    out[j] *= q2;
    out[L + j] *= q2;
  }
}

DivFreeCoeffs OperatorPlan::apply_source(const DivFreeCoeffs& b) {
  DivFreeCoeffs out;
  out.values.resize(b.values.size());
  apply_source(b.values, out.values);
  return out;
}

DivFreeCoeffs OperatorPlan::apply_eigen(const DivFreeCoeffs& b) {
  DivFreeCoeffs out;
  out.values.resize(b.values.size());
  apply_eigen(b.values, out.values);
  return out;
}

namespace {

// DFT of the sampled 1/eps grid by separable one-dimensional naive sums,
// normalized by the point count: kernel[t] = (1/G^n) sum_m g(m) e^{-i<t,m>h}.
std::vector<Complex> convolution_kernel(const PermittivityField& eps) {
  const int n = eps.n;
  const int G = eps.points_per_dim;
  const std::size_t total = eps.inverse_values.size();

  std::vector<Complex> work(eps.inverse_values.begin(), eps.inverse_values.end());
  std::vector<Complex> next(total);

  // twiddle table e^{-2 pi i a/G}
  std::vector<Complex> tw(static_cast<std::size_t>(G));
  for (int a = 0; a < G; ++a) {
    double ang = -2.0 * M_PI * a / G;
    tw[static_cast<std::size_t>(a)] = Complex(std::cos(ang), std::sin(ang));
  }

  std::size_t stride = 1;
  for (int axis = 0; axis < n; ++axis) {
    const std::size_t block = stride * static_cast<std::size_t>(G);
    for (std::size_t base = 0; base < total; base += block) {
      for (std::size_t off = 0; off < stride; ++off) {
        for (int t = 0; t < G; ++t) {
          Complex acc = 0.0;
          for (int m = 0; m < G; ++m)
            acc += work[base + off + stride * m] *
                   tw[static_cast<std::size_t>((static_cast<std::int64_t>(t) * m) % G)];
          next[base + off + stride * t] = acc;
        }
      }
    }
    std::swap(work, next);
    stride = block;
  }
  const double scale = 1.0 / static_cast<double>(total);
  for (auto& v : work) v *= scale;
  return work;
}

}  // namespace

std::vector<Complex> dense_oracle(const IndexSet& set, const PermittivityField& eps,
                                  double kappa, OracleForm form) {
  const std::int64_t dof = set.dof();
  if (dof > 512)
    throw std::invalid_argument("dense oracle limited to DOF <= 512, requested " +
                                std::to_string(dof));
  if (eps.n != set.n() || eps.points_per_dim < set.N())
    throw std::invalid_argument("permittivity grid does not match the index set");
  if (form == OracleForm::Source && kappa <= 0.0)
    throw std::invalid_argument("source oracle requires kappa > 0");

  const int n = set.n();
  const int G = eps.points_per_dim;
  const std::int64_t L = set.size();
  const std::vector<Complex> kernel = convolution_kernel(eps);
  const FrameTables tables = assemble_frame_tables(set);

  auto frame_row = [&](std::int64_t j, int which, int c) {
    return which == 0 ? tables.r[static_cast<std::size_t>(j) * 3 + c]
                      : tables.s[static_cast<std::size_t>(j) * 3 + c];
  };

  // M[(jr,lr),(jc,lc)] = kernel[wrap(k_jr - k_jc)] * <d_lr(q_jr), d_lc(q_jc)>
  std::vector<Complex> M(static_cast<std::size_t>(dof) * static_cast<std::size_t>(dof));
  auto at = [&](std::int64_t r, std::int64_t c) -> Complex& {
    return M[static_cast<std::size_t>(r) * static_cast<std::size_t>(dof) +
             static_cast<std::size_t>(c)];
  };
  for (std::int64_t jr = 0; jr < L; ++jr) {
    auto kr = set.k(jr);
    for (std::int64_t jc = 0; jc < L; ++jc) {
      auto kc = set.k(jc);
      std::int64_t lin = 0;
      std::int64_t stride = 1;
      for (int i = 0; i < n; ++i) {
        int diff = ((kr[i] - kc[i]) % G + G) % G;
        lin += diff * stride;
        stride *= G;
      }
      const Complex ck = kernel[static_cast<std::size_t>(lin)];
      for (int lr = 0; lr < 2; ++lr) {
        for (int lc = 0; lc < 2; ++lc) {
          double dot = 0.0;
          for (int c = 0; c < 3; ++c) dot += frame_row(jr, lr, c) * frame_row(jc, lc, c);
          at(lr * L + jr, lc * L + jc) = ck * dot;
        }
      }
    }
  }
  if (form == OracleForm::Multiplier) return M;

  if (form == OracleForm::Eigen) {
    // H = diag(|q|^2) M
    for (std::int64_t jr = 0; jr < L; ++jr) {
      const double q2 = set.qnorm(jr) * set.qnorm(jr);
      for (std::int64_t c = 0; c < dof; ++c) {
        at(jr, c) *= q2;
        at(L + jr, c) *= q2;
      }
    }
    return M;
  }

  // Source form: C M C + kappa I with the per-mode curl blocks
  // C (u1,u2) = (-i|q| u2, +i|q| u1) applied on both sides.
  std::vector<Complex> H(M.size());
  auto hat = [&](std::int64_t r, std::int64_t c) -> Complex& {
    return H[static_cast<std::size_t>(r) * static_cast<std::size_t>(dof) +
             static_cast<std::size_t>(c)];
  };
  for (std::int64_t jr = 0; jr < L; ++jr) {
    const Complex iqr(0.0, set.qnorm(jr));
    for (std::int64_t jc = 0; jc < L; ++jc) {
      const Complex iqc(0.0, set.qnorm(jc));
      // right multiplication by C maps column pair, left by C maps row pair
      const Complex m11 = at(jr, jc), m12 = at(jr, L + jc);
      const Complex m21 = at(L + jr, jc), m22 = at(L + jr, L + jc);
      // (M C) columns: col1 = i|qc| * m(:,2), col2 = -i|qc| * m(:,1)
      const Complex a11 = iqc * m12, a12 = -iqc * m11;
      const Complex a21 = iqc * m22, a22 = -iqc * m21;
      // C (M C) rows: row1 = -i|qr| * a(2,:), row2 = i|qr| * a(1,:)
      hat(jr, jc) = -iqr * a21;
      hat(jr, L + jc) = -iqr * a22;
      hat(L + jr, jc) = iqr * a11;
      hat(L + jr, L + jc) = iqr * a12;
    }
  }
  for (std::int64_t r = 0; r < dof; ++r) hat(r, r) += kappa;
  return H;
}

}  // namespace qpm
