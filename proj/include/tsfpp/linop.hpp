#pragma once

// Matrix-free linear operators with adjoints, spectral-norm estimation, and
// the concrete operators used by the solvers: circular differences, the
// isotropic-TV stencil, the undecimated single-level Haar transform and a
// masked orthonormal 2-D Fourier transform.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

namespace tsfpp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

class LinearOperator {
 public:
  using ApplyFn = std::function<Vec(const Vec&)>;

  LinearOperator() = default;
  LinearOperator(Index rows, Index cols, ApplyFn forward, ApplyFn adjoint,
                 std::string label)
      : rows_(rows),
        cols_(cols),
        forward_(std::move(forward)),
        adjoint_(std::move(adjoint)),
        label_(std::move(label)) {
    if (rows_ <= 0 || cols_ <= 0)
      throw std::invalid_argument("LinearOperator: dimensions must be positive");
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const std::string& label() const { return label_; }

  Vec apply(const Vec& u) const {
    if (u.size() != cols_)
      throw std::invalid_argument("apply(" + label_ + "): expected length " +
                                  std::to_string(cols_) + ", got " +
                                  std::to_string(u.size()));
    return forward_(u);
  }

  Vec apply_adjoint(const Vec& w) const {
    if (w.size() != rows_)
      throw std::invalid_argument("apply_adjoint(" + label_ +
                                  "): expected length " + std::to_string(rows_) +
                                  ", got " + std::to_string(w.size()));
    return adjoint_(w);
  }

  // Materializes the operator column by column. Intended for desk-scale
  // cross-checks only.
  Mat to_dense() const {
    Mat m(rows_, cols_);
    Vec e = Vec::Zero(cols_);
    for (Index j = 0; j < cols_; ++j) {
      e[j] = 1.0;
      m.col(j) = apply(e);
      e[j] = 0.0;
    }
    return m;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  ApplyFn forward_;
  ApplyFn adjoint_;
  std::string label_;
};

inline LinearOperator make_identity(Index n) {
  auto id = [](const Vec& u) { return u; };
  return LinearOperator(n, n, id, id, "I");
}

inline LinearOperator make_dense(const Mat& m, std::string label = "dense") {
  auto mat = std::make_shared<Mat>(m);
  return LinearOperator(
      m.rows(), m.cols(), [mat](const Vec& u) -> Vec { return (*mat) * u; },
      [mat](const Vec& w) -> Vec { return mat->transpose() * w; },
      std::move(label));
}

// The formal adjoint as an operator in its own right (forward and adjoint
// swapped).
inline LinearOperator make_adjoint(const LinearOperator& op) {
  return LinearOperator(
      op.cols(), op.rows(), [op](const Vec& w) { return op.apply_adjoint(w); },
      [op](const Vec& u) { return op.apply(u); }, op.label() + "^T");
}

inline LinearOperator make_scaled(double c, const LinearOperator& op) {
  return LinearOperator(
      op.rows(), op.cols(), [c, op](const Vec& u) -> Vec { return c * op.apply(u); },
      [c, op](const Vec& w) -> Vec { return c * op.apply_adjoint(w); },
      op.label());
}

// Circulant first-difference matrix: 1 on the diagonal, -1 on the
// subdiagonal and -1 in the top-right corner (periodic boundary).
inline LinearOperator make_difference(Index r) {
  if (r < 2) throw std::invalid_argument("make_difference: r must be >= 2");
  auto fwd = [r](const Vec& u) {
    Vec out(r);
    out[0] = u[0] - u[r - 1];
    for (Index i = 1; i < r; ++i) out[i] = u[i] - u[i - 1];
    return out;
  };
  auto adj = [r](const Vec& w) {
    Vec out(r);
    for (Index i = 0; i + 1 < r; ++i) out[i] = w[i] - w[i + 1];
    out[r - 1] = w[r - 1] - w[0];
    return out;
  };
  return LinearOperator(r, r, fwd, adj, "D" + std::to_string(r));
}

namespace detail {

// Images are stored column-major: pixel (i, j) of a d1 x d2 image sits at
// index i + j*d1.
inline Index pix(Index i, Index j, Index d1) { return i + j * d1; }

}  // namespace detail

// Periodic discrete gradient of a d1 x d2 image: the first d = d1*d2 output
// components are the within-column (vertical) differences, the last d the
// across-column (horizontal) ones. Equivalent to stacking I_{d2} (x) D_{d1}
// over D_{d2} (x) I_{d1} without forming the Kronecker products.
inline LinearOperator make_tv(Index d1, Index d2) {
  if (d1 < 2 || d2 < 2) throw std::invalid_argument("make_tv: dims must be >= 2");
  const Index d = d1 * d2;
  auto fwd = [d1, d2, d](const Vec& u) {
    Vec out(2 * d);
    for (Index j = 0; j < d2; ++j)
      for (Index i = 0; i < d1; ++i) {
        const Index im = (i == 0) ? d1 - 1 : i - 1;
        const Index jm = (j == 0) ? d2 - 1 : j - 1;
        out[detail::pix(i, j, d1)] =
            u[detail::pix(i, j, d1)] - u[detail::pix(im, j, d1)];
        out[d + detail::pix(i, j, d1)] =
            u[detail::pix(i, j, d1)] - u[detail::pix(i, jm, d1)];
      }
    return out;
  };
  auto adj = [d1, d2, d](const Vec& w) {
    Vec out = Vec::Zero(d);
    for (Index j = 0; j < d2; ++j)
      for (Index i = 0; i < d1; ++i) {
        const Index im = (i == 0) ? d1 - 1 : i - 1;
        const Index jm = (j == 0) ? d2 - 1 : j - 1;
        const double v = w[detail::pix(i, j, d1)];
        const double h = w[d + detail::pix(i, j, d1)];
        out[detail::pix(i, j, d1)] += v + h;
        out[detail::pix(im, j, d1)] -= v;
        out[detail::pix(i, jm, d1)] -= h;
      }
    return out;
  };
  return LinearOperator(2 * d, d, fwd, adj, "B");
}

// Single-level undecimated 2-D Haar transform with periodic boundaries.
// Filters are (1/2)(1,1) low-pass and (1/2)(1,-1) high-pass per axis; output
// blocks are stacked LL, LH, HL, HH, so rows = 4*d1*d2. The upper d x d
// block (LL) annihilates nothing and carries constants; the other three
// blocks annihilate constant images.
inline LinearOperator make_undecimated_haar(Index d1, Index d2) {
  if (d1 < 2 || d2 < 2 || d1 % 2 != 0 || d2 % 2 != 0)
    throw std::invalid_argument("make_undecimated_haar: dims must be even and >= 2");
  const Index d = d1 * d2;
  // s1 weights the pixel itself, s2 its periodic successor along the axis.
  auto filt_rows = [d1, d2](const Vec& u, double s1, double s2) {
    Vec out(d1 * d2);
    for (Index j = 0; j < d2; ++j)
      for (Index i = 0; i < d1; ++i) {
        const Index ip = (i + 1 == d1) ? 0 : i + 1;
        out[detail::pix(i, j, d1)] =
            s1 * u[detail::pix(i, j, d1)] + s2 * u[detail::pix(ip, j, d1)];
      }
    return out;
  };
  auto filt_cols = [d1, d2](const Vec& u, double s1, double s2) {
    Vec out(d1 * d2);
    for (Index j = 0; j < d2; ++j) {
      const Index jp = (j + 1 == d2) ? 0 : j + 1;
      for (Index i = 0; i < d1; ++i)
        out[detail::pix(i, j, d1)] =
            s1 * u[detail::pix(i, j, d1)] + s2 * u[detail::pix(i, jp, d1)];
    }
    return out;
  };
  // Adjoint of out[i] = s1*u[i] + s2*u[i+1] is out[i] = s1*w[i] + s2*w[i-1].
  auto filt_rows_adj = [d1, d2](const Vec& w, double s1, double s2) {
    Vec out(d1 * d2);
    for (Index j = 0; j < d2; ++j)
      for (Index i = 0; i < d1; ++i) {
        const Index im = (i == 0) ? d1 - 1 : i - 1;
        out[detail::pix(i, j, d1)] =
            s1 * w[detail::pix(i, j, d1)] + s2 * w[detail::pix(im, j, d1)];
      }
    return out;
  };
  auto filt_cols_adj = [d1, d2](const Vec& w, double s1, double s2) {
    Vec out(d1 * d2);
    for (Index j = 0; j < d2; ++j) {
      const Index jm = (j == 0) ? d2 - 1 : j - 1;
      for (Index i = 0; i < d1; ++i)
        out[detail::pix(i, j, d1)] =
            s1 * w[detail::pix(i, j, d1)] + s2 * w[detail::pix(i, jm, d1)];
    }
    return out;
  };
  const double h = 0.5;
  auto fwd = [=](const Vec& u) {
    Vec lo_r = filt_rows(u, h, h);
    Vec hi_r = filt_rows(u, h, -h);
    Vec out(4 * d);
    out.segment(0, d) = filt_cols(lo_r, h, h);       // LL
    out.segment(d, d) = filt_cols(hi_r, h, h);       // LH (high along rows)
    out.segment(2 * d, d) = filt_cols(lo_r, h, -h);  // HL (high along cols)
    out.segment(3 * d, d) = filt_cols(hi_r, h, -h);  // HH
    return out;
  };
  auto adj = [=](const Vec& w) {
    Vec ll = filt_cols_adj(w.segment(0, d), h, h);
    Vec lh = filt_cols_adj(w.segment(d, d), h, h);
    Vec hl = filt_cols_adj(w.segment(2 * d, d), h, -h);
    Vec hh = filt_cols_adj(w.segment(3 * d, d), h, -h);
    Vec lo = filt_rows_adj(ll + hl, h, h);
    Vec hi = filt_rows_adj(lh + hh, h, -h);
    return Vec(lo + hi);
  };
  return LinearOperator(4 * d, d, fwd, adj, "W");
}

namespace detail {

// Shared FFTW plans for one grid size. Plans are created once per operator
// with FFTW_ESTIMATE (deterministic) and executed through the new-array
// interface so concurrent applies each use their own buffers.
class Fft2 {
 public:
  Fft2(Index d1, Index d2) : d1_(d1), d2_(d2) {
    std::vector<std::complex<double>> scratch(static_cast<size_t>(d1 * d2));
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    // FFTW's first dimension is the slowest-varying one; column-major
    // storage makes the column index slowest, hence (d2, d1).
    fwd_ = fftw_plan_dft_2d(static_cast<int>(d2), static_cast<int>(d1), p, p,
                            FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    bwd_ = fftw_plan_dft_2d(static_cast<int>(d2), static_cast<int>(d1), p, p,
                            FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!fwd_ || !bwd_) throw std::runtime_error("Fft2: planning failed");
  }
  ~Fft2() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  void forward(std::vector<std::complex<double>>& buf) const {
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_execute_dft(fwd_, p, p);
  }
  void backward(std::vector<std::complex<double>>& buf) const {
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_execute_dft(bwd_, p, p);
  }

 private:
  Index d1_, d2_;
  fftw_plan fwd_, bwd_;
};

}  // namespace detail

// Orthonormal 2-D DFT of a real d1 x d2 image restricted to a set of
// frequency indices, returned as stacked real then imaginary parts
// (rows = 2*|mask|). Frequencies are flattened k1 + k2*d1 in standard DFT
// indexing. The adjoint embeds the masked coefficients, inverse-transforms
// and keeps the real part. With the 1/sqrt(d) scaling the operator norm is
// at most 1.
inline LinearOperator make_partial_fourier(Index d1, Index d2,
                                           std::vector<Index> mask) {
  if (d1 < 2 || d2 < 2)
    throw std::invalid_argument("make_partial_fourier: dims must be >= 2");
  const Index d = d1 * d2;
  if (mask.empty()) throw std::invalid_argument("make_partial_fourier: empty mask");
  for (Index f : mask)
    if (f < 0 || f >= d)
      throw std::invalid_argument("make_partial_fourier: mask index out of range");
  auto fft = std::make_shared<detail::Fft2>(d1, d2);
  auto msk = std::make_shared<std::vector<Index>>(std::move(mask));
  const Index p = static_cast<Index>(msk->size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  auto fwd = [fft, msk, d, p, scale](const Vec& u) {
    std::vector<std::complex<double>> buf(static_cast<size_t>(d));
    for (Index i = 0; i < d; ++i) buf[static_cast<size_t>(i)] = u[i];
    fft->forward(buf);
    Vec out(2 * p);
    for (Index t = 0; t < p; ++t) {
      const auto z = buf[static_cast<size_t>((*msk)[t])] * scale;
      out[t] = z.real();
      out[p + t] = z.imag();
    }
    return out;
  };
  auto adj = [fft, msk, d, p, scale](const Vec& w) {
    std::vector<std::complex<double>> buf(static_cast<size_t>(d),
                                          std::complex<double>(0, 0));
    for (Index t = 0; t < p; ++t)
      buf[static_cast<size_t>((*msk)[t])] = {w[t], w[p + t]};
    fft->backward(buf);
    Vec out(d);
    for (Index i = 0; i < d; ++i) out[i] = buf[static_cast<size_t>(i)].real() * scale;
    return out;
  };
  return LinearOperator(2 * p, d, fwd, adj, "K");
}

// Row concatenation A = [A_1 ... A_s] acting on the stacked block vector;
// all blocks must share the output dimension.
class BlockRowOperator {
 public:
  explicit BlockRowOperator(std::vector<LinearOperator> blocks)
      : blocks_(std::move(blocks)) {
    if (blocks_.empty())
      throw std::invalid_argument("BlockRowOperator: no blocks");
    rows_ = blocks_[0].rows();
    cols_ = 0;
    for (const auto& b : blocks_) {
      if (b.rows() != rows_)
        throw std::invalid_argument("BlockRowOperator: row mismatch");
      cols_ += b.cols();
    }
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  const LinearOperator& block(Index i) const { return blocks_[static_cast<size_t>(i)]; }

  Vec apply(const Vec& u) const {
    if (u.size() != cols_)
      throw std::invalid_argument("BlockRowOperator::apply: size mismatch");
    Vec out = Vec::Zero(rows_);
    Index off = 0;
    for (const auto& b : blocks_) {
      out += b.apply(u.segment(off, b.cols()));
      off += b.cols();
    }
    return out;
  }

  Vec apply_adjoint(const Vec& w) const {
    if (w.size() != rows_)
      throw std::invalid_argument("BlockRowOperator::apply_adjoint: size mismatch");
    Vec out(cols_);
    Index off = 0;
    for (const auto& b : blocks_) {
      out.segment(off, b.cols()) = b.apply_adjoint(w);
      off += b.cols();
    }
    return out;
  }

  LinearOperator as_operator() const {
    BlockRowOperator self = *this;
    return LinearOperator(
        rows_, cols_, [self](const Vec& u) { return self.apply(u); },
        [self](const Vec& w) { return self.apply_adjoint(w); }, "A");
  }

 private:
  std::vector<LinearOperator> blocks_;
  Index rows_ = 0;
  Index cols_ = 0;
};

// Skew-symmetric embedding [[0, -A^T], [A, 0]] acting on stacked (x, y).
inline LinearOperator make_skew(const BlockRowOperator& a) {
  const Index n = a.cols(), m = a.rows();
  auto apply = [a, n, m](const Vec& v) {
    Vec out(n + m);
    out.head(n) = -a.apply_adjoint(v.tail(m));
    out.tail(m) = a.apply(v.head(n));
    return out;
  };
  auto adj = [a, n, m](const Vec& v) {
    Vec out(n + m);
    out.head(n) = a.apply_adjoint(v.tail(m));
    out.tail(m) = -a.apply(v.head(n));
    return out;
  };
  return LinearOperator(n + m, n + m, apply, adj, "S_A");
}

struct NormEstimate {
  double value = 0.0;   // estimate of the squared spectral norm
  int iterations = 0;
  bool converged = false;
};

// Power iteration on adjoint∘forward. The start vector is fixed (all ones
// plus a smooth perturbation) so repeated runs give identical estimates.
// Non-convergence within max_iter is flagged, not silently dropped.
inline NormEstimate op_norm_sq_est(const LinearOperator& op, double tol = 1e-10,
                                   int max_iter = 10000) {
  if (tol <= 0) throw std::invalid_argument("op_norm_sq_est: tol must be > 0");
  const Index n = op.cols();
  Vec z(n);
  for (Index i = 0; i < n; ++i)
    z[i] = 1.0 + 0.1 * std::sin(1.7 * static_cast<double>(i + 1));
  z /= z.norm();
  double lambda = 0.0;
  NormEstimate est;
  for (int it = 1; it <= max_iter; ++it) {
    Vec w = op.apply_adjoint(op.apply(z));
    const double rayleigh = z.dot(w);  // = ||op z||^2 for unit z
    est.iterations = it;
    if (it > 1 && std::abs(rayleigh - lambda) <= tol * std::max(std::abs(rayleigh), 1e-30)) {
      est.value = rayleigh;
      est.converged = true;
      return est;
    }
    lambda = rayleigh;
    const double wn = w.norm();
    if (wn == 0.0) {  // z in the kernel of op^T op: zero operator direction
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    z = w / wn;
  }
  est.value = lambda;
  est.converged = false;
  return est;
}

// Dense realization dumped as row-major CSV, for external cross-checking of
// small operators.
inline void write_dense_csv(const LinearOperator& op, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dense_csv: cannot open " + path);
  const Mat m = op.to_dense();
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf << (j + 1 < m.cols() ? "," : "");
    }
    out << "\n";
  }
}

}  // namespace tsfpp
