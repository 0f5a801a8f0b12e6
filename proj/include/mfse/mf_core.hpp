// Fixed-small-dimension complex linear algebra and interframe-correlation
// vectors. N is the number of stacked STFT frames (<= 16).
#pragma once

#include <complex>
#include <vector>

#include "mfse/stft.hpp"

namespace mfse {

using cvec = std::vector<cd>;

constexpr std::size_t kMaxTaps = 16;
constexpr double kEpsDiv = 1e-12;   // guard on e^T Phi e divisions
constexpr double kXiFloor = 1e-4;   // a-priori SNR clamp range
constexpr double kXiCeil = 1e6;

// Dense N x N complex matrix, row-major. Hermitian symmetry is maintained by
// the constructors below, not re-checked on every access.
struct CMat {
  std::size_t n = 0;
  std::vector<cd> a;

  CMat() = default;
  explicit CMat(std::size_t dim) : n(dim), a(dim * dim) {}
  cd& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
  const cd& at(std::size_t i, std::size_t j) const { return a[i * n + j]; }

  double trace_real() const;
  bool finite() const;
};

CMat identity(std::size_t n);
CMat add(const CMat& x, const CMat& y);
CMat scale(const CMat& x, double c);
// x * y^H
CMat mul_ah(const CMat& x, const CMat& y);
cvec matvec(const CMat& m, const cvec& v);
cd dot_conj(const cvec& x, const cvec& y);  // x^H y

// v v^H, Hermitian by construction.
CMat outer_self(const cvec& v);
// Forces exact conjugate symmetry by averaging with the conjugate transpose.
void symmetrize(CMat& m);

// Cholesky factorization of a Hermitian positive-definite matrix; returns the
// lower factor. Throws on a non-positive pivot.
CMat cholesky(const CMat& m);
cvec cholesky_solve(const CMat& lower, const cvec& rhs);
// Rough 1-norm condition estimate via the factor's diagonal extremes.
double cholesky_condition_estimate(const CMat& lower);

// Eigenvalues of a Hermitian matrix by the cyclic Jacobi method, ascending.
std::vector<double> hermitian_eigenvalues(const CMat& m);

// Multi-frame vector for one (k, l): [Y_l, Y_{l-1}, ..., Y_{l-N+1}];
// missing past frames at the start of the signal are zero.
std::vector<cvec> stack_frames(const Spectrogram& s, std::size_t bin,
                               std::size_t taps);

// gamma = Phi e / (e^T Phi e); first entry exactly 1.
cvec ifc_from_correlation(const CMat& phi);

// gamma_x = ((1+xi)/xi) * gamma_y - (1/xi) * gamma_n; first entry exactly 1.
cvec ifc_from_snr(const CMat& phi_y, const CMat& phi_n, double xi);

// max |phi_y - phi_x - phi_n| entrywise; diagnostic for the additive model.
double correlation_additivity_check(const CMat& phi_x, const CMat& phi_n,
                                    const CMat& phi_y);

double clamp_xi(double xi, double floor = kXiFloor, double ceil = kXiCeil);

}  // namespace mfse
