#include "mfse/mf_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfse {

double CMat::trace_real() const {
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) t += at(i, i).real();
  return t;
}

bool CMat::finite() const {
  for (const cd& v : a) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

CMat identity(std::size_t n) {
  CMat m(n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

CMat add(const CMat& x, const CMat& y) {
  if (x.n != y.n) throw std::invalid_argument("matrix add: dim mismatch");
  CMat r(x.n);
  for (std::size_t i = 0; i < x.a.size(); ++i) r.a[i] = x.a[i] + y.a[i];
  return r;
}

CMat scale(const CMat& x, double c) {
  CMat r = x;
  for (cd& v : r.a) v *= c;
  return r;
}

CMat mul_ah(const CMat& x, const CMat& y) {
  if (x.n != y.n) throw std::invalid_argument("mul_ah: dim mismatch");
  const std::size_t n = x.n;
  CMat r(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cd s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        s += x.at(i, k) * std::conj(y.at(j, k));
      }
      r.at(i, j) = s;
    }
  }
  return r;
}

cvec matvec(const CMat& m, const cvec& v) {
  if (m.n != v.size()) throw std::invalid_argument("matvec: dim mismatch");
  cvec r(m.n, 0.0);
  for (std::size_t i = 0; i < m.n; ++i) {
    cd s = 0.0;
    for (std::size_t j = 0; j < m.n; ++j) s += m.at(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

cd dot_conj(const cvec& x, const cvec& y) {
  if (x.size() != y.size()) throw std::invalid_argument("dot: dim mismatch");
  cd s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  return s;
}

CMat outer_self(const cvec& v) {
  const std::size_t n = v.size();
  CMat m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.at(i, i) = cd(std::norm(v[i]), 0.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const cd p = v[i] * std::conj(v[j]);
      m.at(i, j) = p;
      m.at(j, i) = std::conj(p);
    }
  }
  return m;
}

void symmetrize(CMat& m) {
  for (std::size_t i = 0; i < m.n; ++i) {
    m.at(i, i) = cd(m.at(i, i).real(), 0.0);
    for (std::size_t j = i + 1; j < m.n; ++j) {
      const cd v = 0.5 * (m.at(i, j) + std::conj(m.at(j, i)));
      m.at(i, j) = v;
      m.at(j, i) = std::conj(v);
    }
  }
}

CMat cholesky(const CMat& m) {
  const std::size_t n = m.n;
  CMat l(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      cd s = m.at(i, j);
      for (std::size_t k = 0; k < j; ++k) {
        s -= l.at(i, k) * std::conj(l.at(j, k));
      }
      if (i == j) {
        const double d = s.real();
        if (!(d > 0.0)) {
          throw std::runtime_error("cholesky: matrix not positive definite");
        }
        l.at(i, i) = std::sqrt(d);
      } else {
        l.at(i, j) = s / l.at(j, j).real();
      }
    }
  }
  return l;
}

cvec cholesky_solve(const CMat& lower, const cvec& rhs) {
  const std::size_t n = lower.n;
  cvec y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    cd s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower.at(i, k) * y[k];
    y[i] = s / lower.at(i, i).real();
  }
  for (std::size_t ii = n; ii-- > 0;) {
    cd s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) {
      s -= std::conj(lower.at(k, ii)) * x[k];
    }
    x[ii] = s / lower.at(ii, ii).real();
  }
  return x;
}

double cholesky_condition_estimate(const CMat& lower) {
  double dmin = lower.at(0, 0).real(), dmax = dmin;
  for (std::size_t i = 1; i < lower.n; ++i) {
    const double d = lower.at(i, i).real();
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  if (dmin <= 0.0) return std::numeric_limits<double>::infinity();
  const double r = dmax / dmin;
  return r * r;
}

std::vector<double> hermitian_eigenvalues(const CMat& m) {
  // Real-symmetric embedding [[X, -Y], [Y, X]] of A = X + iY has the
  // eigenvalues of A, each with multiplicity two.
  const std::size_t n = m.n;
  CMat h = m;
  symmetrize(h);
  const std::size_t d = 2 * n;
  std::vector<double> a(d * d, 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& {
    return a[i * d + j];
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double x = h.at(i, j).real();
      const double y = h.at(i, j).imag();
      at(i, j) = x;
      at(n + i, n + j) = x;
      at(i, n + j) = -y;
      at(n + i, j) = y;
    }
  }
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return std::vector<double>(n, 0.0);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) off += at(p, q) * at(p, q);
    }
    if (off < 1e-28 * scale * scale) break;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = 0.5 * std::atan2(2.0 * apq, at(q, q) - at(p, p));
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (std::size_t i = 0; i < d; ++i) {
          const double aip = at(i, p);
          const double aiq = at(i, q);
          at(i, p) = c * aip - s * aiq;
          at(i, q) = s * aip + c * aiq;
        }
        for (std::size_t j = 0; j < d; ++j) {
          const double apj = at(p, j);
          const double aqj = at(q, j);
          at(p, j) = c * apj - s * aqj;
          at(q, j) = s * apj + c * aqj;
        }
      }
    }
  }
  std::vector<double> all(d);
  for (std::size_t i = 0; i < d; ++i) all[i] = at(i, i);
  std::sort(all.begin(), all.end());
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = 0.5 * (all[2 * i] + all[2 * i + 1]);
  return ev;
}

std::vector<cvec> stack_frames(const Spectrogram& s, std::size_t bin,
                               std::size_t taps) {
  if (taps < 1) throw std::invalid_argument("stack_frames: N must be >= 1");
  if (bin >= s.bins) throw std::invalid_argument("stack_frames: bad bin");
  std::vector<cvec> out(s.frames);
  for (std::size_t l = 0; l < s.frames; ++l) {
    cvec v(taps, 0.0);
    for (std::size_t i = 0; i < taps && i <= l; ++i) {
      v[i] = s.at(bin, l - i);
    }
    out[l] = std::move(v);
  }
  return out;
}

cvec ifc_from_correlation(const CMat& phi) {
  const double power = phi.at(0, 0).real();
  if (!(power > kEpsDiv)) {
    throw std::runtime_error("ifc: degenerate power (e^T Phi e too small)");
  }
  cvec g(phi.n);
  g[0] = 1.0;
  for (std::size_t i = 1; i < phi.n; ++i) g[i] = phi.at(i, 0) / power;
  return g;
}

cvec ifc_from_snr(const CMat& phi_y, const CMat& phi_n, double xi) {
  if (phi_y.n != phi_n.n) throw std::invalid_argument("ifc: dim mismatch");
  const cvec gy = ifc_from_correlation(phi_y);
  const cvec gn = ifc_from_correlation(phi_n);
  const double cy = (1.0 + xi) / xi;
  const double cn = 1.0 / xi;
  cvec g(phi_y.n);
  g[0] = 1.0;  // (1+xi)/xi - 1/xi == 1 algebraically
  for (std::size_t i = 1; i < g.size(); ++i) g[i] = cy * gy[i] - cn * gn[i];
  return g;
}

double correlation_additivity_check(const CMat& phi_x, const CMat& phi_n,
                                    const CMat& phi_y) {
  if (phi_x.n != phi_n.n || phi_x.n != phi_y.n) {
    throw std::invalid_argument("additivity check: dim mismatch");
  }
  double r = 0.0;
  for (std::size_t i = 0; i < phi_x.a.size(); ++i) {
    r = std::max(r, std::abs(phi_y.a[i] - phi_x.a[i] - phi_n.a[i]));
  }
  return r;
}

double clamp_xi(double xi, double floor, double ceil) {
  return std::min(std::max(xi, floor), ceil);
}

}  // namespace mfse
