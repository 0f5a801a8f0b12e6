#include "mfse/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mfse {

bool is_power_of_two(std::size_t n) {
  return n != 0 && (n & (n - 1)) == 0;
}

void fft_inplace(std::vector<cd>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("fft: size must be a power of two");
  }
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang =
        2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const cd wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cd w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        cd u = a[i + j];
        cd v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (cd& x : a) x /= static_cast<double>(n);
  }
}

std::vector<cd> rfft(const double* x, std::size_t n) {
  std::vector<cd> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = cd(x[i], 0.0);
  fft_inplace(a, false);
  a.resize(n / 2 + 1);
  return a;
}

std::vector<double> irfft(const std::vector<cd>& half, std::size_t n) {
  if (half.size() != n / 2 + 1) {
    throw std::invalid_argument("irfft: bin count does not match length");
  }
  std::vector<cd> a(n);
  a[0] = cd(half[0].real(), 0.0);
  a[n / 2] = cd(half[n / 2].real(), 0.0);
  for (std::size_t k = 1; k < n / 2; ++k) {
    a[k] = half[k];
    a[n - k] = std::conj(half[k]);
  }
  fft_inplace(a, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i].real();
  return out;
}

}  // namespace mfse
